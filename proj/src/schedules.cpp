#include "qb/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qb {

namespace {

double as_real(std::int64_t T) { return static_cast<double>(T); }

void require_positive(double v, const char *what) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw ConfigError(std::string(what) + " must be finite and > 0");
}

void require_nonnegative(double v, const char *what) {
  if (!(v >= 0.0) || !std::isfinite(v))
    throw ConfigError(std::string(what) + " must be finite and >= 0");
}

void require_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw ConfigError("gamma must lie in (0, 1]");
}

void require_horizon(std::int64_t T) {
  if (T < 1)
    throw ConfigError("horizon T must be >= 1");
}

// Smallest T >= lo with bound(T) <= epsilon for a bound that is
// non-increasing in T. Doubling bracket, then bisection.
template <typename Bound>
std::int64_t first_below(Bound &&bound, double epsilon, std::int64_t lo) {
  constexpr std::int64_t kCap = std::int64_t{1} << 60;
  if (bound(lo) <= epsilon)
    return lo;
  std::int64_t good = std::max<std::int64_t>(lo, 1);
  while (bound(good) > epsilon) {
    if (good >= kCap)
      throw RegimeError("iteration count exceeds 2^60");
    good *= 2;
  }
  std::int64_t bad = std::max(lo, good / 2);
  if (bound(bad) <= epsilon)
    bad = lo;
  while (good - bad > 1) {
    const std::int64_t mid = bad + (good - bad) / 2;
    if (bound(mid) <= epsilon)
      good = mid;
    else
      bad = mid;
  }
  return good;
}

} // namespace

double qc_constant_alpha(double R, double sigma, double L, std::int64_t T) {
  require_positive(R, "R");
  require_positive(L, "L");
  require_nonnegative(sigma, "sigma");
  require_horizon(T);
  const double cap = 1.0 / (2.0 * L);
  if (sigma > 0.0 && as_real(T) > R * R * L * L / (sigma * sigma))
    return std::min(cap, R / (2.0 * sigma * std::sqrt(as_real(T))));
  return cap;
}

double qc_bound(std::int64_t T, double R, double sigma, double L,
                double gamma) {
  require_nonnegative(R, "R");
  require_nonnegative(sigma, "sigma");
  require_nonnegative(L, "L");
  require_gamma(gamma);
  require_horizon(T);
  const double t = as_real(T);
  return 4.0 * (R * sigma / (gamma * std::sqrt(t)) + R * R * L / (gamma * t));
}

std::int64_t qc_iterations(double epsilon, double R, double sigma, double L,
                           double gamma) {
  require_positive(epsilon, "epsilon");
  return first_below(
      [&](std::int64_t T) { return qc_bound(T, R, sigma, L, gamma); }, epsilon,
      1);
}

std::int64_t sqc_min_T(double gamma, double mu, double L, double R,
                       double sigma) {
  require_gamma(gamma);
  require_positive(mu, "mu");
  require_positive(L, "L");
  require_positive(R, "R");
  require_nonnegative(sigma, "sigma");
  if (sigma == 0.0)
    throw RegimeError("log-scaled schedule needs sigma > 0");
  const double s2 = sigma * sigma;
  const double t1 = 3.0 * s2 / (gamma * gamma * mu * mu * R * R);
  const double t2 =
      6.0 * L / (gamma * gamma * mu) * (std::log(2.0 * L * mu * R * R / s2) + 1.0);
  const double threshold = std::max(t1, t2);
  if (threshold < 1.0)
    return 1;
  return static_cast<std::int64_t>(std::floor(threshold)) + 1;
}

double sqc_log_alpha(double gamma, double mu, double R, double sigma, double L,
                     std::int64_t T) {
  require_horizon(T);
  const std::int64_t min_T = sqc_min_T(gamma, mu, L, R, sigma);
  if (T < min_T)
    throw RegimeError("horizon T = " + std::to_string(T) +
                          " below the admissible threshold",
                      min_T);
  const double t = as_real(T);
  return std::log(gamma * gamma * mu * mu * t * R * R / (sigma * sigma)) /
         (gamma * mu * t);
}

double sqc_bound_at(std::int64_t T, double alpha, double gamma, double mu,
                    double L, double R, double sigma) {
  require_horizon(T);
  require_positive(alpha, "alpha");
  const double margin = gamma - alpha * L;
  if (!(margin > 0.0))
    throw RegimeError("gamma - alpha L must be positive");
  const double rate = gamma * mu * alpha;
  if (!(rate > 0.0 && rate < 1.0))
    throw RegimeError("gamma mu alpha must lie in (0, 1)");
  const double qT = std::pow(1.0 - rate, as_real(T));
  const double num = alpha * sigma * sigma / (2.0 * margin) +
                     gamma * mu * qT * R * R / (2.0 * margin);
  return num / (1.0 - qT);
}

double sqc_bound(std::int64_t T, double gamma, double mu, double L, double R,
                 double sigma) {
  const double alpha = sqc_log_alpha(gamma, mu, R, sigma, L, T);
  return sqc_bound_at(T, alpha, gamma, mu, L, R, sigma);
}

std::int64_t sqc_iterations(double epsilon, double gamma, double mu, double L,
                            double R, double sigma) {
  require_positive(epsilon, "epsilon");
  const std::int64_t lo = sqc_min_T(gamma, mu, L, R, sigma);
  return first_below(
      [&](std::int64_t T) { return sqc_bound(T, gamma, mu, L, R, sigma); },
      epsilon, lo);
}

double gower_alpha(double gamma, double mu, double R, double sigma,
                   std::int64_t T) {
  require_gamma(gamma);
  require_positive(mu, "mu");
  require_positive(R, "R");
  require_nonnegative(sigma, "sigma");
  require_horizon(T);
  const double t = as_real(T);
  const double arg = mu * mu * gamma * gamma * R * R * t / (2.0 * sigma * sigma);
  if (!(arg > 1.0) || !std::isfinite(arg)) {
    // arg grows linearly in T; report the first T that clears 1.
    std::int64_t min_T = 0;
    if (sigma > 0.0) {
      const double need = 2.0 * sigma * sigma / (mu * mu * gamma * gamma * R * R);
      min_T = static_cast<std::int64_t>(std::floor(need)) + 1;
    }
    throw RegimeError("log argument of the distance-optimal step must exceed 1",
                      min_T);
  }
  return std::log(arg) / (mu * gamma * t);
}

double gower_distance_bound(std::int64_t T, double gamma, double mu, double R,
                            double sigma, double alpha) {
  require_horizon(T);
  const double rate = alpha * mu * gamma;
  if (!(rate > 0.0 && rate < 1.0))
    throw RegimeError("alpha mu gamma must lie in (0, 1)");
  return std::exp(-rate * as_real(T)) * R * R +
         2.0 * alpha * sigma * sigma / (mu * gamma);
}

double gower_appendix_bound(std::int64_t T, double R, double sigma,
                            double gamma, double L, double beta) {
  require_horizon(T);
  require_gamma(gamma);
  require_positive(beta, "beta");
  const double t = as_real(T);
  const double alpha = beta / std::sqrt(t);
  const double margin = gamma - L * alpha;
  if (!(margin > 0.0))
    throw RegimeError("beta / sqrt(T) must stay below gamma / L");
  return R * R / (2.0 * t * alpha * margin) + alpha * sigma * sigma / margin;
}

double nonsmooth_alpha(double R, double G, std::int64_t T) {
  require_positive(R, "R");
  require_positive(G, "G");
  require_horizon(T);
  return R / (G * std::sqrt(as_real(T)));
}

double nonsmooth_harmonic_alpha(double gamma, double mu, std::int64_t t) {
  require_gamma(gamma);
  require_positive(mu, "mu");
  if (t < 1)
    throw ConfigError("harmonic schedule: t must be >= 1");
  return 1.0 / (gamma * mu * as_real(t));
}

double nonsmooth_bound(std::int64_t T, double R, double G, double gamma) {
  require_horizon(T);
  require_gamma(gamma);
  return R * G / (gamma * std::sqrt(as_real(T)));
}

double nonsmooth_harmonic_distance_bound(std::int64_t t, double G, double gamma,
                                         double mu) {
  require_gamma(gamma);
  require_positive(mu, "mu");
  if (t < 1)
    throw ConfigError("harmonic bound: t must be >= 1");
  return G * G / (gamma * gamma * mu * mu * as_real(t));
}

double grad_from_subopt(double epsilon_grad, double L) {
  require_positive(epsilon_grad, "epsilon_grad");
  require_positive(L, "L");
  return epsilon_grad * epsilon_grad / (2.0 * L);
}

// ---------------------------------------------------------------------------

std::string to_string(ScheduleKind k) {
  switch (k) {
  case ScheduleKind::qc_constant:
    return "qc_constant";
  case ScheduleKind::sqc_log:
    return "sqc_log";
  case ScheduleKind::gower_log:
    return "gower_log";
  case ScheduleKind::nonsmooth_constant:
    return "nonsmooth_constant";
  case ScheduleKind::nonsmooth_harmonic:
    return "nonsmooth_harmonic";
  case ScheduleKind::fixed:
    return "fixed";
  }
  return "unknown";
}

ScheduleKind schedule_kind_from_string(const std::string &name) {
  for (auto k : {ScheduleKind::qc_constant, ScheduleKind::sqc_log,
                 ScheduleKind::gower_log, ScheduleKind::nonsmooth_constant,
                 ScheduleKind::nonsmooth_harmonic, ScheduleKind::fixed})
    if (to_string(k) == name)
      return k;
  throw ConfigError("unknown schedule '" + name + "'");
}

StepSchedule::StepSchedule(ScheduleKind kind, const ScheduleParams &params,
                           std::int64_t T)
    : kind_(kind), params_(params), T_(T) {
  require_horizon(T);
  const ScheduleParams &p = params_;
  switch (kind_) {
  case ScheduleKind::qc_constant:
    alpha_ = qc_constant_alpha(p.R, p.sigma, p.L, T);
    break;
  case ScheduleKind::sqc_log:
    alpha_ = sqc_log_alpha(p.gamma, p.mu, p.R, p.sigma, p.L, T);
    break;
  case ScheduleKind::gower_log:
    alpha_ = gower_alpha(p.gamma, p.mu, p.R, p.sigma, T);
    break;
  case ScheduleKind::nonsmooth_constant:
    alpha_ = nonsmooth_alpha(p.R, p.G, T);
    break;
  case ScheduleKind::nonsmooth_harmonic:
    alpha_ = nonsmooth_harmonic_alpha(p.gamma, p.mu, 1);
    break;
  case ScheduleKind::fixed:
    require_positive(p.alpha, "fixed step alpha");
    alpha_ = p.alpha;
    break;
  }
}

double StepSchedule::alpha(std::int64_t t) const {
  if (kind_ == ScheduleKind::nonsmooth_harmonic)
    return nonsmooth_harmonic_alpha(params_.gamma, params_.mu, t);
  return alpha_;
}

std::map<std::string, double> StepSchedule::describe() const {
  return {{"R", params_.R},         {"sigma", params_.sigma},
          {"L", params_.L},         {"gamma", params_.gamma},
          {"mu", params_.mu},       {"G", params_.G},
          {"T", as_real(T_)},       {"alpha", alpha_}};
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const PhasePlan &p) {
  return {{"epsilon", p.epsilon},
          {"epsilon1", p.epsilon1},
          {"stage1_iters", p.stage1_iters},
          {"stage2_iters", p.stage2_iters},
          {"stage2_alpha", p.stage2_alpha},
          {"stage1_leading", p.stage1_leading},
          {"stage2_leading", p.stage2_leading},
          {"constants", p.constants}};
}

namespace {

std::int64_t ceil_count(double v) {
  if (!std::isfinite(v) || v > 9.0e18)
    throw RegimeError("iteration count overflows");
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(v)));
}

} // namespace

double stage2_sgd_alpha(double epsilon1, double L, double sigma,
                        std::int64_t K) {
  const double cap = 1.0 / (2.0 * L);
  if (sigma == 0.0)
    return cap;
  return std::min(cap, std::sqrt(epsilon1 / (L * sigma * sigma * as_real(K))));
}

PhasePlan split_det(double epsilon, double gamma, double R, double L) {
  require_positive(epsilon, "epsilon");
  require_gamma(gamma);
  require_positive(R, "R");
  require_positive(L, "L");
  PhasePlan p;
  p.epsilon = epsilon;
  p.epsilon1 = std::cbrt(R * R * std::pow(epsilon, 4) / gamma);
  p.stage1_leading = std::sqrt(L * R * R / (gamma * p.epsilon1));
  p.stage2_leading = L * p.epsilon1 / (epsilon * epsilon);
  p.stage1_iters = qc_iterations(p.epsilon1, R, 0.0, L, gamma);
  p.stage2_iters =
      ceil_count(kStage2DescentConstant * L * p.epsilon1 / (epsilon * epsilon));
  p.stage2_alpha = 1.0 / L;
  p.constants = {{"stage2_descent_constant", kStage2DescentConstant},
                 {"qc_bound_constant", 4.0}};
  return p;
}

PhasePlan split_sto(double epsilon, double gamma, double R, double L,
                    double sigma) {
  require_nonnegative(sigma, "sigma");
  if (sigma == 0.0)
    return split_det(epsilon, gamma, R, L);
  require_positive(epsilon, "epsilon");
  require_gamma(gamma);
  require_positive(R, "R");
  require_positive(L, "L");
  const double s2 = sigma * sigma;
  const double e4 = std::pow(epsilon, 4);
  PhasePlan p;
  p.epsilon = epsilon;
  // Balances R^2 s^2 / (g^2 e1^2) against L e1 s^2 / e^4.
  p.epsilon1 = std::cbrt(R * R * e4 / (gamma * gamma * L));
  p.stage1_leading = R * R * s2 / (gamma * gamma * p.epsilon1 * p.epsilon1);
  p.stage2_leading = L * p.epsilon1 * s2 / e4;
  p.stage1_iters = qc_iterations(p.epsilon1, R, sigma, L, gamma);
  p.stage2_iters = ceil_count(kStage2SgdConstant * p.stage2_leading);
  p.stage2_alpha = stage2_sgd_alpha(p.epsilon1, L, sigma, p.stage2_iters);
  p.constants = {{"stage2_sgd_constant", kStage2SgdConstant},
                 {"qc_bound_constant", 4.0}};
  return p;
}

PhasePlan split_sqc(double epsilon, double gamma, double mu, double L,
                    double sigma, double R) {
  require_positive(epsilon, "epsilon");
  require_gamma(gamma);
  require_positive(mu, "mu");
  require_positive(L, "L");
  require_positive(sigma, "sigma");
  const double s2 = sigma * sigma;
  const double e4 = std::pow(epsilon, 4);
  PhasePlan p;
  p.epsilon = epsilon;
  // Balances s^2 / (g^2 mu e1) against L s^2 e1 / e^4.
  p.epsilon1 = epsilon * epsilon / (gamma * std::sqrt(L * mu));
  p.stage1_leading = s2 / (gamma * gamma * mu * p.epsilon1);
  p.stage2_leading = L * s2 * p.epsilon1 / e4;
  p.stage1_iters = sqc_iterations(p.epsilon1, gamma, mu, L, R, sigma);
  p.stage2_iters = ceil_count(kStage2SgdConstant * p.stage2_leading);
  p.stage2_alpha = stage2_sgd_alpha(p.epsilon1, L, sigma, p.stage2_iters);
  p.constants = {{"stage2_sgd_constant", kStage2SgdConstant}};
  return p;
}

} // namespace qb
