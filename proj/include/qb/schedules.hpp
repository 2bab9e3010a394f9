#pragma once

// Step-size rules, phase splits, iteration counts and guaranteed-bound
// evaluators. Everything here is a pure function of the certified constants.

#include "qb/errors.hpp"

#include "json.hpp"

#include <cstdint>
#include <map>
#include <string>

namespace qb {

// ---- constant-step SGD on L-smooth gamma-quasar-convex functions ----------

// R / (2 sigma sqrt(T)) when sigma > 0 and T > R^2 L^2 / sigma^2, otherwise
// 1 / (2L). Never exceeds 1 / (2L).
double qc_constant_alpha(double R, double sigma, double L, std::int64_t T);

// 4 (R sigma / (gamma sqrt T) + R^2 L / (gamma T)): bound on the running
// average of expected suboptimality over t = 1..T.
double qc_bound(std::int64_t T, double R, double sigma, double L, double gamma);

// Smallest T with qc_bound(T) <= epsilon.
std::int64_t qc_iterations(double epsilon, double R, double sigma, double L,
                           double gamma);

// ---- strongly quasar-convex, log-scaled constant step ---------------------

// Smallest T strictly above
// max{3 sigma^2/(gamma^2 mu^2 R^2), (6L/(gamma^2 mu)) (log(2 L mu R^2/sigma^2) + 1)}.
// Throws RegimeError when sigma == 0 (the formula has no noiseless limit).
std::int64_t sqc_min_T(double gamma, double mu, double L, double R,
                       double sigma);

// log(gamma^2 mu^2 T R^2 / sigma^2) / (gamma mu T). Throws RegimeError
// carrying sqc_min_T when T is below the admissible horizon.
double sqc_log_alpha(double gamma, double mu, double R, double sigma, double L,
                     std::int64_t T);

// Closed-form bound on E[f(X) - f*] for the geometric-weighted output:
// [a s^2/(2(g - aL)) + g mu q^T R^2/(2(g - aL))] / (1 - q^T), q = 1 - g mu a.
// alpha defaults to sqc_log_alpha.
double sqc_bound(std::int64_t T, double gamma, double mu, double L, double R,
                 double sigma);
double sqc_bound_at(std::int64_t T, double alpha, double gamma, double mu,
                    double L, double R, double sigma);

// Smallest admissible T with sqc_bound(T) <= epsilon.
std::int64_t sqc_iterations(double epsilon, double gamma, double mu, double L,
                            double R, double sigma);

// ---- comparison schedules -------------------------------------------------

// log(mu^2 gamma^2 R^2 T / (2 sigma^2)) / (mu gamma T); RegimeError when the
// log argument is <= 1.
double gower_alpha(double gamma, double mu, double R, double sigma,
                   std::int64_t T);

// exp(-alpha mu gamma T) R^2 + 2 alpha sigma^2 / (mu gamma).
double gower_distance_bound(std::int64_t T, double gamma, double mu, double R,
                            double sigma, double alpha);

// R^2 / (2 T a (gamma - L a)) + a sigma^2 / (gamma - L a), a = beta / sqrt(T).
double gower_appendix_bound(std::int64_t T, double R, double sigma,
                            double gamma, double L, double beta);

// ---- non-smooth -----------------------------------------------------------

double nonsmooth_alpha(double R, double G, std::int64_t T);
// 1 / (gamma mu t)
double nonsmooth_harmonic_alpha(double gamma, double mu, std::int64_t t);
// R G / (gamma sqrt T)
double nonsmooth_bound(std::int64_t T, double R, double G, double gamma);
// G^2 / (gamma^2 mu^2 t)
double nonsmooth_harmonic_distance_bound(std::int64_t t, double G, double gamma,
                                         double mu);

// Suboptimality target that guarantees ||grad f|| <= epsilon_grad through
// ||grad f||^2 <= 2L (f - f*).
double grad_from_subopt(double epsilon_grad, double L);

// ---- schedules as values --------------------------------------------------

enum class ScheduleKind {
  qc_constant,
  sqc_log,
  gower_log,
  nonsmooth_constant,
  nonsmooth_harmonic,
  fixed
};

std::string to_string(ScheduleKind k);
ScheduleKind schedule_kind_from_string(const std::string &name);

struct ScheduleParams {
  double R = 0.0;
  double sigma = 0.0;
  double L = 0.0;
  double gamma = 1.0;
  double mu = 0.0;
  double G = 0.0;
  double alpha = 0.0; // for fixed
};

class StepSchedule {
public:
  // Validates the regime for horizon T; throws RegimeError otherwise.
  StepSchedule(ScheduleKind kind, const ScheduleParams &params, std::int64_t T);

  ScheduleKind kind() const { return kind_; }
  std::int64_t horizon() const { return T_; }
  const ScheduleParams &params() const { return params_; }

  // Step used for x_t = x_{t-1} - alpha_t g, 1 <= t <= T.
  double alpha(std::int64_t t) const;

  // True when every step equals alpha(1).
  bool constant() const { return kind_ != ScheduleKind::nonsmooth_harmonic; }

  std::map<std::string, double> describe() const;

private:
  ScheduleKind kind_;
  ScheduleParams params_;
  std::int64_t T_;
  double alpha_ = 0.0;
};

// ---- phase plans for the two-phase stationarity methods -------------------

struct PhasePlan {
  double epsilon = 0.0;
  double epsilon1 = 0.0;
  std::int64_t stage1_iters = 0;
  std::int64_t stage2_iters = 0;
  double stage2_alpha = 0.0;
  // Leading complexity terms the split balances, before explicit constants.
  double stage1_leading = 0.0;
  double stage2_leading = 0.0;
  // Named constants realizing the hidden O(.) factors.
  std::map<std::string, double> constants;
};

nlohmann::json to_json(const PhasePlan &p);

// Stage-two multiplier for nonconvex SGD: K = ceil(c L eps1 sigma^2 / eps^4).
inline constexpr double kStage2SgdConstant = 16.0;
// Stage-two descent-lemma multiplier: K = ceil(2 L eps1 / eps^2).
inline constexpr double kStage2DescentConstant = 2.0;

// Deterministic split. Stage 1 budget is the noiseless SGD count
// qc_iterations(eps1; R, 0, L, gamma); stage 2 runs GD with step 1/L.
PhasePlan split_det(double epsilon, double gamma, double R, double L);

// Stochastic quasar-convex split; falls back to split_det when sigma == 0.
PhasePlan split_sto(double epsilon, double gamma, double R, double L,
                    double sigma);

// Stochastic strongly-quasar-convex split. R is needed for the stage-1
// budget (sqc_iterations); it does not enter eps1.
PhasePlan split_sqc(double epsilon, double gamma, double mu, double L,
                    double sigma, double R);

// Step for stage-two nonconvex SGD with K iterations.
double stage2_sgd_alpha(double epsilon1, double L, double sigma,
                        std::int64_t K);

} // namespace qb
