#include "qb/solvers.hpp"

#include "qb/kernels.hpp"

#include <chrono>
#include <cmath>
#include <random>

namespace qb {

std::string to_string(OutputKind k) {
  switch (k) {
  case OutputKind::uniform_random:
    return "uniform";
  case OutputKind::geometric_weighted:
    return "geometric";
  case OutputKind::tail_uniform:
    return "tail_uniform";
  case OutputKind::last_iterate:
    return "last";
  case OutputKind::best_gradient:
    return "best_gradient";
  }
  return "unknown";
}

OutputKind output_kind_from_string(const std::string &name) {
  for (auto k : {OutputKind::uniform_random, OutputKind::geometric_weighted,
                 OutputKind::tail_uniform, OutputKind::last_iterate,
                 OutputKind::best_gradient})
    if (to_string(k) == name)
      return k;
  throw ConfigError("unknown output rule '" + name + "'");
}

OutputRule OutputRule::geometric(double gamma_mu_alpha) {
  OutputRule r{OutputKind::geometric_weighted, 1.0 - gamma_mu_alpha};
  r.validate();
  return r;
}

void OutputRule::validate() const {
  if (kind == OutputKind::geometric_weighted && !(q >= 0.0 && q <= 1.0))
    throw ConfigError("geometric output rule: q must lie in [0, 1]");
}

namespace {

std::int64_t tail_start(std::int64_t T) { return T / 2; }

// 1 - q^T computed without cancellation.
double one_minus_pow(double q, std::int64_t T) {
  return -std::expm1(static_cast<double>(T) * std::log(q));
}

double uniform01(CounterEngine &rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

std::int64_t uniform_index(CounterEngine &rng, std::int64_t first,
                           std::int64_t count) {
  return std::uniform_int_distribution<std::int64_t>(first, first + count - 1)(
      rng);
}

} // namespace

double output_weight(const OutputRule &rule, std::int64_t T, std::int64_t t) {
  if (T < 1)
    throw ConfigError("output rule: T must be >= 1");
  const double n = static_cast<double>(T);
  switch (rule.kind) {
  case OutputKind::uniform_random:
    return (t >= 1 && t <= T) ? 1.0 / n : 0.0;
  case OutputKind::geometric_weighted: {
    rule.validate();
    if (t < 0 || t > T - 1)
      return 0.0;
    if (rule.q == 1.0)
      return 1.0 / n;
    if (rule.q == 0.0)
      return t == T - 1 ? 1.0 : 0.0;
    const double lq = std::log(rule.q);
    return std::exp(static_cast<double>(T - t - 1) * lq) * (1.0 - rule.q) /
           one_minus_pow(rule.q, T);
  }
  case OutputKind::tail_uniform: {
    const std::int64_t a = tail_start(T);
    return (t >= a && t <= T) ? 1.0 / static_cast<double>(T - a + 1) : 0.0;
  }
  case OutputKind::last_iterate:
    return t == T ? 1.0 : 0.0;
  case OutputKind::best_gradient:
    break;
  }
  throw ConfigError("best_gradient has no closed-form output distribution");
}

OutputDistribution output_distribution(const OutputRule &rule, std::int64_t T) {
  OutputDistribution d;
  std::int64_t last = T;
  switch (rule.kind) {
  case OutputKind::uniform_random:
    d.first = 1;
    break;
  case OutputKind::geometric_weighted:
    d.first = 0;
    last = T - 1;
    break;
  case OutputKind::tail_uniform:
    d.first = tail_start(T);
    break;
  case OutputKind::last_iterate:
    d.first = T;
    break;
  case OutputKind::best_gradient:
    throw ConfigError("best_gradient has no closed-form output distribution");
  }
  for (std::int64_t t = d.first; t <= last; ++t)
    d.weights.push_back(output_weight(rule, T, t));
  return d;
}

std::int64_t draw_output_index(const OutputRule &rule, std::int64_t T,
                               CounterEngine &rng) {
  if (T < 1)
    throw ConfigError("output rule: T must be >= 1");
  switch (rule.kind) {
  case OutputKind::uniform_random:
    return uniform_index(rng, 1, T);
  case OutputKind::geometric_weighted: {
    rule.validate();
    if (rule.q == 1.0)
      return uniform_index(rng, 0, T);
    if (rule.q == 0.0)
      return T - 1;
    // s = T - 1 - t follows a geometric law truncated to {0..T-1}; invert
    // its CDF 1 - q^(s+1) normalized by 1 - q^T.
    const double u = uniform01(rng);
    const double s = std::floor(std::log1p(-u * one_minus_pow(rule.q, T)) /
                                std::log(rule.q));
    const auto si = std::clamp<std::int64_t>(static_cast<std::int64_t>(s), 0,
                                             T - 1);
    return T - 1 - si;
  }
  case OutputKind::tail_uniform: {
    const std::int64_t a = tail_start(T);
    return uniform_index(rng, a, T - a + 1);
  }
  case OutputKind::last_iterate:
    return T;
  case OutputKind::best_gradient:
    break;
  }
  throw ConfigError("best_gradient output needs gradient norms");
}

Selection select_output(std::span<const Point> trajectory,
                        const OutputRule &rule, CounterEngine &rng,
                        std::span<const double> grad_norms) {
  if (trajectory.empty())
    throw ConfigError("select_output: empty trajectory");
  const auto T = static_cast<std::int64_t>(trajectory.size()) - 1;
  std::int64_t index = 0;
  if (rule.kind == OutputKind::best_gradient) {
    if (grad_norms.size() != trajectory.size())
      throw ConfigError("select_output: best_gradient needs one norm per iterate");
    for (std::size_t i = 1; i < grad_norms.size(); ++i)
      if (grad_norms[i] < grad_norms[static_cast<std::size_t>(index)])
        index = static_cast<std::int64_t>(i);
  } else {
    if (T < 1)
      throw ConfigError("select_output: trajectory needs x_0 and x_1 at least");
    index = draw_output_index(rule, T, rng);
  }
  return {index, trajectory[static_cast<std::size_t>(index)]};
}

// ---------------------------------------------------------------------------

RunRecord sgd_run(const Oracle &oracle, const StepSchedule &schedule,
                  std::int64_t T, const OutputRule &rule, const Point &x0,
                  const RunOptions &options) {
  const auto started = std::chrono::steady_clock::now();
  const Objective &f = oracle.objective();
  const std::size_t n = f.dimension();
  if (T < 1)
    throw ConfigError("sgd_run: T must be >= 1");
  if (x0.size() != n)
    throw ConfigError("sgd_run: x0 dimension does not match the objective");
  validate_point(x0, "x0");
  rule.validate();

  RunRecord rec;
  rec.config_digest = options.config_digest;
  rec.seed = options.run_seed;
  rec.run_index = options.run_index;
  rec.T = T;
  rec.rule = rule;
  rec.thinning = options.thinning > 0
                     ? options.thinning
                     : (T > 100'000 ? (T + 9'999) / 10'000 : 1);

  const Point &xs = f.minimizer();
  const double R0 = std::sqrt(kernels::sq_dist(x0, xs));
  const double radius = options.divergence_radius > 0.0
                            ? options.divergence_radius
                            : 1e6 * std::max(R0, 1.0);

  CounterEngine select_rng(mix64(options.run_seed ^ kSelectionDomain));
  const bool best_rule = rule.kind == OutputKind::best_gradient;
  rec.output_index = best_rule ? -1 : draw_output_index(rule, T, select_rng);

  Oracle::Stream stream = oracle.stream(options.run_seed);
  Point x = x0, g(n), grad(n), last_finite = x0;
  rec.best_gradient.grad_norm = std::numeric_limits<double>::infinity();
  rec.series.reserve(static_cast<std::size_t>(T / rec.thinning + 2));

  const bool geometric = rule.kind == OutputKind::geometric_weighted &&
                         rule.q > 0.0 && rule.q < 1.0;
  const double log_q = geometric ? std::log(rule.q) : 0.0;
  const double geo_norm =
      geometric ? (1.0 - rule.q) / one_minus_pow(rule.q, T) : 0.0;

  double dist_sq = kernels::sq_dist(x, xs);
  for (std::int64_t t = 0;; ++t) {
    double fx;
    if (t < T) {
      fx = stream.query_into(x, options.position_offset + t, g, grad);
    } else {
      fx = f.value(x);
      f.gradient(x, grad);
    }
    IterateStats s{t, fx - f.min_value(), std::sqrt(kernels::sum_sq(grad)),
                   dist_sq};
    if (!std::isfinite(s.f_gap) || !std::isfinite(s.grad_norm))
      throw DivergenceError("non-finite objective at iterate " +
                                std::to_string(t),
                            t, last_finite);

    if (t == 0)
      rec.initial = s;
    if (t >= 1)
      rec.sum_f_gap += s.f_gap;
    if (t <= T - 1)
      rec.sum_f_gap_from_start += s.f_gap;
    if (s.grad_norm < rec.best_gradient.grad_norm) {
      rec.best_gradient = s;
      if (best_rule)
        rec.output_point = x;
    }
    if (t % rec.thinning == 0 || t == T)
      rec.series.push_back(s);
    if (!best_rule) {
      double w;
      if (geometric)
        w = t <= T - 1 ? std::exp(static_cast<double>(T - t - 1) * log_q) *
                             geo_norm
                       : 0.0;
      else
        w = output_weight(rule, T, t);
      rec.output_expected_f_gap += w * s.f_gap;
      rec.output_expected_grad_norm += w * s.grad_norm;
      if (t == rec.output_index) {
        rec.output = s;
        rec.output_point = x;
      }
    }
    if (t == T) {
      rec.final = s;
      break;
    }

    const double alpha = schedule.alpha(t + 1);
    kernels::axpy(-alpha, g, x);
    for (double v : x)
      if (!std::isfinite(v))
        throw DivergenceError("non-finite iterate at step " +
                                  std::to_string(t + 1),
                              t + 1, last_finite);
    if (std::sqrt(kernels::sum_sq(x)) > radius)
      throw DivergenceError("iterate norm exceeded the divergence radius at "
                            "step " + std::to_string(t + 1),
                            t + 1, last_finite);
    last_finite = x;
    if (options.box && !rec.box_violation && !options.box->contains(x)) {
      rec.box_violation = true;
      rec.first_box_violation = t + 1;
    }
    const double next_dist_sq = kernels::sq_dist(x, xs);
    if (options.contraction) {
      const auto &c = *options.contraction;
      const double factor = 1.0 - c.gamma * c.mu * alpha;
      ++rec.contraction_checks;
      if (next_dist_sq > factor * dist_sq * (1.0 + c.relative_slack))
        ++rec.contraction_violations;
    }
    dist_sq = next_dist_sq;
  }
  if (best_rule) {
    rec.output_index = rec.best_gradient.t;
    rec.output = rec.best_gradient;
    rec.output_expected_f_gap = rec.best_gradient.f_gap;
    rec.output_expected_grad_norm = rec.best_gradient.grad_norm;
  }
  rec.final_point = x;
  rec.queries = stream.queries();
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();
  return rec;
}

// ---------------------------------------------------------------------------

namespace {

ScheduleParams params_from(const ConstantsCertificate &cert, double sigma) {
  ScheduleParams p;
  p.R = cert.R;
  p.sigma = sigma;
  p.L = cert.L;
  p.gamma = cert.gamma;
  p.mu = cert.mu;
  p.G = cert.G;
  return p;
}

void require_smooth_certificate(const ConstantsCertificate &cert) {
  if (!(cert.L > 0.0))
    throw ConfigError("two-phase methods need a certificate with L > 0");
  if (!(cert.R > 0.0))
    throw ConfigError("two-phase methods need R > 0");
}

} // namespace

std::int64_t SgdQcStageOne::budget(const ConstantsCertificate &cert,
                                   double sigma, double epsilon1) const {
  return qc_iterations(epsilon1, cert.R, sigma, cert.L, cert.gamma);
}

StageOneResult SgdQcStageOne::solve(const Oracle &oracle,
                                    const ConstantsCertificate &cert,
                                    const Point &x0, double epsilon1,
                                    const RunOptions &options) const {
  const double sigma = oracle.config().sigma;
  const std::int64_t T = budget(cert, sigma, epsilon1);
  StepSchedule schedule(ScheduleKind::qc_constant, params_from(cert, sigma), T);
  // Noiseless GD with step <= 1/(2L) decreases f monotonically, so the last
  // iterate is no worse than the average the budget controls.
  const OutputRule rule{oracle.config().deterministic()
                            ? OutputKind::last_iterate
                            : OutputKind::uniform_random};
  StageOneResult r;
  r.record = sgd_run(oracle, schedule, T, rule, x0, options);
  r.point = r.record.output_point;
  r.iterations = T;
  return r;
}

std::int64_t SgdSqcStageOne::budget(const ConstantsCertificate &cert,
                                    double sigma, double epsilon1) const {
  return sqc_iterations(epsilon1, cert.gamma, cert.mu, cert.L, cert.R, sigma);
}

StageOneResult SgdSqcStageOne::solve(const Oracle &oracle,
                                     const ConstantsCertificate &cert,
                                     const Point &x0, double epsilon1,
                                     const RunOptions &options) const {
  const double sigma = oracle.config().sigma;
  const std::int64_t T = budget(cert, sigma, epsilon1);
  StepSchedule schedule(ScheduleKind::sqc_log, params_from(cert, sigma), T);
  const OutputRule rule =
      OutputRule::geometric(cert.gamma * cert.mu * schedule.alpha(1));
  StageOneResult r;
  r.record = sgd_run(oracle, schedule, T, rule, x0, options);
  r.point = r.record.output_point;
  r.iterations = T;
  return r;
}

PhasePlan plan_for(TwoPhaseVariant variant, const ConstantsCertificate &cert,
                   double sigma, double epsilon) {
  if (sigma == 0.0)
    return split_det(epsilon, cert.gamma, cert.R, cert.L);
  if (variant == TwoPhaseVariant::qc)
    return split_sto(epsilon, cert.gamma, cert.R, cert.L, sigma);
  if (!(cert.mu > 0.0))
    throw ConfigError("strongly-quasar two-phase variant needs mu > 0");
  return split_sqc(epsilon, cert.gamma, cert.mu, cert.L, sigma, cert.R);
}

namespace {

TwoPhaseRecord finish_stage_two(const Oracle &oracle, TwoPhaseRecord rec,
                                const OutputRule &rule, double alpha,
                                const RunOptions &options) {
  RunOptions opts = options;
  opts.position_offset = options.position_offset + rec.stage1.queries;
  opts.contraction.reset();
  ScheduleParams p;
  p.alpha = alpha;
  StepSchedule schedule(ScheduleKind::fixed, p, rec.plan.stage2_iters);
  rec.stage2 = sgd_run(oracle, schedule, rec.plan.stage2_iters, rule,
                       rec.stage1.output_point, opts);
  rec.output_point = rec.stage2.output_point;
  rec.output = rec.stage2.output;
  rec.queries = rec.stage1.queries + rec.stage2.queries;
  return rec;
}

} // namespace

TwoPhaseRecord two_phase_det(const Oracle &oracle,
                             const StageOneSolver &stage1,
                             const ConstantsCertificate &cert, const Point &x0,
                             double epsilon, const RunOptions &options) {
  if (!oracle.config().deterministic())
    throw ConfigError("two_phase_det needs a noiseless oracle");
  require_smooth_certificate(cert);
  TwoPhaseRecord rec;
  rec.plan = split_det(epsilon, cert.gamma, cert.R, cert.L);
  rec.plan.stage1_iters = stage1.budget(cert, 0.0, rec.plan.epsilon1);
  rec.stage1_solver = stage1.name();

  StageOneResult s1 = stage1.solve(oracle, cert, x0, rec.plan.epsilon1, options);
  if (s1.iterations != rec.plan.stage1_iters)
    throw StageFailure("stage one used " + std::to_string(s1.iterations) +
                       " iterations, budget was " +
                       std::to_string(rec.plan.stage1_iters));
  const Objective &f = oracle.objective();
  const double gap = f.value(s1.point) - f.min_value();
  rec.stage1_met_target = gap <= rec.plan.epsilon1;
  if (!rec.stage1_met_target)
    throw StageFailure("stage one ended at f-gap " + std::to_string(gap) +
                       " above the target " +
                       std::to_string(rec.plan.epsilon1));
  rec.stage1 = std::move(s1.record);
  rec.stage1.output_point = s1.point;
  const double alpha = rec.plan.stage2_alpha;
  return finish_stage_two(oracle, std::move(rec),
                          OutputRule{OutputKind::best_gradient}, alpha,
                          options);
}

TwoPhaseRecord two_phase_sto(const Oracle &oracle,
                             const ConstantsCertificate &cert, const Point &x0,
                             double epsilon, TwoPhaseVariant variant,
                             const RunOptions &options) {
  require_smooth_certificate(cert);
  if (oracle.config().deterministic())
    return two_phase_det(oracle, SgdQcStageOne{}, cert, x0, epsilon, options);
  const double sigma = oracle.config().sigma;
  TwoPhaseRecord rec;
  rec.plan = plan_for(variant, cert, sigma, epsilon);

  StageOneResult s1;
  if (variant == TwoPhaseVariant::qc) {
    SgdQcStageOne solver;
    rec.stage1_solver = solver.name();
    s1 = solver.solve(oracle, cert, x0, rec.plan.epsilon1, options);
  } else {
    SgdSqcStageOne solver;
    rec.stage1_solver = solver.name();
    s1 = solver.solve(oracle, cert, x0, rec.plan.epsilon1, options);
  }
  if (s1.iterations != rec.plan.stage1_iters)
    throw StageFailure("stage one budget mismatch");
  const Objective &f = oracle.objective();
  rec.stage1_met_target =
      f.value(s1.point) - f.min_value() <= rec.plan.epsilon1;
  rec.stage1 = std::move(s1.record);
  rec.stage1.output_point = s1.point;
  const double alpha = rec.plan.stage2_alpha;
  return finish_stage_two(oracle, std::move(rec),
                          OutputRule{OutputKind::uniform_random}, alpha,
                          options);
}

} // namespace qb
