#pragma once

// Stochastic gradient descent with pluggable output rules, and the
// two-phase compositions that turn a suboptimality guarantee into a
// small-gradient guarantee.

#include "qb/oracles.hpp"
#include "qb/schedules.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace qb {

// ---- output rules ---------------------------------------------------------

enum class OutputKind {
  uniform_random,     // t in {1..T}
  geometric_weighted, // t in {0..T-1}, P(t) ~ q^(T-t-1)
  tail_uniform,       // t in {floor(T/2)..T}
  last_iterate,       // t = T
  best_gradient       // argmin ||grad f(x_t)|| over t in {0..T}
};

std::string to_string(OutputKind k);
OutputKind output_kind_from_string(const std::string &name);

struct OutputRule {
  OutputKind kind = OutputKind::uniform_random;
  // Geometric ratio q = 1 - gamma mu alpha. q == 1 degenerates to uniform
  // over {0..T-1}.
  double q = 1.0;

  static OutputRule geometric(double gamma_mu_alpha);
  void validate() const; // ConfigError unless q in [0, 1]
};

// Support [first, first + weights.size()) and closed-form probabilities.
// Not defined for best_gradient.
struct OutputDistribution {
  std::int64_t first = 0;
  std::vector<double> weights;
};
OutputDistribution output_distribution(const OutputRule &rule, std::int64_t T);

// Weight of index t under the rule (0 outside the support).
double output_weight(const OutputRule &rule, std::int64_t T, std::int64_t t);

// Draws an index from the rule's distribution; O(1) per draw.
std::int64_t draw_output_index(const OutputRule &rule, std::int64_t T,
                               CounterEngine &rng);

struct Selection {
  std::int64_t index;
  Point point;
};

// trajectory holds x_0..x_T. grad_norms (same length) is required for
// best_gradient and ignored otherwise.
Selection select_output(std::span<const Point> trajectory,
                        const OutputRule &rule, CounterEngine &rng,
                        std::span<const double> grad_norms = {});

// Domain tag that separates the output-selection stream from oracle noise.
inline constexpr std::uint64_t kSelectionDomain = 0x5e1ec7ed0u;

// ---- runs -----------------------------------------------------------------

struct IterateStats {
  std::int64_t t = 0;
  double f_gap = 0.0;
  double grad_norm = 0.0;
  double dist_sq = 0.0;
};

// Per-step check of ||x_{t+1} - x*||^2 <= (1 - gamma mu alpha_t) ||x_t - x*||^2.
struct ContractionCheck {
  double gamma;
  double mu;
  double relative_slack = 1e-12; // rounding allowance
};

struct RunOptions {
  std::string config_digest;
  std::uint64_t run_seed = 0;
  std::int64_t run_index = 0;
  // Store every k-th iterate. 0 picks 1 for T <= 1e5 and ceil(T / 1e4) above.
  std::int64_t thinning = 0;
  std::optional<Box> box;
  // Abort when ||x_t|| exceeds this. 0 picks 1e6 * max(R, 1).
  double divergence_radius = 0.0;
  std::optional<ContractionCheck> contraction;
  // First oracle stream position used by this run.
  std::int64_t position_offset = 0;
};

struct RunRecord {
  std::string config_digest;
  std::uint64_t seed = 0;
  std::int64_t run_index = 0;
  std::int64_t T = 0;
  std::int64_t thinning = 1;
  std::vector<IterateStats> series; // stored iterates, always includes 0 and T

  // Exact running aggregates over all iterates.
  double sum_f_gap = 0.0;            // t = 1..T
  double sum_f_gap_from_start = 0.0; // t = 0..T-1
  IterateStats best_gradient;        // min grad_norm over t = 0..T
  IterateStats initial;
  IterateStats final;

  OutputRule rule;
  std::int64_t output_index = 0;
  IterateStats output;
  Point output_point;
  // Expectation over the rule's distribution of f_gap and grad_norm at the
  // output, accumulated exactly along the run.
  double output_expected_f_gap = 0.0;
  double output_expected_grad_norm = 0.0;

  Point final_point;
  std::int64_t queries = 0;
  bool box_violation = false;
  std::int64_t first_box_violation = -1;
  std::int64_t contraction_checks = 0;
  std::int64_t contraction_violations = 0;
  double wall_seconds = 0.0;

  double avg_f_gap() const { return sum_f_gap / static_cast<double>(T); }
  double avg_f_gap_from_start() const {
    return sum_f_gap_from_start / static_cast<double>(T);
  }
};

// Runs x_t = x_{t-1} - alpha_t g(x_{t-1}) for exactly T oracle queries. The
// algorithm only sees oracle responses; exact f and grad f are used for
// logging. Throws DivergenceError on non-finite or runaway iterates.
RunRecord sgd_run(const Oracle &oracle, const StepSchedule &schedule,
                  std::int64_t T, const OutputRule &rule, const Point &x0,
                  const RunOptions &options = {});

// ---- two-phase methods ----------------------------------------------------

struct StageOneResult {
  Point point;
  std::int64_t iterations = 0;
  RunRecord record;
};

// Strategy that drives E[f - f*] below eps1 within a declared budget.
// Accelerated methods can be plugged in by deriving from this class.
class StageOneSolver {
public:
  virtual ~StageOneSolver() = default;
  virtual std::string name() const = 0;
  virtual std::int64_t budget(const ConstantsCertificate &cert, double sigma,
                              double epsilon1) const = 0;
  virtual StageOneResult solve(const Oracle &oracle,
                               const ConstantsCertificate &cert,
                               const Point &x0, double epsilon1,
                               const RunOptions &options) const = 0;
};

// Constant-step SGD with the quasar-convex budget qc_iterations(eps1).
// Uniform-random output when noisy, last iterate when noiseless.
class SgdQcStageOne final : public StageOneSolver {
public:
  std::string name() const override { return "sgd-qc"; }
  std::int64_t budget(const ConstantsCertificate &cert, double sigma,
                      double epsilon1) const override;
  StageOneResult solve(const Oracle &oracle, const ConstantsCertificate &cert,
                       const Point &x0, double epsilon1,
                       const RunOptions &options) const override;
};

// Log-scaled SGD with the strongly-quasar budget sqc_iterations(eps1) and
// geometric-weighted output.
class SgdSqcStageOne final : public StageOneSolver {
public:
  std::string name() const override { return "sgd-sqc"; }
  std::int64_t budget(const ConstantsCertificate &cert, double sigma,
                      double epsilon1) const override;
  StageOneResult solve(const Oracle &oracle, const ConstantsCertificate &cert,
                       const Point &x0, double epsilon1,
                       const RunOptions &options) const override;
};

struct TwoPhaseRecord {
  PhasePlan plan;
  std::string stage1_solver;
  RunRecord stage1;
  RunRecord stage2;
  Point output_point;
  IterateStats output; // t counts stage-two steps
  std::int64_t queries = 0;
  bool stage1_met_target = false; // exact f-gap <= eps1 after stage one
};

// Stage one to eps1 = split_det(eps).epsilon1, then gradient descent with
// step 1/L; returns the stage-two iterate with the smallest gradient norm.
// Requires a noiseless oracle. Throws StageFailure if stage one misses eps1.
TwoPhaseRecord two_phase_det(const Oracle &oracle,
                             const StageOneSolver &stage1,
                             const ConstantsCertificate &cert, const Point &x0,
                             double epsilon, const RunOptions &options = {});

enum class TwoPhaseVariant { qc, sqc };

// Noisy two-phase method: SGD to eps1 from split_sto / split_sqc, then
// nonconvex SGD with a uniformly drawn output. Falls back to two_phase_det
// when the oracle is noiseless.
TwoPhaseRecord two_phase_sto(const Oracle &oracle,
                             const ConstantsCertificate &cert, const Point &x0,
                             double epsilon, TwoPhaseVariant variant,
                             const RunOptions &options = {});

PhasePlan plan_for(TwoPhaseVariant variant, const ConstantsCertificate &cert,
                   double sigma, double epsilon);

// ---- seed fan-out ---------------------------------------------------------

// Runs fn(run_index) for run_index in [0, count) on up to jobs threads and
// returns results in run_index order.
template <typename Result>
std::vector<Result>
run_indexed(std::int64_t count, int jobs,
            const std::function<Result(std::int64_t)> &fn);

} // namespace qb

#include "qb/detail/run_indexed.hpp"
