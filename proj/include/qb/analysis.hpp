#pragma once

// Aggregation of completed runs: confidence summaries, bound verdicts,
// log-log rate fits and empirical oracle-complexity estimates.

#include "qb/schedules.hpp"
#include "qb/solvers.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace qb {

enum class StatisticKind {
  avg_subopt,       // (1/T) sum_{t=1..T} f_gap
  avg_subopt_start, // (1/T) sum_{t=0..T-1} f_gap
  output_subopt,    // E[f_gap(X)] over the output rule given the trajectory
  output_grad_norm, // E[||grad f(X)||] over the output rule
  dist_sq           // ||x_T - x*||^2
};

std::string to_string(StatisticKind k);
StatisticKind statistic_from_string(const std::string &name);

double extract(const RunRecord &rec, StatisticKind kind);

// z for a two-sided 95% normal interval; also the one-sided 97.5% quantile.
inline constexpr double kZ95 = 1.959963984540054;
inline constexpr std::int64_t kMinAcceptanceSeeds = 30;

struct MeanCi {
  double mean = 0.0;
  double ci95 = 0.0; // half-width, normal approximation
  std::int64_t n = 0;
};

// Independent of the order of values (sums are taken over sorted copies).
MeanCi mean_ci(std::span<const double> values);

struct SummaryRow {
  std::int64_t T = 0;
  StatisticKind statistic = StatisticKind::avg_subopt;
  double mean = 0.0;
  double ci95 = 0.0;
  std::int64_t seeds = 0;
  std::optional<double> bound;
  std::optional<bool> pass;
  std::optional<double> bound_appendix_b;
};

struct SweepSummary {
  std::string config_digest;
  StatisticKind statistic = StatisticKind::avg_subopt;
  std::vector<SummaryRow> rows;
};

SummaryRow summarize(std::int64_t T, StatisticKind kind,
                     std::span<const RunRecord> runs);

struct BoundEvaluator {
  std::string name;
  StatisticKind quantity; // the statistic the bound guarantees
  std::function<double(std::int64_t)> eval;
};

// Row passes iff mean - ci95 <= bound(T). Fills bound/pass on every row and
// returns the overall verdict. ConfigError when the summary statistic is not
// the quantity the bound controls.
bool bound_check(SweepSummary &summary, const BoundEvaluator &bound);

// Stricter one-sided check used by the acceptance suite: mean + ci95 <= bound.
bool upper_confidence_below(const SummaryRow &row, double bound);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0; // natural-log intercept
  double r_squared = 0.0;
  std::int64_t T_min = 0;
  std::int64_t T_max = 0;
  std::size_t points = 0;
};

// Ordinary least squares on (log T, log value). DomainError on nonpositive
// values, ConfigError on repeated or too few T.
RateFit rate_fit(std::span<const std::pair<std::int64_t, double>> points);
RateFit rate_fit(const SweepSummary &summary);

enum class Verdict { pass, fail, inconclusive };
std::string to_string(Verdict v);

struct ExponentReport {
  RateFit fit;
  double predicted = 0.0;
  double tolerance = 0.0;
  Verdict verdict = Verdict::inconclusive;
  std::string note;
};

// Predicted T-exponent of the guaranteed statistic for a schedule, and the
// tolerance on the fitted slope.
struct ExponentPrediction {
  double exponent;
  double tolerance;
  StatisticKind statistic;
};
ExponentPrediction predicted_exponent(ScheduleKind schedule, double sigma);

// Fits the summary and compares the slope with the prediction. Inconclusive
// when the grid has fewer than 4 points, spans under 2 decades, or starts at
// or below regime_min_T.
ExponentReport exponent_report(const SweepSummary &summary,
                               const ExponentPrediction &prediction,
                               std::int64_t regime_min_T = 0);

enum class Criterion { subopt, grad_norm };
Criterion criterion_from_string(const std::string &name);

struct ComplexityEstimate {
  std::int64_t T = 0; // smallest grid T meeting the criterion, 0 if none
  bool attained = false;
  bool confident = false; // upper confidence bound <= 1.1 epsilon
  double mean = 0.0;
  double ci95 = 0.0;
  std::int64_t cap = 0;
};

// Per-seed criterion values at horizon T (output iterate of each run).
using CriterionRunner = std::function<std::vector<double>(std::int64_t T)>;

// Scans T = 1, 2, 4, ... up to cap and returns the first T whose mean
// criterion is <= epsilon.
ComplexityEstimate empirical_complexity(const CriterionRunner &runner,
                                        double epsilon, std::int64_t cap);

// Values of the chosen criterion at each run's output.
std::vector<double> criterion_values(std::span<const RunRecord> runs,
                                     Criterion criterion);

struct GowerComparisonRow {
  std::int64_t T;
  double qc_bound;
  double appendix_bound;
};

// Side-by-side bound curves; no ordering between them is asserted.
std::vector<GowerComparisonRow>
gower_comparison(std::span<const std::int64_t> Ts, double R, double sigma,
                 double gamma, double L, double beta);

} // namespace qb
