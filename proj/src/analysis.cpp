#include "qb/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace qb {

std::string to_string(StatisticKind k) {
  switch (k) {
  case StatisticKind::avg_subopt:
    return "avg-subopt";
  case StatisticKind::avg_subopt_start:
    return "avg-subopt-start";
  case StatisticKind::output_subopt:
    return "output-subopt";
  case StatisticKind::output_grad_norm:
    return "output-grad-norm";
  case StatisticKind::dist_sq:
    return "dist-sq";
  }
  return "?";
}

StatisticKind statistic_from_string(const std::string &name) {
  for (auto k : {StatisticKind::avg_subopt, StatisticKind::avg_subopt_start,
                 StatisticKind::output_subopt, StatisticKind::output_grad_norm,
                 StatisticKind::dist_sq})
    if (to_string(k) == name)
      return k;
  throw ConfigError("unknown statistic '" + name + "'");
}

double extract(const RunRecord &rec, StatisticKind kind) {
  switch (kind) {
  case StatisticKind::avg_subopt:
    return rec.avg_f_gap();
  case StatisticKind::avg_subopt_start:
    return rec.avg_f_gap_from_start();
  case StatisticKind::output_subopt:
    return rec.output_expected_f_gap;
  case StatisticKind::output_grad_norm:
    return rec.output_expected_grad_norm;
  case StatisticKind::dist_sq:
    return rec.final.dist_sq;
  }
  return 0.0;
}

MeanCi mean_ci(std::span<const double> values) {
  MeanCi out;
  out.n = static_cast<std::int64_t>(values.size());
  if (values.empty())
    return out;
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  out.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() < 2)
    return out;
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    sq[i] = (v[i] - out.mean) * (v[i] - out.mean);
  std::sort(sq.begin(), sq.end());
  const double var = std::accumulate(sq.begin(), sq.end(), 0.0) / (n - 1.0);
  out.ci95 = kZ95 * std::sqrt(var / n);
  return out;
}

SummaryRow summarize(std::int64_t T, StatisticKind kind,
                     std::span<const RunRecord> runs) {
  std::vector<double> values;
  values.reserve(runs.size());
  for (const auto &r : runs) {
    if (r.T != T)
      throw ConfigError("summarize: run horizon does not match row T");
    values.push_back(extract(r, kind));
  }
  const MeanCi m = mean_ci(values);
  SummaryRow row;
  row.T = T;
  row.statistic = kind;
  row.mean = m.mean;
  row.ci95 = m.ci95;
  row.seeds = m.n;
  return row;
}

bool bound_check(SweepSummary &summary, const BoundEvaluator &bound) {
  if (summary.statistic != bound.quantity)
    throw ConfigError("bound '" + bound.name + "' controls " +
                      to_string(bound.quantity) + ", summary holds " +
                      to_string(summary.statistic));
  bool all = true;
  for (auto &row : summary.rows) {
    if (row.statistic != bound.quantity)
      throw ConfigError("bound_check: row statistic mismatch");
    const double b = bound.eval(row.T);
    row.bound = b;
    row.pass = row.mean - row.ci95 <= b;
    all = all && *row.pass;
  }
  return all;
}

bool upper_confidence_below(const SummaryRow &row, double bound) {
  return row.mean + row.ci95 <= bound;
}

RateFit rate_fit(std::span<const std::pair<std::int64_t, double>> points) {
  if (points.size() < 2)
    throw ConfigError("rate_fit needs at least two points");
  std::set<std::int64_t> seen;
  for (const auto &[T, v] : points) {
    if (T <= 0)
      throw DomainError("rate_fit: T must be positive");
    if (!(v > 0.0) || !std::isfinite(v))
      throw DomainError("rate_fit: values must be positive and finite");
    if (!seen.insert(T).second)
      throw ConfigError("rate_fit: repeated T");
  }
  const double n = static_cast<double>(points.size());
  double mx = 0.0, my = 0.0;
  for (const auto &[T, v] : points) {
    mx += std::log(static_cast<double>(T));
    my += std::log(v);
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto &[T, v] : points) {
    const double dx = std::log(static_cast<double>(T)) - mx;
    const double dy = std::log(v) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (const auto &[T, v] : points) {
    const double r =
        std::log(v) - (fit.intercept + fit.slope * std::log(static_cast<double>(T)));
    ss_res += r * r;
  }
  // A flat series fits perfectly.
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  fit.points = points.size();
  fit.T_min = std::min_element(points.begin(), points.end())->first;
  fit.T_max = std::max_element(points.begin(), points.end())->first;
  return fit;
}

RateFit rate_fit(const SweepSummary &summary) {
  std::vector<std::pair<std::int64_t, double>> pts;
  for (const auto &r : summary.rows)
    pts.emplace_back(r.T, r.mean);
  return rate_fit(pts);
}

std::string to_string(Verdict v) {
  switch (v) {
  case Verdict::pass:
    return "pass";
  case Verdict::fail:
    return "fail";
  case Verdict::inconclusive:
    return "inconclusive";
  }
  return "?";
}

ExponentPrediction predicted_exponent(ScheduleKind schedule, double sigma) {
  switch (schedule) {
  case ScheduleKind::qc_constant:
    if (sigma > 0.0)
      return {-0.5, 0.15, StatisticKind::avg_subopt};
    return {-1.0, 0.15, StatisticKind::avg_subopt};
  case ScheduleKind::sqc_log:
    // log factors perturb the slope
    return {-1.0, 0.2, StatisticKind::output_subopt};
  case ScheduleKind::nonsmooth_constant:
    return {-0.5, 0.15, StatisticKind::avg_subopt_start};
  case ScheduleKind::gower_log:
    return {-1.0, 0.2, StatisticKind::dist_sq};
  case ScheduleKind::nonsmooth_harmonic:
    return {-1.0, 0.15, StatisticKind::dist_sq};
  case ScheduleKind::fixed:
    break;
  }
  throw ConfigError("no predicted exponent for schedule " + to_string(schedule));
}

ExponentReport exponent_report(const SweepSummary &summary,
                               const ExponentPrediction &prediction,
                               std::int64_t regime_min_T) {
  if (summary.statistic != prediction.statistic)
    throw ConfigError("exponent_report: statistic " +
                      to_string(summary.statistic) + " does not match " +
                      to_string(prediction.statistic));
  ExponentReport rep;
  rep.predicted = prediction.exponent;
  rep.tolerance = prediction.tolerance;
  rep.fit = rate_fit(summary);
  const double decades = std::log10(static_cast<double>(rep.fit.T_max) /
                                    static_cast<double>(rep.fit.T_min));
  if (rep.fit.points < 4) {
    rep.note = "fewer than 4 grid points";
  } else if (decades < 2.0 - 1e-12) {
    rep.note = "grid spans fewer than 2 decades";
  } else if (rep.fit.T_min <= regime_min_T) {
    rep.note = "grid starts at T=" + std::to_string(rep.fit.T_min) +
               ", regime requires T > " + std::to_string(regime_min_T);
  } else {
    rep.verdict = std::abs(rep.fit.slope - rep.predicted) <= rep.tolerance
                      ? Verdict::pass
                      : Verdict::fail;
    return rep;
  }
  rep.verdict = Verdict::inconclusive;
  return rep;
}

Criterion criterion_from_string(const std::string &name) {
  if (name == "subopt")
    return Criterion::subopt;
  if (name == "grad-norm")
    return Criterion::grad_norm;
  throw ConfigError("unknown criterion '" + name + "'");
}

ComplexityEstimate empirical_complexity(const CriterionRunner &runner,
                                        double epsilon, std::int64_t cap) {
  if (!(epsilon > 0.0))
    throw ConfigError("empirical_complexity: epsilon must be positive");
  if (cap < 1)
    throw ConfigError("empirical_complexity: cap must be >= 1");
  ComplexityEstimate est;
  est.cap = cap;
  for (std::int64_t T = 1; T <= cap; T *= 2) {
    const auto values = runner(T);
    const MeanCi m = mean_ci(values);
    if (m.mean <= epsilon) {
      est.T = T;
      est.attained = true;
      est.mean = m.mean;
      est.ci95 = m.ci95;
      est.confident = m.mean + m.ci95 <= 1.1 * epsilon;
      return est;
    }
    if (T > cap / 2)
      break;
  }
  return est;
}

std::vector<double> criterion_values(std::span<const RunRecord> runs,
                                     Criterion criterion) {
  std::vector<double> out;
  out.reserve(runs.size());
  for (const auto &r : runs)
    out.push_back(criterion == Criterion::subopt ? r.output.f_gap
                                                 : r.output.grad_norm);
  return out;
}

std::vector<GowerComparisonRow>
gower_comparison(std::span<const std::int64_t> Ts, double R, double sigma,
                 double gamma, double L, double beta) {
  std::vector<GowerComparisonRow> rows;
  rows.reserve(Ts.size());
  for (auto T : Ts)
    rows.push_back({T, qc_bound(T, R, sigma, L, gamma),
                    gower_appendix_bound(T, R, sigma, gamma, L, beta)});
  return rows;
}

} // namespace qb
