#include "qb/experiment.hpp"
#include "qb/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace qb {

std::string to_string(ExperimentKind k) {
  switch (k) {
  case ExperimentKind::run:
    return "run";
  case ExperimentKind::sweep:
    return "sweep";
  case ExperimentKind::two_phase:
    return "two_phase";
  case ExperimentKind::complexity:
    return "complexity";
  case ExperimentKind::compare_gower:
    return "compare_gower";
  }
  return "?";
}

ExperimentKind experiment_kind_from_string(const std::string &name) {
  for (auto k : {ExperimentKind::run, ExperimentKind::sweep,
                 ExperimentKind::two_phase, ExperimentKind::complexity,
                 ExperimentKind::compare_gower})
    if (to_string(k) == name)
      return k;
  throw ConfigError("unknown experiment kind '" + name + "'");
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

ExperimentConfig parse_config_impl(const json &j) {
  if (!j.is_object())
    throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  c.raw = j;
  c.name = j.value("name", std::string{});
  c.claim = j.value("claim", std::string{});
  c.kind = experiment_kind_from_string(j.value("experiment", std::string("run")));
  if (!j.contains("problem"))
    throw ConfigError("config: missing 'problem'");
  c.problem = j.at("problem");
  if (j.contains("box"))
    c.box = box_from_json(j.at("box"));

  if (j.contains("certify")) {
    const json &cj = j.at("certify");
    c.certify.grid_points = cj.value("grid_points", c.certify.grid_points);
    c.certify.samples = cj.value("samples", c.certify.samples);
    c.certify.use_declared = cj.value("use_declared", true);
    if (cj.contains("gamma") && !cj.at("gamma").is_null())
      c.certify.gamma = cj.at("gamma").get<double>();
  }

  c.oracle = oracle_config_from_json(j.value("oracle", json::object()));
  if (j.contains("seeds")) {
    const json &s = j.at("seeds");
    c.seeds = s.value("count", std::int64_t{1});
    c.master_seed = s.value("master", std::uint64_t{0});
  }
  c.oracle.master_seed = c.master_seed;
  const std::int64_t min_seeds = c.kind == ExperimentKind::compare_gower ? 0 : 1;
  if (c.seeds < min_seeds)
    throw ConfigError("config: seeds.count too small");

  if (j.contains("schedule")) {
    const json &s = j.at("schedule");
    if (s.is_string()) {
      c.schedule = schedule_kind_from_string(s.get<std::string>());
    } else {
      c.schedule = schedule_kind_from_string(s.at("name").get<std::string>());
      c.schedule_overrides = s.value("overrides", json::object());
      if (s.contains("alpha"))
        c.schedule_overrides["alpha"] = s.at("alpha");
    }
  }
  for (const auto &[key, value] : c.schedule_overrides.items()) {
    static const char *known[] = {"R", "sigma", "L", "gamma", "mu", "G", "alpha"};
    if (std::none_of(std::begin(known), std::end(known),
                     [&](const char *k) { return key == k; }))
      throw ConfigError("schedule override '" + key + "' is not a parameter");
    if (!value.is_number())
      throw ConfigError("schedule override '" + key + "' must be a number");
  }

  if (j.contains("x0"))
    c.x0 = j.at("x0").get<Point>();
  if (j.contains("T")) {
    const json &t = j.at("T");
    if (t.is_array())
      c.T_grid = t.get<std::vector<std::int64_t>>();
    else
      c.T_grid = {t.get<std::int64_t>()};
  }
  for (auto T : c.T_grid)
    if (T < 1)
      throw ConfigError("config: T must be >= 1");
  if (j.contains("output_rule"))
    c.output = output_kind_from_string(j.at("output_rule").get<std::string>());
  if (j.contains("statistic"))
    c.statistic = statistic_from_string(j.at("statistic").get<std::string>());
  c.thinning = j.value("thinning", std::int64_t{0});
  if (c.thinning < 0)
    throw ConfigError("config: thinning must be >= 0");
  c.epsilon = j.value("epsilon", 0.0);
  c.variant = j.value("variant", std::string("det"));
  if (j.contains("criterion"))
    c.criterion = criterion_from_string(j.at("criterion").get<std::string>());
  c.cap = j.value("cap", c.cap);
  c.beta = j.value("beta", c.beta);
  c.bound = j.value("bound", false);
  c.fit = j.value("fit", false);
  c.check_contraction = j.value("check_contraction", false);

  switch (c.kind) {
  case ExperimentKind::run:
  case ExperimentKind::sweep:
  case ExperimentKind::compare_gower:
    if (c.T_grid.empty())
      throw ConfigError("config: '" + to_string(c.kind) + "' needs T");
    break;
  case ExperimentKind::two_phase:
    if (c.variant != "det" && c.variant != "qc" && c.variant != "sqc")
      throw ConfigError("config: variant must be det, qc or sqc");
    [[fallthrough]];
  case ExperimentKind::complexity:
    if (!(c.epsilon > 0.0))
      throw ConfigError("config: epsilon must be positive");
    if (c.cap < 1)
      throw ConfigError("config: cap must be >= 1");
    break;
  }
  if (c.kind == ExperimentKind::run && c.T_grid.size() != 1)
    throw ConfigError("config: 'run' takes a single T");
  if (c.kind != ExperimentKind::compare_gower && c.x0.empty())
    throw ConfigError("config: missing 'x0'");
  return c;
}

} // namespace

ExperimentConfig parse_config(const json &j) {
  try {
    return parse_config_impl(j);
  } catch (const json::exception &e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

std::string digest_of(const json &j) {
  json copy = j;
  if (copy.is_object())
    copy.erase("output");
  const std::string canon = copy.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canon) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Resolution

namespace {

json report_json(const CertificationReport &r) {
  return {{"certificate", to_json(r.certificate)},
          {"gamma_grid", r.gamma_grid},
          {"mu_grid", r.mu_grid},
          {"L_sampled", r.L_sampled},
          {"G_sampled", r.G_sampled},
          {"min_gap", r.min_gap},
          {"worst_point_gamma", r.worst_point_gamma},
          {"worst_point_mu", r.worst_point_mu}};
}

bool is_nonsmooth_schedule(ScheduleKind k) {
  return k == ScheduleKind::nonsmooth_constant ||
         k == ScheduleKind::nonsmooth_harmonic;
}

} // namespace

ResolvedExperiment resolve(const ExperimentConfig &cfg,
                           const ResultStore *store, bool force) {
  ResolvedExperiment ex;
  ex.config = cfg;
  ex.digest = digest_of(cfg.raw);
  ProblemSpec spec;
  try {
    spec = problem_from_json(cfg.problem);
  } catch (const json::exception &e) {
    throw ConfigError(std::string("problem: ") + e.what());
  }
  ex.objective = spec.objective;
  const Point &xs = ex.objective->minimizer();
  if (!cfg.x0.empty()) {
    if (cfg.x0.size() != xs.size())
      throw ConfigError("x0 dimension does not match the problem");
    validate_point(cfg.x0, "x0");
  }

  if (spec.certificate) {
    ex.certificate = *spec.certificate;
  } else {
    if (!cfg.box)
      throw ConfigError("config: no certificate supplied and no 'box' to certify on");
    if (cfg.box->dimension() != xs.size())
      throw ConfigError("box dimension does not match the problem");
    json key = {{"problem", cfg.problem},
                {"box", to_json(*cfg.box)},
                {"grid_points", cfg.certify.grid_points},
                {"samples", cfg.certify.samples},
                {"use_declared", cfg.certify.use_declared},
                {"gamma", cfg.certify.gamma ? json(*cfg.certify.gamma) : json()}};
    const std::string cdig = digest_of(key);
    if (store && !force && fs::exists(store->certificate_path(cdig))) {
      const json cached =
          json::parse(ResultStore::read_file(store->certificate_path(cdig)));
      ex.certificate = certificate_from_json(cached.at("certificate"));
    } else {
      ex.report = certify(*ex.objective, *cfg.box, cfg.certify);
      ex.certificate = ex.report->certificate;
      if (store)
        ResultStore::write_file(store->certificate_path(cdig),
                                report_json(*ex.report).dump(2) + "\n");
    }
  }
  if (ex.certificate.R <= 0.0 && !cfg.x0.empty())
    ex.certificate.R = std::sqrt(kernels::sq_dist(cfg.x0, xs));

  ScheduleParams &p = ex.params;
  p.R = ex.certificate.R;
  p.sigma = cfg.oracle.sigma;
  p.L = ex.certificate.L;
  p.gamma = ex.certificate.gamma;
  p.mu = ex.certificate.mu;
  p.G = ex.certificate.G;
  // Subgradient steps need sqrt(E||g||^2) <= G; with noise, G + sigma.
  if (is_nonsmooth_schedule(cfg.schedule))
    p.G += p.sigma;
  const json &o = cfg.schedule_overrides;
  p.R = o.value("R", p.R);
  p.sigma = o.value("sigma", p.sigma);
  p.L = o.value("L", p.L);
  p.gamma = o.value("gamma", p.gamma);
  p.mu = o.value("mu", p.mu);
  p.G = o.value("G", p.G);
  p.alpha = o.value("alpha", p.alpha);
  return ex;
}

StepSchedule make_schedule(const ResolvedExperiment &ex, std::int64_t T) {
  return StepSchedule(ex.config.schedule, ex.params, T);
}

OutputRule make_output_rule(const ResolvedExperiment &ex,
                            const StepSchedule &schedule) {
  OutputKind kind = OutputKind::last_iterate;
  if (ex.config.output)
    kind = *ex.config.output;
  else if (ex.config.schedule == ScheduleKind::qc_constant)
    kind = OutputKind::uniform_random;
  else if (ex.config.schedule == ScheduleKind::sqc_log)
    kind = OutputKind::geometric_weighted;
  if (kind == OutputKind::geometric_weighted) {
    if (!schedule.constant())
      throw ConfigError("geometric output needs a constant step");
    return OutputRule::geometric(ex.params.gamma * ex.params.mu *
                                 schedule.alpha(1));
  }
  OutputRule r;
  r.kind = kind;
  return r;
}

StatisticKind default_statistic(const ResolvedExperiment &ex) {
  if (ex.config.statistic)
    return *ex.config.statistic;
  switch (ex.config.schedule) {
  case ScheduleKind::qc_constant:
    return StatisticKind::avg_subopt;
  case ScheduleKind::sqc_log:
    return StatisticKind::output_subopt;
  case ScheduleKind::gower_log:
  case ScheduleKind::nonsmooth_harmonic:
    return StatisticKind::dist_sq;
  case ScheduleKind::nonsmooth_constant:
    return StatisticKind::avg_subopt_start;
  case ScheduleKind::fixed:
    break;
  }
  return StatisticKind::output_subopt;
}

std::optional<BoundEvaluator> bound_for(const ResolvedExperiment &ex) {
  const ScheduleParams p = ex.params;
  switch (ex.config.schedule) {
  case ScheduleKind::qc_constant:
    return BoundEvaluator{"qc_bound", StatisticKind::avg_subopt,
                          [p](std::int64_t T) {
                            return qc_bound(T, p.R, p.sigma, p.L, p.gamma);
                          }};
  case ScheduleKind::sqc_log:
    return BoundEvaluator{"sqc_bound", StatisticKind::output_subopt,
                          [p](std::int64_t T) {
                            return sqc_bound(T, p.gamma, p.mu, p.L, p.R, p.sigma);
                          }};
  case ScheduleKind::gower_log:
    return BoundEvaluator{
        "gower_distance_bound", StatisticKind::dist_sq, [p](std::int64_t T) {
          return gower_distance_bound(
              T, p.gamma, p.mu, p.R, p.sigma,
              gower_alpha(p.gamma, p.mu, p.R, p.sigma, T));
        }};
  case ScheduleKind::nonsmooth_constant:
    return BoundEvaluator{"nonsmooth_bound", StatisticKind::avg_subopt_start,
                          [p](std::int64_t T) {
                            return nonsmooth_bound(T, p.R, p.G, p.gamma);
                          }};
  case ScheduleKind::nonsmooth_harmonic:
    return BoundEvaluator{"nonsmooth_harmonic_distance_bound",
                          StatisticKind::dist_sq, [p](std::int64_t T) {
                            return nonsmooth_harmonic_distance_bound(
                                T, p.G, p.gamma, p.mu);
                          }};
  case ScheduleKind::fixed:
    break;
  }
  return std::nullopt;
}

std::int64_t regime_min_T(const ResolvedExperiment &ex) {
  const ScheduleParams &p = ex.params;
  if (p.sigma <= 0.0)
    return 0;
  if (ex.config.schedule == ScheduleKind::qc_constant)
    return static_cast<std::int64_t>(
        std::floor(p.R * p.R * p.L * p.L / (p.sigma * p.sigma)));
  if (ex.config.schedule == ScheduleKind::sqc_log)
    return sqc_min_T(p.gamma, p.mu, p.L, p.R, p.sigma) - 1;
  return 0;
}

namespace {

RunOptions base_options(const ResolvedExperiment &ex, std::int64_t index,
                        std::int64_t thinning) {
  RunOptions o;
  o.config_digest = ex.digest;
  o.run_index = index;
  o.run_seed = derive_run_seed(ex.config.master_seed,
                               static_cast<std::uint64_t>(index));
  o.thinning = thinning;
  if (ex.certificate.box.dimension() == ex.objective->minimizer().size())
    o.box = ex.certificate.box;
  if (ex.config.check_contraction) {
    if (!(ex.params.mu > 0.0))
      throw ConfigError("check_contraction needs mu > 0");
    o.contraction = ContractionCheck{ex.params.gamma, ex.params.mu};
  }
  return o;
}

} // namespace

std::vector<RunRecord> run_seeds(const ResolvedExperiment &ex, std::int64_t T,
                                 int jobs, std::int64_t thinning) {
  const StepSchedule schedule = make_schedule(ex, T);
  const OutputRule rule = make_output_rule(ex, schedule);
  const Oracle oracle(ex.objective, ex.config.oracle);
  return run_indexed<RunRecord>(
      ex.config.seeds, jobs, [&](std::int64_t i) {
        return sgd_run(oracle, schedule, T, rule, ex.config.x0,
                       base_options(ex, i, thinning));
      });
}

namespace {

// Endpoints only unless the config asks for a trajectory.
std::int64_t sweep_thinning(const ExperimentConfig &cfg, std::int64_t T) {
  return cfg.thinning > 0 ? cfg.thinning : T;
}

SweepSummary sweep_impl(const ResolvedExperiment &ex, int jobs,
                        std::vector<RunRecord> *keep) {
  // Every horizon is checked before any run starts.
  for (auto T : ex.config.T_grid)
    make_output_rule(ex, make_schedule(ex, T));
  SweepSummary s;
  s.config_digest = ex.digest;
  s.statistic = default_statistic(ex);
  for (auto T : ex.config.T_grid) {
    auto runs = run_seeds(ex, T, jobs, sweep_thinning(ex.config, T));
    s.rows.push_back(summarize(T, s.statistic, runs));
    if (keep)
      keep->insert(keep->end(), std::make_move_iterator(runs.begin()),
                   std::make_move_iterator(runs.end()));
  }
  if (ex.config.bound) {
    auto b = bound_for(ex);
    if (!b)
      throw ConfigError("schedule " + to_string(ex.config.schedule) +
                        " has no guaranteed bound");
    bound_check(s, *b);
  }
  return s;
}

} // namespace

SweepSummary sweep(const ResolvedExperiment &ex, int jobs) {
  return sweep_impl(ex, jobs, nullptr);
}

// ---------------------------------------------------------------------------
// Commands

const std::vector<ClaimInfo> &report_claims() {
  static const std::vector<ClaimInfo> claims = {
      {"certification", "Certified gamma keeps the quasar gap nonnegative on the box"},
      {"qc-avg-subopt",
       "Constant-step SGD: average suboptimality <= 4(R sigma/(gamma sqrt T) + R^2 L/(gamma T))"},
      {"qc-rate", "Constant-step SGD: slope -1/2 (noisy) and -1 (noiseless) in T"},
      {"sqc-output-subopt",
       "Log-scaled SGD, geometric output: E[f(X) - f*] <= sqc_bound(T), slope about -1"},
      {"sqc-contraction",
       "Noiseless strongly quasar-convex steps contract ||x - x*||^2 by (1 - gamma mu alpha)"},
      {"two-phase-det", "Deterministic two-phase method reaches ||grad f|| <= eps"},
      {"two-phase-qc", "Stochastic two-phase method (quasar-convex) reaches E||grad f|| <= eps"},
      {"two-phase-sqc",
       "Stochastic two-phase method (strongly quasar-convex) reaches E||grad f|| <= eps"},
      {"nonsmooth-constant",
       "Subgradient method, constant step: average suboptimality <= RG/(gamma sqrt T)"},
      {"nonsmooth-harmonic",
       "Subgradient method, step 1/(gamma mu t): E||x_t - x*||^2 <= G^2/(gamma^2 mu^2 t)"},
      {"gower-comparison", "qc_bound next to the constant-step comparison bound (no ordering claimed)"},
      {"complexity", "Empirical oracle complexity versus the certified iteration count"},
  };
  return claims;
}

namespace {

struct Loaded {
  ExperimentConfig cfg;
  ResultStore store;
  std::string digest;
};

Loaded load(const CommandOptions &opt) {
  if (opt.config.empty())
    throw ConfigError("--config PATH is required");
  json raw;
  try {
    raw = json::parse(ResultStore::read_file(opt.config));
  } catch (const json::exception &e) {
    throw ConfigError("cannot parse " + opt.config.string() + ": " + e.what());
  }
  if (!raw.is_object())
    throw ConfigError("config must be a JSON object");
  if (opt.seed)
    raw["seeds"]["master"] = *opt.seed;
  if (opt.bound)
    raw["bound"] = true;
  if (opt.fit)
    raw["fit"] = true;
  ExperimentConfig cfg = parse_config(raw);
  ResultStore store(opt.store_root.empty() ? ResultStore::default_root()
                                           : opt.store_root);
  store.ensure_layout();
  const std::string digest = digest_of(cfg.raw);
  if (!fs::exists(store.config_path(digest)))
    ResultStore::write_file(store.config_path(digest), cfg.raw.dump(2) + "\n");
  return {std::move(cfg), std::move(store), digest};
}

std::string point_str(const Point &p) {
  std::string s = "[";
  for (std::size_t i = 0; i < p.size(); ++i)
    s += (i ? ", " : "") + format_double(p[i]);
  return s + "]";
}

template <typename F>
int guarded(std::ostream &err, F &&body) {
  try {
    return body();
  } catch (const RegimeError &e) {
    err << "regime error: " << e.what() << "\n";
    if (e.minimal_T() > 0)
      err << "minimal admissible T = " << e.minimal_T() << "\n";
    return kExitRegime;
  } catch (const DivergenceError &e) {
    err << "divergence at step " << e.step() << ": " << e.what()
        << "\nlast finite iterate: " << point_str(e.last_finite()) << "\n";
    return kExitDivergence;
  } catch (const StageFailure &e) {
    err << "stage failure: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const CertificationError &e) {
    err << "certification failed: " << e.what()
        << "\nwitness: " << point_str(e.witness()) << "\n";
    return kExitCertification;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

json summary_meta(const Loaded &l, const SweepSummary &s,
                  std::optional<bool> pass) {
  return {{"name", l.cfg.name},
          {"claim", l.cfg.claim},
          {"experiment", to_string(l.cfg.kind)},
          {"digest", l.digest},
          {"statistic", to_string(s.statistic)},
          {"rows", s.rows.size()},
          {"pass", pass ? json(*pass) : json()}};
}

std::optional<bool> overall(const SweepSummary &s) {
  if (s.rows.empty() || !s.rows.front().pass)
    return std::nullopt;
  return std::all_of(s.rows.begin(), s.rows.end(),
                     [](const SummaryRow &r) { return r.pass.value_or(false); });
}

void print_summary(std::ostream &out, const SweepSummary &s) {
  for (const auto &r : s.rows) {
    out << "T=" << r.T << " " << to_string(r.statistic);
    if (r.seeds > 0)
      out << " mean=" << format_double(r.mean) << " ci95=" << format_double(r.ci95);
    out << " seeds=" << r.seeds;
    if (r.bound)
      out << " bound=" << format_double(*r.bound);
    if (r.pass)
      out << (*r.pass ? " pass" : " FAIL");
    if (r.bound_appendix_b)
      out << " bound_appendix_b=" << format_double(*r.bound_appendix_b);
    out << "\n";
  }
}

std::string fit_csv(const std::string &digest, const ExponentReport &rep) {
  std::string s = "config_digest,slope,intercept,r_squared,T_min,T_max,points,"
                  "predicted,tolerance,verdict\n";
  s += digest + ',' + format_double(rep.fit.slope) + ',' +
       format_double(rep.fit.intercept) + ',' +
       format_double(rep.fit.r_squared) + ',' + std::to_string(rep.fit.T_min) +
       ',' + std::to_string(rep.fit.T_max) + ',' +
       std::to_string(rep.fit.points) + ',' + format_double(rep.predicted) +
       ',' + format_double(rep.tolerance) + ',' + to_string(rep.verdict) + '\n';
  return s;
}

ExponentReport fit_and_store(const Loaded &l, const ResolvedExperiment &ex,
                             const SweepSummary &s, std::ostream &out) {
  const ExponentPrediction pred =
      predicted_exponent(ex.config.schedule, ex.params.sigma);
  ExponentPrediction used = pred;
  used.statistic = s.statistic;
  ExponentReport rep = exponent_report(s, used, regime_min_T(ex));
  ResultStore::write_file(l.store.summary_path(l.digest, "_fit.csv"),
                          fit_csv(l.digest, rep));
  out << "fit: slope=" << format_double(rep.fit.slope)
      << " r2=" << format_double(rep.fit.r_squared)
      << " predicted=" << format_double(rep.predicted) << " +/- "
      << format_double(rep.tolerance) << " verdict=" << to_string(rep.verdict);
  if (!rep.note.empty())
    out << " (" << rep.note << ")";
  out << "\n";
  return rep;
}

void write_summary(const Loaded &l, const SweepSummary &s,
                   std::optional<bool> pass, const CommandOptions &opt,
                   const std::string &title, std::optional<Verdict> fit) {
  ResultStore::write_file(l.store.summary_path(l.digest, ".csv"),
                          summary_csv(s));
  json meta = summary_meta(l, s, pass);
  if (fit)
    meta["fit_verdict"] = to_string(*fit);
  ResultStore::write_file(l.store.summary_path(l.digest, ".meta.json"),
                          meta.dump(2) + "\n");
  if (opt.plot)
    ResultStore::write_file(l.store.summary_path(l.digest, ".svg"),
                            svg_plot(s, title));
}

int sweep_like(const CommandOptions &opt, Loaded &l, std::ostream &out) {
  const ResolvedExperiment ex = resolve(l.cfg, &l.store, opt.force);
  const std::string title = l.cfg.name.empty() ? l.digest : l.cfg.name;
  std::vector<RunRecord> runs;
  SweepSummary s = sweep_impl(ex, opt.jobs, &runs);
  ResultStore::write_file(l.store.runs_path(l.digest), run_csv(runs));
  std::optional<Verdict> fit;
  if (l.cfg.fit)
    fit = fit_and_store(l, ex, s, out).verdict;
  write_summary(l, s, overall(s), opt, title, fit);
  print_summary(out, s);
  return kExitOk;
}

int two_phase_cmd(const CommandOptions &opt, Loaded &l, std::ostream &out) {
  const ResolvedExperiment ex = resolve(l.cfg, &l.store, opt.force);
  const Oracle oracle(ex.objective, l.cfg.oracle);
  const double eps = l.cfg.epsilon;
  const std::string &v = l.cfg.variant;
  if (v == "det" && !l.cfg.oracle.deterministic())
    throw ConfigError("variant det needs sigma = 0");
  const TwoPhaseVariant variant =
      v == "sqc" ? TwoPhaseVariant::sqc : TwoPhaseVariant::qc;
  const PhasePlan plan = v == "det"
                             ? split_det(eps, ex.certificate.gamma,
                                         ex.certificate.R, ex.certificate.L)
                             : plan_for(variant, ex.certificate,
                                        l.cfg.oracle.sigma, eps);
  const SgdQcStageOne stage_one;
  auto recs = run_indexed<TwoPhaseRecord>(
      l.cfg.seeds, opt.jobs, [&](std::int64_t i) {
        RunOptions o = base_options(ex, i, l.cfg.thinning);
        if (v == "det")
          return two_phase_det(oracle, stage_one, ex.certificate, l.cfg.x0,
                               eps, o);
        return two_phase_sto(oracle, ex.certificate, l.cfg.x0, eps, variant, o);
      });

  std::vector<RunRecord> series;
  std::vector<double> grads;
  for (auto &r : recs) {
    grads.push_back(r.output.grad_norm);
    RunRecord joined = r.stage1;
    for (auto s : r.stage2.series) {
      s.t += r.stage1.T;
      joined.series.push_back(s);
    }
    series.push_back(std::move(joined));
  }
  ResultStore::write_file(l.store.runs_path(l.digest), run_csv(series));

  const MeanCi m = mean_ci(grads);
  SweepSummary s;
  s.config_digest = l.digest;
  s.statistic = StatisticKind::output_grad_norm;
  SummaryRow row;
  row.T = recs.front().queries;
  row.statistic = s.statistic;
  row.mean = m.mean;
  row.ci95 = m.ci95;
  row.seeds = m.n;
  if (l.cfg.bound) {
    row.bound = eps;
    row.pass = row.mean - row.ci95 <= eps;
  }
  s.rows.push_back(row);
  ResultStore::write_file(l.store.summary_path(l.digest, "_plan.json"),
                          to_json(plan).dump(2) + "\n");
  write_summary(l, s, overall(s), opt, l.cfg.name, std::nullopt);
  out << "plan: eps1=" << format_double(plan.epsilon1)
      << " stage1=" << plan.stage1_iters << " stage2=" << plan.stage2_iters
      << "\n";
  print_summary(out, s);
  return kExitOk;
}

int complexity_cmd(const CommandOptions &opt, Loaded &l, std::ostream &out) {
  const ResolvedExperiment ex = resolve(l.cfg, &l.store, opt.force);
  const CriterionRunner runner = [&](std::int64_t T) -> std::vector<double> {
    try {
      auto runs = run_seeds(ex, T, opt.jobs, T);
      return criterion_values(runs, l.cfg.criterion);
    } catch (const RegimeError &) {
      // horizon below the schedule's admissible range: not met
      return {std::numeric_limits<double>::infinity()};
    }
  };
  const ComplexityEstimate est = empirical_complexity(runner, l.cfg.epsilon, l.cfg.cap);
  std::string predicted;
  if (l.cfg.schedule == ScheduleKind::qc_constant &&
      l.cfg.criterion == Criterion::subopt)
    predicted = std::to_string(qc_iterations(l.cfg.epsilon, ex.params.R,
                                             ex.params.sigma, ex.params.L,
                                             ex.params.gamma));
  std::string csv = "config_digest,criterion,epsilon,T_hat,attained,confident,"
                    "mean,ci95,seeds,cap,bound_T\n";
  csv += l.digest + ',' +
         (l.cfg.criterion == Criterion::subopt ? "subopt" : "grad-norm") + ',' +
         format_double(l.cfg.epsilon) + ',' + std::to_string(est.T) + ',' +
         (est.attained ? "true" : "false") + ',' +
         (est.confident ? "true" : "false") + ',' + format_double(est.mean) +
         ',' + format_double(est.ci95) + ',' + std::to_string(l.cfg.seeds) +
         ',' + std::to_string(est.cap) + ',' + predicted + '\n';
  ResultStore::write_file(l.store.summary_path(l.digest, "_complexity.csv"), csv);
  json meta = {{"name", l.cfg.name},
               {"claim", l.cfg.claim},
               {"experiment", to_string(l.cfg.kind)},
               {"digest", l.digest},
               {"pass", est.attained}};
  ResultStore::write_file(l.store.summary_path(l.digest, ".meta.json"),
                          meta.dump(2) + "\n");
  if (!est.attained) {
    out << "not attained within budget (cap " << est.cap << ")\n";
    return kExitOk;
  }
  out << "T_hat=" << est.T << " mean=" << format_double(est.mean)
      << " ci95=" << format_double(est.ci95)
      << (est.confident ? " confident" : " not confident");
  if (!predicted.empty())
    out << " bound_T=" << predicted;
  out << "\n";
  return kExitOk;
}

int compare_gower_cmd(const CommandOptions &opt, Loaded &l, std::ostream &out) {
  const ResolvedExperiment ex = resolve(l.cfg, &l.store, opt.force);
  const ScheduleParams &p = ex.params;
  const auto curves = gower_comparison(l.cfg.T_grid, p.R, p.sigma, p.gamma,
                                       p.L, l.cfg.beta);
  SweepSummary s;
  s.config_digest = l.digest;
  s.statistic = StatisticKind::avg_subopt;
  std::vector<RunRecord> runs;
  for (const auto &c : curves) {
    SummaryRow row;
    if (l.cfg.seeds > 0) {
      auto rs = run_seeds(ex, c.T, opt.jobs, c.T);
      row = summarize(c.T, s.statistic, rs);
      runs.insert(runs.end(), rs.begin(), rs.end());
    } else {
      row.T = c.T;
      row.statistic = s.statistic;
    }
    row.bound = c.qc_bound;
    row.bound_appendix_b = c.appendix_bound;
    s.rows.push_back(row);
  }
  if (!runs.empty())
    ResultStore::write_file(l.store.runs_path(l.digest), run_csv(runs));
  write_summary(l, s, std::nullopt, opt, l.cfg.name, std::nullopt);
  print_summary(out, s);
  return kExitOk;
}

std::string done_marker(ExperimentKind k) {
  switch (k) {
  case ExperimentKind::complexity:
    return "_complexity.csv";
  default:
    return ".csv";
  }
}

bool already_done(const Loaded &l, const CommandOptions &opt,
                  std::ostream &out) {
  const std::string suffix = done_marker(l.cfg.kind);
  if (opt.force || !fs::exists(l.store.summary_path(l.digest, suffix)))
    return false;
  out << "config " << l.digest << " already in store; skipped (use --force)\n";
  return true;
}

} // namespace

int cmd_certify(const CommandOptions &opt, std::ostream &out,
                std::ostream &err) {
  return guarded(err, [&]() -> int {
    Loaded l = load(opt);
    const ResolvedExperiment ex = resolve(l.cfg, &l.store, opt.force);
    const ConstantsCertificate &c = ex.certificate;
    if (!ex.report && !opt.force)
      out << "certificate loaded (supplied or cached)\n";
    out << "gamma=" << format_double(c.gamma) << " mu=" << format_double(c.mu)
        << " L=" << format_double(c.L) << " G=" << format_double(c.G)
        << " R=" << format_double(c.R) << "\n";
    if (ex.report)
      out << "worst point (gamma): " << point_str(ex.report->worst_point_gamma)
          << "\nworst point (mu): " << point_str(ex.report->worst_point_mu)
          << "\nmin strong gap: " << format_double(ex.report->min_gap) << "\n";
    // problem-level certificate named after the experiment digest too
    ResultStore::write_file(l.store.certificate_path(l.digest),
                            json{{"certificate", to_json(c)}}.dump(2) + "\n");
    json meta = {{"name", l.cfg.name},      {"claim", l.cfg.claim},
                 {"experiment", "certify"}, {"digest", l.digest},
                 {"statistic", "gamma"},    {"gamma", c.gamma},
                 {"mu", c.mu},              {"pass", true}};
    ResultStore::write_file(l.store.summary_path(l.digest, "_certify.meta.json"),
                            meta.dump(2) + "\n");
    return kExitOk;
  });
}

int cmd_run(const CommandOptions &opt, std::ostream &out, std::ostream &err) {
  return guarded(err, [&]() -> int {
    Loaded l = load(opt);
    switch (l.cfg.kind) {
    case ExperimentKind::two_phase:
      if (already_done(l, opt, out))
        return kExitOk;
      return two_phase_cmd(opt, l, out);
    case ExperimentKind::complexity:
      if (already_done(l, opt, out))
        return kExitOk;
      return complexity_cmd(opt, l, out);
    case ExperimentKind::run:
      break;
    default:
      throw ConfigError("'run' expects a run, two_phase or complexity config; "
                        "use 'sweep' for " + to_string(l.cfg.kind));
    }
    if (!opt.force && fs::exists(l.store.runs_path(l.digest))) {
      out << "config " << l.digest << " already in store; skipped (use --force)\n";
      return kExitOk;
    }
    const ResolvedExperiment ex = resolve(l.cfg, &l.store, opt.force);
    const std::int64_t T = l.cfg.T_grid.front();
    auto runs = run_seeds(ex, T, opt.jobs, l.cfg.thinning);
    ResultStore::write_file(l.store.runs_path(l.digest), run_csv(runs));
    std::size_t rows = 0;
    for (const auto &r : runs)
      rows += r.series.size();
    out << "wrote " << runs.size() << " runs (" << rows << " rows) to "
        << l.store.runs_path(l.digest).string() << "\n";
    if (l.cfg.check_contraction) {
      std::int64_t checks = 0, violations = 0;
      for (const auto &r : runs) {
        checks += r.contraction_checks;
        violations += r.contraction_violations;
      }
      out << "contraction: " << violations << " violation(s) in " << checks
          << " steps\n";
      json meta = {{"name", l.cfg.name},        {"claim", l.cfg.claim},
                   {"experiment", "run"},       {"digest", l.digest},
                   {"statistic", "contraction"}, {"checks", checks},
                   {"violations", violations},  {"pass", violations == 0}};
      ResultStore::write_file(l.store.summary_path(l.digest, ".meta.json"),
                              meta.dump(2) + "\n");
    }
    return kExitOk;
  });
}

int cmd_sweep(const CommandOptions &opt, std::ostream &out, std::ostream &err) {
  return guarded(err, [&]() -> int {
    Loaded l = load(opt);
    if (already_done(l, opt, out))
      return kExitOk;
    switch (l.cfg.kind) {
    case ExperimentKind::sweep:
    case ExperimentKind::run:
      return sweep_like(opt, l, out);
    case ExperimentKind::compare_gower:
      return compare_gower_cmd(opt, l, out);
    case ExperimentKind::two_phase:
      return two_phase_cmd(opt, l, out);
    case ExperimentKind::complexity:
      return complexity_cmd(opt, l, out);
    }
    return kExitUsage;
  });
}

int cmd_fit(const CommandOptions &opt, std::ostream &out, std::ostream &err) {
  return guarded(err, [&]() -> int {
    CommandOptions o = opt;
    o.fit = false; // the sweep is looked up under its own digest
    Loaded l = load(o);
    const fs::path summary = l.store.summary_path(l.digest, ".csv");
    if (!fs::exists(summary))
      throw ConfigError("no summary for " + l.digest + "; run 'sweep' first");
    if (!opt.force && fs::exists(l.store.summary_path(l.digest, "_fit.csv"))) {
      out << ResultStore::read_file(l.store.summary_path(l.digest, "_fit.csv"));
      return kExitOk;
    }
    const ResolvedExperiment ex = resolve(l.cfg, &l.store, false);
    const SweepSummary s = parse_summary_csv(ResultStore::read_file(summary));
    const ExponentReport rep = fit_and_store(l, ex, s, out);
    const fs::path meta_path = l.store.summary_path(l.digest, ".meta.json");
    json meta = fs::exists(meta_path)
                    ? json::parse(ResultStore::read_file(meta_path))
                    : summary_meta(l, s, overall(s));
    meta["fit_verdict"] = to_string(rep.verdict);
    ResultStore::write_file(meta_path, meta.dump(2) + "\n");
    return kExitOk;
  });
}

int cmd_report(const CommandOptions &opt, std::ostream &out, std::ostream &err) {
  return guarded(err, [&]() -> int {
    ResultStore store(opt.store_root.empty() ? ResultStore::default_root()
                                             : opt.store_root);
    store.ensure_layout();
    std::map<std::string, std::vector<json>> by_claim;
    std::vector<std::string> unclaimed;
    for (const auto &entry : fs::directory_iterator(store.root() / "summaries")) {
      const std::string fname = entry.path().filename().string();
      if (fname.size() < 10 || fname.substr(fname.size() - 10) != ".meta.json")
        continue;
      json meta = json::parse(ResultStore::read_file(entry.path()));
      by_claim[meta.value("claim", std::string{})].push_back(std::move(meta));
    }
    for (auto &[claim, metas] : by_claim)
      std::sort(metas.begin(), metas.end(), [](const json &a, const json &b) {
        return a.value("digest", "") < b.value("digest", "");
      });

    auto verdict_of = [](const json &m) -> std::string {
      std::string v;
      if (m.contains("pass") && !m.at("pass").is_null())
        v = m.at("pass").get<bool>() ? "pass" : "fail";
      else
        v = "reported";
      if (m.contains("fit_verdict"))
        v += ", fit " + m.at("fit_verdict").get<std::string>();
      return v;
    };

    std::ostringstream md;
    md << "# Results report\n\n"
       << "| claim | statement | experiment | verdict |\n"
       << "|---|---|---|---|\n";
    std::size_t missing = 0;
    for (const auto &c : report_claims()) {
      auto it = by_claim.find(c.id);
      if (it == by_claim.end()) {
        md << "| " << c.id << " | " << c.statement << " | - | not run |\n";
        ++missing;
        continue;
      }
      for (const auto &m : it->second)
        md << "| " << c.id << " | " << c.statement << " | "
           << m.value("name", std::string{}) << " (" << m.value("digest", "")
           << ") | " << verdict_of(m) << " |\n";
    }
    bool extra_header = false;
    for (const auto &[claim, metas] : by_claim) {
      const bool known = std::any_of(
          report_claims().begin(), report_claims().end(),
          [&](const ClaimInfo &c) { return c.id == claim; });
      if (known)
        continue;
      if (!extra_header) {
        md << "\n## Other experiments\n\n| claim | experiment | verdict |\n|---|---|---|\n";
        extra_header = true;
      }
      for (const auto &m : metas)
        md << "| " << (claim.empty() ? "-" : claim) << " | "
           << m.value("name", std::string{}) << " (" << m.value("digest", "")
           << ") | " << verdict_of(m) << " |\n";
    }
    ResultStore::write_file(store.report_path(), md.str());
    if (missing > 0)
      err << "warning: " << missing << " claim(s) have no summaries\n";
    out << "wrote " << store.report_path().string() << "\n";
    return kExitOk;
  });
}

} // namespace qb
