#pragma once

// Experiment configs, the on-disk result store, and the command
// implementations behind the qbench tool.

#include "qb/analysis.hpp"
#include "qb/problems.hpp"
#include "qb/solvers.hpp"

#include "json.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace qb {

// ---- CSV ------------------------------------------------------------------

// 17 significant digits; round-trips every double.
std::string format_double(double v);

inline constexpr const char *kRunCsvHeader =
    "config_digest,seed,t,f_gap,grad_norm,dist_sq";
inline constexpr const char *kSummaryCsvHeader =
    "config_digest,T,statistic,mean,ci95,seeds,bound,pass";

std::string run_csv(std::span<const RunRecord> runs);
// Appends a bound_appendix_b column when any row carries one.
std::string summary_csv(const SweepSummary &summary);
SweepSummary parse_summary_csv(const std::string &text);

// Minimal SVG: log-log mean with 95% band, plus bound curves when present.
std::string svg_plot(const SweepSummary &summary, const std::string &title);

// ---- store ----------------------------------------------------------------

class ResultStore {
public:
  explicit ResultStore(std::filesystem::path root);

  // $QB_RESULT_DIR when set, otherwise ./results.
  static std::filesystem::path default_root();

  const std::filesystem::path &root() const { return root_; }
  void ensure_layout() const;

  std::filesystem::path config_path(const std::string &digest) const;
  std::filesystem::path runs_path(const std::string &digest) const;
  std::filesystem::path summary_path(const std::string &digest,
                                     const std::string &suffix = "") const;
  std::filesystem::path certificate_path(const std::string &digest) const;
  std::filesystem::path report_path() const;

  // Write-to-temp then rename, so readers never see partial files.
  static void write_file(const std::filesystem::path &p,
                         const std::string &content);
  static std::string read_file(const std::filesystem::path &p);

private:
  std::filesystem::path root_;
};

// ---- configs --------------------------------------------------------------

enum class ExperimentKind { run, sweep, two_phase, complexity, compare_gower };
std::string to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(const std::string &name);

struct ExperimentConfig {
  std::string name;
  std::string claim; // report row this experiment backs; may be empty
  ExperimentKind kind = ExperimentKind::run;
  nlohmann::json problem;
  std::optional<Box> box;
  CertifyOptions certify;
  OracleConfig oracle;
  ScheduleKind schedule = ScheduleKind::qc_constant;
  nlohmann::json schedule_overrides = nlohmann::json::object();
  Point x0;
  std::vector<std::int64_t> T_grid;
  std::optional<OutputKind> output;
  std::int64_t seeds = 1;
  std::uint64_t master_seed = 0;
  std::optional<StatisticKind> statistic;
  std::int64_t thinning = 0;
  // two_phase / complexity
  double epsilon = 0.0;
  std::string variant = "det"; // det | qc | sqc
  Criterion criterion = Criterion::subopt;
  std::int64_t cap = 1 << 20;
  // compare_gower
  double beta = 0.5;
  // CLI flags folded into the effective config
  bool bound = false;
  bool fit = false;
  // Count per-step contraction violations (needs mu > 0).
  bool check_contraction = false;

  nlohmann::json raw; // effective document, the digest source
};

// Parses and validates structure (not regimes). ConfigError on bad input.
ExperimentConfig parse_config(const nlohmann::json &j);

// FNV-1a over the canonical dump of j with the "output" member removed.
// Keys are sorted, so field order in the file does not matter.
std::string digest_of(const nlohmann::json &j);

// ---- resolution -----------------------------------------------------------

struct ResolvedExperiment {
  ExperimentConfig config;
  std::string digest;
  ObjectivePtr objective;
  ConstantsCertificate certificate;
  std::optional<CertificationReport> report; // when certified here
  ScheduleParams params;
};

// Builds the objective, obtains a certificate (supplied, cached in the
// store, or freshly certified) and derives schedule parameters.
ResolvedExperiment resolve(const ExperimentConfig &cfg,
                           const ResultStore *store = nullptr,
                           bool force = false);

StepSchedule make_schedule(const ResolvedExperiment &ex, std::int64_t T);
OutputRule make_output_rule(const ResolvedExperiment &ex,
                            const StepSchedule &schedule);
StatisticKind default_statistic(const ResolvedExperiment &ex);
std::optional<BoundEvaluator> bound_for(const ResolvedExperiment &ex);
std::int64_t regime_min_T(const ResolvedExperiment &ex);

// All seeds at horizon T, in run-index order.
std::vector<RunRecord> run_seeds(const ResolvedExperiment &ex, std::int64_t T,
                                 int jobs, std::int64_t thinning);

SweepSummary sweep(const ResolvedExperiment &ex, int jobs);

// ---- commands -------------------------------------------------------------

struct CommandOptions {
  std::filesystem::path config;
  std::filesystem::path store_root;
  int jobs = 1;
  bool force = false;
  bool bound = false;
  bool fit = false;
  bool plot = false;
  std::optional<std::uint64_t> seed;
};

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitDivergence = 2,
  kExitRegime = 3,
  kExitCertification = 4
};

// Each returns a process exit code and never throws for expected failures.
int cmd_certify(const CommandOptions &opt, std::ostream &out, std::ostream &err);
int cmd_run(const CommandOptions &opt, std::ostream &out, std::ostream &err);
int cmd_sweep(const CommandOptions &opt, std::ostream &out, std::ostream &err);
int cmd_fit(const CommandOptions &opt, std::ostream &out, std::ostream &err);
int cmd_report(const CommandOptions &opt, std::ostream &out, std::ostream &err);

// Claims the report is organized around, in report order.
struct ClaimInfo {
  std::string id;
  std::string statement;
};
const std::vector<ClaimInfo> &report_claims();

} // namespace qb
