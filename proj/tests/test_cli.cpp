#include <gtest/gtest.h>

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string &s) {
  std::vector<std::string> v;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);)
    v.push_back(l);
  return v;
}

std::vector<std::string> fields(const std::string &line) {
  std::vector<std::string> v;
  std::istringstream in(line);
  for (std::string f; std::getline(in, f, ',');)
    v.push_back(f);
  if (!line.empty() && line.back() == ',')
    v.emplace_back();
  return v;
}

class Cli : public ::testing::Test {
protected:
  void SetUp() override {
    std::random_device rd;
    dir_ = fs::temp_directory_path() / ("qb_cli_" + std::to_string(rd()));
    fs::create_directories(dir_);
    store_ = dir_ / "store";
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const std::string &name, const std::string &body) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << body;
    return p;
  }

  Result qbench(const std::string &args, const fs::path &store = {}) {
    const fs::path out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = "QB_RESULT_DIR='" + (store.empty() ? store_ : store).string() +
                            "' '" QB_CLI_PATH "' " + args + " >'" + out.string() +
                            "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
  }

  fs::path only_file(const fs::path &sub, const std::string &suffix) {
    fs::path found;
    int n = 0;
    for (const auto &e : fs::directory_iterator(store_ / sub)) {
      const std::string f = e.path().filename().string();
      if (f.size() >= suffix.size() && f.substr(f.size() - suffix.size()) == suffix &&
          (suffix != ".csv" || f.find('_') == std::string::npos)) {
        found = e.path();
        ++n;
      }
    }
    EXPECT_EQ(n, 1) << sub << "/*" << suffix;
    return found;
  }

  fs::path dir_, store_;
};

const char *kQuadRun = R"({
  "name": "quad-run",
  "experiment": "run",
  "problem": {"family": "quadratic", "params": {"diag": [1.0, 2.0]}, "dimension": 2},
  "box": {"lower": [-5, -5], "upper": [5, 5]},
  "oracle": {"sigma": SIGMA, "noise": "gaussian"},
  "seeds": {"count": 3, "master": 1},
  "schedule": "qc_constant",
  "x0": [1.0, -1.0],
  "T": 50,
  "thinning": 10
})";

std::string quad_run(const std::string &sigma) {
  std::string s = kQuadRun;
  s.replace(s.find("SIGMA"), 5, sigma);
  return s;
}

const char *kQuadSweep = R"({
  "name": "quad-sweep",
  "claim": "qc-avg-subopt",
  "experiment": "sweep",
  "problem": {"family": "quadratic", "params": {"diag": [1.0]}, "dimension": 1},
  "box": {"lower": [-5], "upper": [5]},
  "oracle": {"sigma": 1.0},
  "seeds": {"count": 30, "master": 4},
  "schedule": "qc_constant",
  "x0": [1.0],
  "T": [100, 316, 1000, 3162, 10000]
})";

} // namespace

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(qbench("").code, 1);
  EXPECT_EQ(qbench("frobnicate").code, 1);
  EXPECT_EQ(qbench("run").code, 1);
  EXPECT_EQ(qbench("run --config /nonexistent/cfg.json").code, 1);
  const auto bad = write_config("bad.json", R"({"experiment": "run", "problem": {}})");
  EXPECT_EQ(qbench("run --config " + bad.string()).code, 1);
  const auto cfg = write_config("q.json", quad_run("0.0"));
  EXPECT_EQ(qbench("run --config " + cfg.string() + " --jobs 0").code, 1);
  EXPECT_EQ(qbench("--help").code, 0);
}

TEST_F(Cli, RunCsvSchemaAndRowCount) {
  const auto cfg = write_config("q.json", quad_run("0.5"));
  const auto r = qbench("run --config " + cfg.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = lines(slurp(only_file("runs", ".csv")));
  ASSERT_FALSE(csv.empty());
  EXPECT_EQ(csv[0], "config_digest,seed,t,f_gap,grad_norm,dist_sq");
  // 3 seeds x stored iterates t = 0, 10, ..., 50
  EXPECT_EQ(csv.size(), 1u + 3u * 6u);
  for (std::size_t i = 1; i < csv.size(); ++i) {
    const auto f = fields(csv[i]);
    ASSERT_EQ(f.size(), 6u);
    for (std::size_t k = 3; k < 6; ++k) {
      // values are written with 17 significant digits and round-trip exactly
      const double v = std::strtod(f[k].c_str(), nullptr);
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      EXPECT_EQ(f[k], buf);
    }
  }
  EXPECT_TRUE(fs::exists(only_file("configs", ".json")));
}

TEST_F(Cli, NoiselessRunsAreByteIdentical) {
  const auto cfg = write_config("q.json", quad_run("0.0"));
  ASSERT_EQ(qbench("run --config " + cfg.string()).code, 0);
  const std::string first = slurp(only_file("runs", ".csv"));
  ASSERT_EQ(qbench("run --force --jobs 3 --config " + cfg.string()).code, 0);
  EXPECT_EQ(slurp(only_file("runs", ".csv")), first);

  // a different master seed changes only the seed column
  const fs::path other = dir_ / "other";
  ASSERT_EQ(qbench("run --seed 99 --config " + cfg.string(), other).code, 0);
  fs::path p;
  for (const auto &e : fs::directory_iterator(other / "runs"))
    p = e.path();
  const auto a = lines(first), b = lines(slurp(p));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 1; i < a.size(); ++i) {
    const auto fa = fields(a[i]), fb = fields(b[i]);
    EXPECT_NE(fa[0], fb[0]);
    for (std::size_t k = 2; k < fa.size(); ++k)
      EXPECT_EQ(fa[k], fb[k]);
  }
}

TEST_F(Cli, NoisyRunsReproducibleAcrossJobs) {
  const auto cfg = write_config("q.json", quad_run("1.0"));
  ASSERT_EQ(qbench("run --jobs 1 --config " + cfg.string()).code, 0);
  const std::string a = slurp(only_file("runs", ".csv"));
  ASSERT_EQ(qbench("run --jobs 4 --force --config " + cfg.string()).code, 0);
  EXPECT_EQ(slurp(only_file("runs", ".csv")), a);
}

TEST_F(Cli, RegimeErrorExitCode) {
  const auto cfg = write_config("sqc.json", R"({
    "experiment": "run",
    "problem": {"family": "strong_variant",
                "params": {"mu_add": 0.5,
                           "base": {"family": "quadratic", "params": {"diag": [0.5]}, "dimension": 1}}},
    "box": {"lower": [-5], "upper": [5]},
    "oracle": {"sigma": 1.0},
    "seeds": {"count": 2},
    "schedule": "sqc_log",
    "x0": [1.0],
    "T": 10
  })");
  const auto r = qbench("run --config " + cfg.string());
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("minimal admissible T = 11"), std::string::npos) << r.err;
}

TEST_F(Cli, DivergenceExitCode) {
  const auto cfg = write_config("div.json", R"({
    "experiment": "run",
    "problem": {"family": "quadratic", "params": {"diag": [1.0]}, "dimension": 1},
    "box": {"lower": [-5], "upper": [5]},
    "schedule": {"name": "fixed", "alpha": 3.0},
    "x0": [1.0],
    "T": 1000
  })");
  const auto r = qbench("run --config " + cfg.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("divergence"), std::string::npos);
}

TEST_F(Cli, CertificationExitCode) {
  const auto cfg = write_config("cert.json", R"({
    "experiment": "run",
    "problem": {"family": "sine_bump", "params": {"a": 2.0, "b": 5.0}, "dimension": 1},
    "box": {"lower": [-2], "upper": [2]},
    "certify": {"grid_points": 20001},
    "x0": [1.0],
    "T": 10
  })");
  const auto r = qbench("certify --config " + cfg.string());
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find("witness"), std::string::npos);
}

TEST_F(Cli, CertifyWritesCertificate) {
  const auto cfg = write_config("cert.json", R"({
    "claim": "certification",
    "experiment": "run",
    "problem": {"family": "sine_bump", "params": {"a": 0.1, "b": 5.0}, "dimension": 1},
    "box": {"lower": [-10], "upper": [10]},
    "certify": {"grid_points": 200001},
    "x0": [1.0],
    "T": 10
  })");
  const auto r = qbench("certify --config " + cfg.string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("gamma=0.676"), std::string::npos) << r.out;
  int certs = 0;
  for (const auto &e : fs::directory_iterator(store_ / "certificates")) {
    (void)e;
    ++certs;
  }
  EXPECT_GE(certs, 1);
}

TEST_F(Cli, SweepWithBoundAndFit) {
  const auto cfg = write_config("s.json", kQuadSweep);
  const auto r = qbench("sweep --bound --fit --plot --config " + cfg.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = lines(slurp(only_file("summaries", ".csv")));
  ASSERT_EQ(csv.size(), 6u);
  EXPECT_EQ(csv[0], "config_digest,T,statistic,mean,ci95,seeds,bound,pass");
  for (std::size_t i = 1; i < csv.size(); ++i) {
    const auto f = fields(csv[i]);
    ASSERT_EQ(f.size(), 8u);
    EXPECT_EQ(f[2], "avg-subopt");
    EXPECT_EQ(f[5], "30");
    EXPECT_EQ(f[7], "true");
  }
  EXPECT_EQ(std::strtod(fields(csv[1])[6].c_str(), nullptr), 0.44);
  const auto fit = lines(slurp(only_file("summaries", "_fit.csv")));
  ASSERT_EQ(fit.size(), 2u);
  EXPECT_EQ(fields(fit[0])[1], "slope");
  const double slope = std::strtod(fields(fit[1])[1].c_str(), nullptr);
  EXPECT_NEAR(slope, -0.5, 0.15);
  EXPECT_TRUE(fs::exists(only_file("summaries", ".svg")));

  // without --bound the bound columns are empty
  const fs::path plain = dir_ / "plain";
  ASSERT_EQ(qbench("sweep --config " + cfg.string(), plain).code, 0);
  for (const auto &e : fs::directory_iterator(plain / "summaries"))
    if (e.path().extension() == ".csv") {
      const auto l = lines(slurp(e.path()));
      EXPECT_EQ(fields(l[1])[6], "");
      EXPECT_EQ(fields(l[1])[7], "");
    }
}

TEST_F(Cli, FitSubcommandUsesStoredSweep) {
  const auto cfg = write_config("s.json", kQuadSweep);
  EXPECT_EQ(qbench("fit --config " + cfg.string()).code, 1); // nothing stored yet
  ASSERT_EQ(qbench("sweep --config " + cfg.string()).code, 0);
  const auto r = qbench("fit --config " + cfg.string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("verdict=pass"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(only_file("summaries", "_fit.csv")));
}

TEST_F(Cli, SweepIsIdempotent) {
  const auto cfg = write_config("s.json", kQuadSweep);
  ASSERT_EQ(qbench("sweep --config " + cfg.string()).code, 0);
  const fs::path summary = only_file("summaries", ".csv");
  const auto stamp = fs::last_write_time(summary);
  const auto again = qbench("sweep --config " + cfg.string());
  EXPECT_EQ(again.code, 0);
  EXPECT_NE(again.out.find("already in store"), std::string::npos);
  EXPECT_EQ(fs::last_write_time(summary), stamp);
  const auto forced = qbench("sweep --force --config " + cfg.string());
  EXPECT_EQ(forced.code, 0);
  EXPECT_EQ(forced.out.find("already in store"), std::string::npos);
}

TEST_F(Cli, CompareGowerWritesBothCurves) {
  const auto cfg = write_config("g.json", R"({
    "experiment": "compare_gower",
    "claim": "gower-comparison",
    "problem": {"family": "quadratic", "params": {"diag": [1.0]}, "dimension": 1},
    "box": {"lower": [-5], "upper": [5]},
    "oracle": {"sigma": 1.0},
    "seeds": {"count": 0},
    "x0": [1.0],
    "T": [10, 100, 1000, 1000000],
    "beta": 0.5
  })");
  const auto r = qbench("sweep --config " + cfg.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = lines(slurp(only_file("summaries", ".csv")));
  ASSERT_EQ(csv.size(), 5u);
  EXPECT_EQ(csv[0], "config_digest,T,statistic,mean,ci95,seeds,bound,pass,bound_appendix_b");
  const auto row = fields(csv[2]);
  EXPECT_EQ(row[1], "100");
  EXPECT_NEAR(std::strtod(row[6].c_str(), nullptr), 0.44, 1e-12);
  EXPECT_NEAR(std::strtod(row[8].c_str(), nullptr), 0.158, 5e-4);
}

TEST_F(Cli, TwoPhaseWritesPlan) {
  const auto cfg = write_config("tp.json", R"({
    "experiment": "two_phase",
    "variant": "qc",
    "problem": {"family": "quadratic", "params": {"diag": [1.0]}, "dimension": 1},
    "box": {"lower": [-5], "upper": [5]},
    "oracle": {"sigma": 1.0},
    "seeds": {"count": 5},
    "x0": [1.0],
    "epsilon": 0.2,
    "thinning": 500
  })");
  const auto r = qbench("run --config " + cfg.string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(only_file("summaries", "_plan.json")));
  EXPECT_NE(r.out.find("plan:"), std::string::npos);
}

TEST_F(Cli, ComplexityFindsHorizon) {
  const auto cfg = write_config("c.json", R"({
    "experiment": "complexity",
    "problem": {"family": "quadratic", "params": {"diag": [1.0]}, "dimension": 1},
    "box": {"lower": [-5], "upper": [5]},
    "oracle": {"sigma": 0.0},
    "seeds": {"count": 1},
    "schedule": "qc_constant",
    "x0": [1.0],
    "epsilon": 0.1,
    "output_rule": "last",
    "criterion": "subopt",
    "cap": 1024
  })");
  const auto r = qbench("run --config " + cfg.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = lines(slurp(only_file("summaries", "_complexity.csv")));
  ASSERT_EQ(csv.size(), 2u);
  const auto f = fields(csv[1]);
  EXPECT_EQ(f[1], "subopt");
  // GD with step 1/2 on x^2/2: f(x_T) = 0.5 * 0.25^T
  EXPECT_EQ(f[3], "2");
}

TEST_F(Cli, ReportOnEmptyStore) {
  const auto r = qbench("report");
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string md = slurp(store_ / "reports" / "report.md");
  std::size_t not_run = 0, pos = 0;
  while ((pos = md.find("| not run |", pos)) != std::string::npos) {
    ++not_run;
    ++pos;
  }
  EXPECT_EQ(not_run, 12u);
  EXPECT_NE(r.err.find("warning"), std::string::npos);
}

TEST_F(Cli, ReportListsVerdicts) {
  const auto cfg = write_config("s.json", kQuadSweep);
  ASSERT_EQ(qbench("sweep --bound --config " + cfg.string()).code, 0);
  ASSERT_EQ(qbench("report").code, 0);
  const std::string md = slurp(store_ / "reports" / "report.md");
  EXPECT_NE(md.find("| qc-avg-subopt |"), std::string::npos);
  EXPECT_NE(md.find("quad-sweep"), std::string::npos);
  EXPECT_NE(md.find("| pass |"), std::string::npos);
}
