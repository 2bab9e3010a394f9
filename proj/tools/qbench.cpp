// qbench: certification, runs, sweeps, fits and reports over a result store.

#include "qb/experiment.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char **argv) {
  CLI::App app{"quasar-convex SGD benchmark harness"};
  app.require_subcommand(1);

  qb::CommandOptions opt;
  std::string config;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App *sub, bool needs_config) {
    auto *c = sub->add_option("--config", config, "experiment config (JSON)");
    if (needs_config)
      c->required()->check(CLI::ExistingFile);
    sub->add_option("--jobs", opt.jobs, "worker threads")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--force", opt.force, "recompute even if the store has it");
    sub->add_option("--seed", seed, "override the master seed");
  };

  auto *certify = app.add_subcommand("certify", "certify structural constants");
  add_common(certify, true);
  auto *run = app.add_subcommand("run", "run every seed of a config");
  add_common(run, true);
  auto *sweep = app.add_subcommand("sweep", "sweep a T grid and summarize");
  add_common(sweep, true);
  sweep->add_flag("--bound", opt.bound, "add guaranteed-bound columns");
  sweep->add_flag("--fit", opt.fit, "fit the log-log rate");
  sweep->add_flag("--plot", opt.plot, "write an SVG plot");
  auto *fit = app.add_subcommand("fit", "fit the rate of a stored sweep");
  add_common(fit, true);
  fit->add_flag("--bound", opt.bound, "the sweep was run with --bound");
  auto *report = app.add_subcommand("report", "write reports/report.md");
  add_common(report, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : qb::kExitUsage;
  }

  opt.config = config;
  opt.store_root = qb::ResultStore::default_root();
  for (auto *sub : {certify, run, sweep, fit, report})
    if (sub->parsed() && sub->count("--seed") > 0)
      opt.seed = seed;

  if (certify->parsed())
    return qb::cmd_certify(opt, std::cout, std::cerr);
  if (run->parsed())
    return qb::cmd_run(opt, std::cout, std::cerr);
  if (sweep->parsed())
    return qb::cmd_sweep(opt, std::cout, std::cerr);
  if (fit->parsed())
    return qb::cmd_fit(opt, std::cout, std::cerr);
  return qb::cmd_report(opt, std::cout, std::cerr);
}
