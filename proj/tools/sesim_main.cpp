// Experiment driver: config-file-driven training sweeps, the three-way
// method comparison, and plot-data export for finished runs.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include "sesim/experiment.hpp"

namespace {

struct SweepArgs {
  std::string config_path;
  int seeds_override = -1;   // -1: take the config's value
  std::string out_override;  // empty: take the config's value
  int parallel = 1;
};

void add_sweep_flags(CLI::App& cmd, SweepArgs& args) {
  cmd.add_option("--config", args.config_path, "experiment config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd.add_option("--seeds", args.seeds_override, "override the config's seed count")
      ->check(CLI::PositiveNumber);
  cmd.add_option("--out", args.out_override, "override the config's output directory");
  cmd.add_option("--parallel", args.parallel, "seeds trained concurrently (default 1)")
      ->check(CLI::PositiveNumber);
}

sesim::ExperimentConfig load_with_overrides(const SweepArgs& args, std::string* text) {
  *text = sesim::slurp_file(args.config_path);
  sesim::ExperimentConfig cfg = sesim::parse_experiment_config(*text);
  if (args.seeds_override > 0) cfg.seeds = args.seeds_override;
  if (!args.out_override.empty()) cfg.out_dir = args.out_override;
  cfg.validate();
  return cfg;
}

void print_summary(const sesim::RunSummary& s) {
  std::printf("%-12s", s.method.c_str());
  for (const sesim::SeedOutcome& o : s.seeds) std::printf("  %6.2f%%", o.error_pct);
  std::printf("  |  mean %.2f%%  std %.2f  (similarity mse %.4f, knn purity %.1f%%)\n",
              s.error_mean, s.error_std, s.mse_learned_mean, s.knn_purity_mean);
}

int cmd_run(const SweepArgs& args) {
  std::string text;
  const sesim::ExperimentConfig cfg = load_with_overrides(args, &text);
  std::printf("run: %s  method=%s  dataset=%s  seeds=%d\n", cfg.name.c_str(),
              cfg.method.c_str(), cfg.dataset.name.c_str(), cfg.seeds);
  const sesim::RunSummary summary = sesim::run_experiment(cfg, text, args.parallel);
  std::printf("test error per seed:\n");
  print_summary(summary);
  std::printf("artifacts: %s\n", sesim::resolve_out_dir(cfg.out_dir).c_str());
  return 0;
}

int cmd_ablate(const SweepArgs& args) {
  std::string text;
  const sesim::ExperimentConfig cfg = load_with_overrides(args, &text);
  std::printf("ablation: %s  dataset=%s  seeds=%d (paired across methods)\n",
              cfg.name.c_str(), cfg.dataset.name.c_str(), cfg.seeds);
  const sesim::AblationSummary ab = sesim::run_ablation(cfg, text, args.parallel);
  std::printf("test error per seed:\n");
  for (const sesim::RunSummary& s : ab.methods) print_summary(s);
  std::printf("artifacts: %s\n", sesim::resolve_out_dir(cfg.out_dir).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"joint feature/similarity semi-supervised training on toy datasets"};
  app.require_subcommand(1);

  SweepArgs run_args;
  CLI::App* run = app.add_subcommand("run", "train and evaluate one method across seeds");
  add_sweep_flags(*run, run_args);

  SweepArgs ablate_args;
  CLI::App* ablate = app.add_subcommand(
      "ablate", "compare supervised / consistency-only / full on paired seeds");
  add_sweep_flags(*ablate, ablate_args);

  std::string run_dir;
  CLI::App* plots =
      app.add_subcommand("export-plots", "derive plot files from a finished run");
  plots->add_option("run_dir", run_dir, "seed directory or sweep directory")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_args);
    if (ablate->parsed()) return cmd_ablate(ablate_args);
    sesim::export_plots(run_dir);
    std::printf("plots written under %s\n", run_dir.c_str());
    return 0;
  } catch (const sesim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const sesim::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const sesim::IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
