#pragma once

#include <string>
#include <vector>

#include "sesim/config.hpp"

namespace sesim {

/// What one trained seed produced, as recorded in its summary.json.
struct SeedOutcome {
  int seed_index = 0;
  std::uint64_t run_seed = 0;
  double error_pct = 0.0;
  double mse_learned = 0.0;
  double mse_assigned = 0.0;
  double knn_purity_pct = 0.0;
  double train_seconds = 0.0;
};

struct RunSummary {
  std::string method;
  std::vector<SeedOutcome> seeds;
  double error_mean = 0.0;
  double error_std = 0.0;  // sample std-dev; 0 for a single seed
  double mse_learned_mean = 0.0;
  double mse_assigned_mean = 0.0;
  double knn_purity_mean = 0.0;
};

RunSummary summarize(const std::string& method, std::vector<SeedOutcome> seeds);

/// Prefixes relative paths with $SESIM_OUT_ROOT when it is set.
std::string resolve_out_dir(const std::string& out_dir);

/// Trains and evaluates seed_index of the sweep, writing the full artifact
/// set (config copy, data, logs, model snapshot, eval CSVs/JSON, summary)
/// under seed_dir. config_text is copied verbatim so the run is
/// reconstructable.
SeedOutcome run_seed(const ExperimentConfig& cfg, int seed_index,
                     const std::string& seed_dir, const std::string& config_text);

/// All seeds of one method into <out>/seed<i>/, plus an aggregate
/// summary.json. parallel > 1 runs that many seeds concurrently.
RunSummary run_experiment(const ExperimentConfig& cfg, const std::string& config_text,
                          int parallel = 1);

struct AblationSummary {
  std::vector<RunSummary> methods;  // supervised, pi, full — in that order
};

/// Paired comparison: the three method variants with identical seeds, under
/// <out>/<method>/, plus a comparison table (CSV + aligned text).
AblationSummary run_ablation(const ExperimentConfig& cfg, const std::string& config_text,
                             int parallel = 1);

/// Derives plot-ready files for a finished run: per-epoch training-curve CSV
/// plus SVG renderings of the decision boundary and the similarity matrix,
/// into <seed_dir>/plots/. Accepts either one seed directory or a sweep
/// directory containing them. Missing inputs raise IoError naming every
/// absent file.
void export_plots(const std::string& run_dir);

}  // namespace sesim
