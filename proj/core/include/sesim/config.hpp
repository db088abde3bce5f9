#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "sesim/eval.hpp"
#include "sesim/trainer.hpp"

namespace sesim {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DatasetConfig {
  std::string name = "two_moons";
  int n = 6000;
  int n_test = 2000;
  double sigma = 0.15;
  int labeled = 12;
  std::uint64_t base_seed = 1;
};

struct EvalConfig {
  int similarity_samples = 200;
  int knn_k = 9;
  int knn_queries = 20;
  Rect grid;  // defaults depend on the dataset when the config omits bounds
  int grid_resolution = 100;
};

/// Everything one experiment needs: dataset recipe, method choice, training
/// hyperparameters, evaluation sizes, output location, seed count.
struct ExperimentConfig {
  std::string name;
  std::string method = "full";  // full | pi | supervised
  DatasetConfig dataset;
  int seeds = 5;
  std::string out_dir;  // defaults to out/<name>
  TrainConfig train;
  EvalConfig eval;

  void validate() const;  // throws ConfigError with the offending field
};

/// Strict parse: unknown keys anywhere are rejected, every error names the
/// field path. The input is the config file's full text.
ExperimentConfig parse_experiment_config(const std::string& json_text);

/// Read a whole file (throws IoError) — used to keep the verbatim config
/// text for copying into output directories.
std::string slurp_file(const std::string& path);

ExperimentConfig load_experiment_config(const std::string& path);

}  // namespace sesim
