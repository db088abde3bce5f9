#include "sesim/config.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

#include "sesim/baselines.hpp"

namespace sesim {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* key : allowed)
      if (it.key() == key) {
        known = true;
        break;
      }
    if (!known)
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

const json* maybe(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

template <class T>
void read(const json& obj, const std::string& where, const char* key, T& out) {
  if (const json* v = maybe(obj, key)) {
    try {
      out = v->get<T>();
    } catch (const json::exception&) {
      throw ConfigError("bad value for " + where + "." + key);
    }
  }
}

void parse_dataset(const json& obj, DatasetConfig& out) {
  check_keys(obj, "dataset", {"name", "n", "n_test", "sigma", "labeled", "base_seed"});
  read(obj, "dataset", "name", out.name);
  read(obj, "dataset", "n", out.n);
  read(obj, "dataset", "n_test", out.n_test);
  read(obj, "dataset", "sigma", out.sigma);
  read(obj, "dataset", "labeled", out.labeled);
  read(obj, "dataset", "base_seed", out.base_seed);
}

void parse_train(const json& obj, TrainConfig& out) {
  check_keys(obj, "train",
             {"beta", "k1", "k2", "lambda3", "epochs", "lr", "ema_decay", "aug_sigma",
              "adam", "ramp", "batch", "feature_hidden", "feature_leaky_slope",
              "similarity_hidden", "similarity_dropout"});
  read(obj, "train", "beta", out.beta);
  read(obj, "train", "k1", out.k1);
  read(obj, "train", "k2", out.k2);
  read(obj, "train", "lambda3", out.lambda3_max);
  read(obj, "train", "epochs", out.epochs);
  read(obj, "train", "lr", out.lr_max);
  read(obj, "train", "ema_decay", out.ema_decay);
  read(obj, "train", "aug_sigma", out.aug_sigma);
  read(obj, "train", "feature_hidden", out.feature_hidden);
  read(obj, "train", "feature_leaky_slope", out.feature_leaky_slope);
  read(obj, "train", "similarity_hidden", out.similarity_hidden);
  read(obj, "train", "similarity_dropout", out.similarity_dropout);
  if (const json* adam = maybe(obj, "adam")) {
    check_keys(*adam, "train.adam", {"beta1", "beta2", "eps"});
    read(*adam, "train.adam", "beta1", out.adam.beta1);
    read(*adam, "train.adam", "beta2", out.adam.beta2);
    read(*adam, "train.adam", "eps", out.adam.eps);
  }
  if (const json* ramp = maybe(obj, "ramp")) {
    check_keys(*ramp, "train.ramp",
               {"lambda13_epochs", "lambda2_delay", "lambda2_epochs", "lr_epochs"});
    read(*ramp, "train.ramp", "lambda13_epochs", out.ramp.lambda13_rampup_epochs);
    read(*ramp, "train.ramp", "lambda2_delay", out.ramp.lambda2_zero_until);
    read(*ramp, "train.ramp", "lambda2_epochs", out.ramp.lambda2_rampup_epochs);
    read(*ramp, "train.ramp", "lr_epochs", out.ramp.lr_rampup_epochs);
  }
  if (const json* batch = maybe(obj, "batch")) {
    check_keys(*batch, "train.batch", {"b1", "b2"});
    read(*batch, "train.batch", "b1", out.batch.b1);
    read(*batch, "train.batch", "b2", out.batch.b2);
  }
}

void parse_eval(const json& obj, EvalConfig& out, bool& grid_given) {
  check_keys(obj, "eval", {"similarity_samples", "knn_k", "knn_queries", "grid"});
  read(obj, "eval", "similarity_samples", out.similarity_samples);
  read(obj, "eval", "knn_k", out.knn_k);
  read(obj, "eval", "knn_queries", out.knn_queries);
  if (const json* grid = maybe(obj, "grid")) {
    grid_given = true;
    check_keys(*grid, "eval.grid", {"xmin", "xmax", "ymin", "ymax", "resolution"});
    read(*grid, "eval.grid", "xmin", out.grid.xmin);
    read(*grid, "eval.grid", "xmax", out.grid.xmax);
    read(*grid, "eval.grid", "ymin", out.grid.ymin);
    read(*grid, "eval.grid", "ymax", out.grid.ymax);
    read(*grid, "eval.grid", "resolution", out.grid_resolution);
  }
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config root must be an object");
  check_keys(root, "config",
             {"name", "method", "dataset", "seeds", "out_dir", "train", "eval"});

  ExperimentConfig cfg;
  read(root, "config", "name", cfg.name);
  read(root, "config", "method", cfg.method);
  read(root, "config", "seeds", cfg.seeds);
  read(root, "config", "out_dir", cfg.out_dir);
  if (const json* ds = maybe(root, "dataset")) parse_dataset(*ds, cfg.dataset);
  if (const json* tr = maybe(root, "train")) parse_train(*tr, cfg.train);
  bool grid_given = false;
  if (const json* ev = maybe(root, "eval")) parse_eval(*ev, cfg.eval, grid_given);

  if (!grid_given && cfg.dataset.name == "two_circles")
    cfg.eval.grid = Rect{-1.6, 1.6, -1.6, 1.6};
  if (cfg.out_dir.empty()) cfg.out_dir = "out/" + cfg.name;
  cfg.validate();
  return cfg;
}

void ExperimentConfig::validate() const {
  if (name.empty()) throw ConfigError("config.name must be set and non-empty");
  try {
    baseline_from_name(method);
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("config.method: ") + e.what());
  }
  if (dataset.name != "two_moons" && dataset.name != "two_circles")
    throw ConfigError("dataset.name must be two_moons or two_circles");
  if (dataset.n < 2) throw ConfigError("dataset.n must be >= 2");
  if (dataset.n_test < 1) throw ConfigError("dataset.n_test must be >= 1");
  if (dataset.sigma < 0.0) throw ConfigError("dataset.sigma must be >= 0");
  if (dataset.labeled < 1 || dataset.labeled > dataset.n)
    throw ConfigError("dataset.labeled must be in [1, n]");
  if (seeds < 1) throw ConfigError("config.seeds must be >= 1");
  try {
    train.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("config.train: ") + e.what());
  }
  if (eval.similarity_samples < 1 || eval.similarity_samples > dataset.n_test)
    throw ConfigError("eval.similarity_samples must be in [1, n_test]");
  if (eval.knn_k < 1 || eval.knn_k >= dataset.n_test)
    throw ConfigError("eval.knn_k must be in [1, n_test)");
  if (eval.knn_queries < 1 || eval.knn_queries > dataset.n_test)
    throw ConfigError("eval.knn_queries must be in [1, n_test]");
  if (eval.grid_resolution < 2) throw ConfigError("eval.grid.resolution must be >= 2");
}

std::string slurp_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

ExperimentConfig load_experiment_config(const std::string& path) {
  return parse_experiment_config(slurp_file(path));
}

}  // namespace sesim
