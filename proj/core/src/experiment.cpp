#include "sesim/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include "sesim/baselines.hpp"

namespace sesim {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << text;
  if (!os) throw IoError("write failed: " + path.string());
}

template <class Fn>
void write_with(const fs::path& path, Fn&& fn) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  fn(os);
  if (!os) throw IoError("write failed: " + path.string());
}

double knn_purity_pct(const ModelState& state, const Dataset& test,
                      const std::vector<int>& targets, int k,
                      std::vector<QueryResult>* learned_out,
                      std::vector<QueryResult>* gaussian_out, double beta) {
  if (targets.empty()) return 0.0;
  double purity_acc = 0.0;
  for (int target : targets) {
    QueryResult learned = knn_query(state, test, target, k, QueryMeasure::learned, beta);
    QueryResult gauss = knn_query(state, test, target, k, QueryMeasure::gaussian, beta);
    int same = 0;
    for (const Neighbor& nb : learned.neighbors)
      if (test.y[std::size_t(nb.index)] == test.y[std::size_t(target)]) ++same;
    purity_acc += double(same) / double(k);
    learned_out->push_back(std::move(learned));
    gaussian_out->push_back(std::move(gauss));
  }
  return 100.0 * purity_acc / double(targets.size());
}

ordered_json outcome_json(const SeedOutcome& o, const std::string& method) {
  return ordered_json{{"seed_index", o.seed_index},
                      {"run_seed", o.run_seed},
                      {"method", method},
                      {"error_pct", o.error_pct},
                      {"mse_learned", o.mse_learned},
                      {"mse_assigned", o.mse_assigned},
                      {"knn_purity_pct", o.knn_purity_pct},
                      {"train_seconds", o.train_seconds}};
}

}  // namespace

std::string resolve_out_dir(const std::string& out_dir) {
  if (fs::path(out_dir).is_absolute()) return out_dir;
  const char* root = std::getenv("SESIM_OUT_ROOT");
  if (root == nullptr || *root == '\0') return out_dir;
  return (fs::path(root) / out_dir).string();
}

SeedOutcome run_seed(const ExperimentConfig& cfg, int seed_index,
                     const std::string& seed_dir, const std::string& config_text) {
  const fs::path dir(seed_dir);
  fs::create_directories(dir / "eval");

  const std::uint64_t run_seed_value = cfg.dataset.base_seed + std::uint64_t(seed_index);
  Dataset ds = make_dataset(cfg.dataset.name, cfg.dataset.n, cfg.dataset.sigma,
                            derive_seed(run_seed_value, streams::kDataset));
  ds = select_labeled(std::move(ds), cfg.dataset.labeled,
                      derive_seed(run_seed_value, streams::kSplit));
  const Dataset test = make_dataset(cfg.dataset.name, cfg.dataset.n_test,
                                    cfg.dataset.sigma,
                                    derive_seed(run_seed_value, streams::kTestData));

  TrainConfig tcfg = cfg.train;
  tcfg.seed = run_seed_value;

  const auto t0 = std::chrono::steady_clock::now();
  TrainResult result = train_baseline(ds, baseline_from_name(cfg.method), tcfg);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  write_text(dir / "config.json", config_text);
  write_with(dir / "data.csv", [&](std::ostream& os) { write_dataset_csv(ds, os); });
  write_with(dir / "train_log.csv", [&](std::ostream& os) { result.log.write_csv(os); });
  write_with(dir / "epochs.json",
             [&](std::ostream& os) { result.log.write_epoch_json(os); });
  save_model(result.state, (dir / "model.bin").string());

  // Evaluation: everything below draws from one per-seed stream so reruns
  // pick the same probe samples.
  RngStream eval_rng(derive_seed(run_seed_value, streams::kEval));
  SeedOutcome out;
  out.seed_index = seed_index;
  out.run_seed = run_seed_value;
  out.train_seconds = seconds;
  out.error_pct = error_rate(result.state, test);

  const int m = std::min(cfg.eval.similarity_samples, test.n());
  const std::vector<int> sample_idx = eval_rng.sample_without_replacement(test.n(), m);
  SimilarityMatrix learned = similarity_matrix(result.state, test, sample_idx);
  SimilarityMatrix assigned = pseudo_label_matrix(result.state, test, sample_idx);
  out.mse_learned = mse_vs_ideal(learned);
  out.mse_assigned = mse_vs_ideal(assigned);
  write_with(dir / "eval" / "similarity.csv",
             [&](std::ostream& os) { write_similarity_csv(learned, os); });
  write_with(dir / "eval" / "similarity_meta.json",
             [&](std::ostream& os) { write_similarity_meta_json(learned, os); });
  write_with(dir / "eval" / "assigned.csv",
             [&](std::ostream& os) { write_similarity_csv(assigned, os); });

  const std::vector<int> targets = eval_rng.sample_without_replacement(
      test.n(), std::min(cfg.eval.knn_queries, test.n()));
  std::vector<QueryResult> learned_queries, gaussian_queries;
  out.knn_purity_pct =
      knn_purity_pct(result.state, test, targets, cfg.eval.knn_k, &learned_queries,
                     &gaussian_queries, cfg.train.beta);
  write_with(dir / "eval" / "knn.json", [&](std::ostream& os) {
    ordered_json both{{"learned", ordered_json::parse([&] {
                         std::ostringstream ss;
                         write_queries_json(learned_queries, test, ss);
                         return ss.str();
                       }())},
                      {"gaussian", ordered_json::parse([&] {
                         std::ostringstream ss;
                         write_queries_json(gaussian_queries, test, ss);
                         return ss.str();
                       }())}};
    os << both.dump(2) << '\n';
  });

  if (ds.dim() == 2) {
    const Matrix grid =
        decision_grid(result.state, cfg.eval.grid, cfg.eval.grid_resolution);
    write_with(dir / "eval" / "grid.csv",
               [&](std::ostream& os) { write_grid_csv(grid, os); });
  }

  write_with(dir / "summary.json", [&](std::ostream& os) {
    os << outcome_json(out, cfg.method).dump(2) << '\n';
  });
  return out;
}

RunSummary summarize(const std::string& method, std::vector<SeedOutcome> seeds) {
  RunSummary s;
  s.method = method;
  s.seeds = std::move(seeds);
  const double n = double(s.seeds.size());
  if (s.seeds.empty()) return s;
  for (const SeedOutcome& o : s.seeds) {
    s.error_mean += o.error_pct;
    s.mse_learned_mean += o.mse_learned;
    s.mse_assigned_mean += o.mse_assigned;
    s.knn_purity_mean += o.knn_purity_pct;
  }
  s.error_mean /= n;
  s.mse_learned_mean /= n;
  s.mse_assigned_mean /= n;
  s.knn_purity_mean /= n;
  if (s.seeds.size() > 1) {
    double acc = 0.0;
    for (const SeedOutcome& o : s.seeds) {
      const double d = o.error_pct - s.error_mean;
      acc += d * d;
    }
    s.error_std = std::sqrt(acc / (n - 1.0));
  }
  return s;
}

RunSummary run_experiment(const ExperimentConfig& cfg, const std::string& config_text,
                          int parallel) {
  const fs::path out(resolve_out_dir(cfg.out_dir));
  fs::create_directories(out);
  write_text(out / "config.json", config_text);

  std::vector<SeedOutcome> outcomes(std::size_t(cfg.seeds));
  auto seed_job = [&](int i) {
    return run_seed(cfg, i, (out / ("seed" + std::to_string(i))).string(), config_text);
  };
  if (parallel <= 1) {
    for (int i = 0; i < cfg.seeds; ++i) outcomes[std::size_t(i)] = seed_job(i);
  } else {
    for (int base = 0; base < cfg.seeds; base += parallel) {
      std::vector<std::future<SeedOutcome>> wave;
      for (int i = base; i < std::min(cfg.seeds, base + parallel); ++i)
        wave.push_back(std::async(std::launch::async, seed_job, i));
      for (int i = base; i < std::min(cfg.seeds, base + parallel); ++i)
        outcomes[std::size_t(i)] = wave[std::size_t(i - base)].get();
    }
  }

  RunSummary summary = summarize(cfg.method, std::move(outcomes));
  write_with(out / "summary.json", [&](std::ostream& os) {
    ordered_json per_seed = ordered_json::array();
    for (const SeedOutcome& o : summary.seeds)
      per_seed.push_back(outcome_json(o, cfg.method));
    ordered_json doc{{"name", cfg.name},
                     {"method", cfg.method},
                     {"dataset", cfg.dataset.name},
                     {"seeds", per_seed},
                     {"aggregate",
                      {{"error_mean", summary.error_mean},
                       {"error_std", summary.error_std},
                       {"mse_learned_mean", summary.mse_learned_mean},
                       {"mse_assigned_mean", summary.mse_assigned_mean},
                       {"knn_purity_mean", summary.knn_purity_mean}}}};
    os << doc.dump(2) << '\n';
  });
  return summary;
}

AblationSummary run_ablation(const ExperimentConfig& cfg, const std::string& config_text,
                             int parallel) {
  const fs::path out(resolve_out_dir(cfg.out_dir));
  fs::create_directories(out);
  write_text(out / "config.json", config_text);

  AblationSummary ab;
  for (const char* method : {"supervised", "pi", "full"}) {
    ExperimentConfig mcfg = cfg;
    mcfg.method = method;
    mcfg.out_dir = (out / method).string();
    ab.methods.push_back(run_experiment(mcfg, config_text, parallel));
  }

  // Comparison table: one row per method, one column per seed, then the
  // aggregate. CSV plus an aligned text rendering.
  write_with(out / "ablation.csv", [&](std::ostream& os) {
    os << "method";
    for (int i = 0; i < cfg.seeds; ++i) os << ",seed" << i << "_error_pct";
    os << ",error_mean,error_std\n";
    os.precision(17);
    for (const RunSummary& r : ab.methods) {
      os << r.method;
      for (const SeedOutcome& o : r.seeds) os << ',' << o.error_pct;
      os << ',' << r.error_mean << ',' << r.error_std << '\n';
    }
  });
  write_with(out / "ablation.txt", [&](std::ostream& os) {
    os << "test error rate (%), lower is better\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%-12s", "method");
    os << buf;
    for (int i = 0; i < cfg.seeds; ++i) {
      std::snprintf(buf, sizeof(buf), " %9s%d", "seed", i);
      os << buf;
    }
    os << "       mean        std\n";
    for (const RunSummary& r : ab.methods) {
      std::snprintf(buf, sizeof(buf), "%-12s", r.method.c_str());
      os << buf;
      for (const SeedOutcome& o : r.seeds) {
        std::snprintf(buf, sizeof(buf), " %10.3f", o.error_pct);
        os << buf;
      }
      std::snprintf(buf, sizeof(buf), " %10.3f %10.3f\n", r.error_mean, r.error_std);
      os << buf;
    }
  });
  return ab;
}

// ---- plot export ----

namespace {

// Minimal CSV-of-numbers reader (our own files: no quoting, no escapes).
std::vector<std::vector<double>> read_csv(const fs::path& path, bool header,
                                          std::vector<std::string>* names) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path.string());
  std::string line;
  if (header && std::getline(is, line)) {
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
      if (names != nullptr) names->push_back(field);
    }
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) row.push_back(std::strtod(field.c_str(), nullptr));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string hex_blend(double t, int r0, int g0, int b0, int r1, int g1, int b1) {
  t = std::min(1.0, std::max(0.0, t));
  const int r = int(std::lround(r0 + t * (r1 - r0)));
  const int g = int(std::lround(g0 + t * (g1 - g0)));
  const int b = int(std::lround(b0 + t * (b1 - b0)));
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

void render_boundary_svg(const fs::path& grid_csv, const fs::path& data_csv,
                         const fs::path& out_svg) {
  std::vector<std::string> grid_cols;
  const auto grid = read_csv(grid_csv, true, &grid_cols);
  const auto data = read_csv(data_csv, true, nullptr);
  if (grid.empty() || grid[0].size() < 4) throw IoError("grid.csv is empty or malformed");

  double xmin = grid[0][0], xmax = grid[0][0], ymin = grid[0][1], ymax = grid[0][1];
  for (const auto& row : grid) {
    xmin = std::min(xmin, row[0]);
    xmax = std::max(xmax, row[0]);
    ymin = std::min(ymin, row[1]);
    ymax = std::max(ymax, row[1]);
  }
  const int res = int(std::lround(std::sqrt(double(grid.size()))));
  const double width = 640.0;
  const double height = width * (ymax - ymin) / (xmax - xmin);
  auto px = [&](double x) { return (x - xmin) / (xmax - xmin) * width; };
  auto py = [&](double y) { return height - (y - ymin) / (ymax - ymin) * height; };
  const double cw = width / double(res - 1);
  const double ch = height / double(res - 1);

  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='"
      << height << "' viewBox='0 0 " << width << ' ' << height << "'>\n";
  svg.precision(5);
  for (const auto& row : grid) {
    // colour by class-0 probability: orange (class 1) to blue (class 0)
    svg << "<rect x='" << px(row[0]) - cw / 2 << "' y='" << py(row[1]) - ch / 2
        << "' width='" << cw << "' height='" << ch << "' fill='"
        << hex_blend(row[2], 0xf2, 0xa6, 0x5e, 0x6e, 0x9e, 0xeb) << "'/>\n";
  }
  // subsample unlabeled points so the file stays manageable
  const std::size_t stride = std::max<std::size_t>(1, data.size() / 1500);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& row = data[i];
    const bool labeled = row.size() >= 4 && row[3] != 0.0;
    if (!labeled && i % stride != 0) continue;
    const double x = px(row[0]), y = py(row[1]);
    if (labeled) {
      svg << "<path d='M" << x - 5 << ' ' << y << " L" << x + 5 << ' ' << y << " M" << x
          << ' ' << y - 5 << " L" << x << ' ' << y + 5
          << "' stroke='black' stroke-width='2.2'/>\n";
    } else {
      svg << "<circle cx='" << x << "' cy='" << y << "' r='1.8' fill='"
          << (row[2] < 0.5 ? "#1d4fa1" : "#b35a14") << "' fill-opacity='0.75'/>\n";
    }
  }
  svg << "</svg>\n";
  write_text(out_svg, svg.str());
}

void render_similarity_svg(const fs::path& sim_csv, const fs::path& out_svg) {
  const auto sim = read_csv(sim_csv, false, nullptr);
  if (sim.empty()) throw IoError("similarity.csv is empty");
  const int m = int(sim.size());
  const double cell = std::max(2.0, 512.0 / m);
  const double size = cell * m;
  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << size << "' height='"
      << size << "' viewBox='0 0 " << size << ' ' << size << "'>\n";
  svg << "<rect width='" << size << "' height='" << size << "' fill='black'/>\n";
  svg.precision(4);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < int(sim[std::size_t(i)].size()); ++j) {
      const double v = sim[std::size_t(i)][std::size_t(j)];
      if (v < 0.004) continue;  // keep near-black cells implicit
      svg << "<rect x='" << j * cell << "' y='" << i * cell << "' width='" << cell
          << "' height='" << cell << "' fill='"
          << hex_blend(v, 0, 0, 0, 0xff, 0xff, 0xff) << "'/>\n";
    }
  svg << "</svg>\n";
  write_text(out_svg, svg.str());
}

void write_curve_csv(const fs::path& log_csv, const fs::path& out_csv) {
  std::vector<std::string> cols;
  const auto rows = read_csv(log_csv, true, &cols);
  if (rows.empty()) throw IoError("train_log.csv has no rows");
  std::ofstream os(out_csv);
  if (!os) throw IoError("cannot open for writing: " + out_csv.string());
  os << "epoch";
  for (std::size_t c = 2; c < cols.size(); ++c) os << ',' << cols[c];
  os << '\n';
  os.precision(17);
  std::size_t i = 0;
  while (i < rows.size()) {
    const double epoch = rows[i][0];
    std::vector<double> acc(cols.size(), 0.0);
    std::size_t count = 0;
    for (; i < rows.size() && rows[i][0] == epoch; ++i, ++count)
      for (std::size_t c = 2; c < cols.size(); ++c) acc[c] += rows[i][c];
    os << int(epoch);
    for (std::size_t c = 2; c < cols.size(); ++c) os << ',' << acc[c] / double(count);
    os << '\n';
  }
}

void export_seed_plots(const fs::path& dir) {
  const fs::path log = dir / "train_log.csv";
  const fs::path grid = dir / "eval" / "grid.csv";
  const fs::path sim = dir / "eval" / "similarity.csv";
  const fs::path data = dir / "data.csv";
  std::string missing;
  for (const fs::path& p : {log, grid, sim, data})
    if (!fs::exists(p)) missing += (missing.empty() ? "" : ", ") + p.string();
  if (!missing.empty()) throw IoError("missing run artifacts: " + missing);

  fs::create_directories(dir / "plots");
  write_curve_csv(log, dir / "plots" / "curve.csv");
  render_boundary_svg(grid, data, dir / "plots" / "boundary.svg");
  render_similarity_svg(sim, dir / "plots" / "similarity.svg");
}

}  // namespace

void export_plots(const std::string& run_dir) {
  const fs::path dir(run_dir);
  if (!fs::exists(dir)) throw IoError("no such directory: " + run_dir);
  if (fs::exists(dir / "train_log.csv")) {
    export_seed_plots(dir);
    return;
  }
  std::vector<fs::path> seed_dirs;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_directory() && fs::exists(entry.path() / "train_log.csv"))
      seed_dirs.push_back(entry.path());
  if (seed_dirs.empty())
    throw IoError("no run artifacts under " + run_dir +
                  " (expected train_log.csv in it or in seed subdirectories)");
  std::sort(seed_dirs.begin(), seed_dirs.end());
  for (const fs::path& p : seed_dirs) export_seed_plots(p);
}

}  // namespace sesim
