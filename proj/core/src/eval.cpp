#include "sesim/eval.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

namespace sesim {

std::vector<int> argmax_rows(const Matrix& m) {
  std::vector<int> out(std::size_t(m.rows), 0);
  for (int i = 0; i < m.rows; ++i) {
    int best = 0;
    for (int j = 1; j < m.cols; ++j)
      if (m(i, j) > m(i, best)) best = j;
    out[std::size_t(i)] = best;
  }
  return out;
}

double error_rate(const ModelState& state, const Dataset& ds_test) {
  if (ds_test.n() == 0) throw ContractError("error_rate: empty test set");
  const std::vector<int> pred = argmax_rows(feature_eval(state, ds_test.x).f);
  int wrong = 0;
  for (int i = 0; i < ds_test.n(); ++i)
    if (pred[std::size_t(i)] != ds_test.y[std::size_t(i)]) ++wrong;
  return 100.0 * double(wrong) / double(ds_test.n());
}

namespace {

// Sort the sample subset by (class, index) and gather labels; shared by the
// learned and pseudo-label matrices so both use the same ordering.
void order_by_class(const Dataset& ds, std::vector<int>& idx, std::vector<int>& labels) {
  for (int i : idx)
    if (i < 0 || i >= ds.n()) throw IndexError("similarity_matrix: sample index out of range");
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    const int ca = ds.y[std::size_t(a)], cb = ds.y[std::size_t(b)];
    return ca != cb ? ca < cb : a < b;
  });
  labels.clear();
  labels.reserve(idx.size());
  for (int i : idx) labels.push_back(ds.y[std::size_t(i)]);
}

}  // namespace

SimilarityMatrix similarity_matrix(const ModelState& state, const Dataset& ds,
                                   std::vector<int> sample_idx) {
  if (sample_idx.empty()) throw ParameterError("similarity_matrix: empty sample set");
  SimilarityMatrix sm;
  sm.indices = std::move(sample_idx);
  order_by_class(ds, sm.indices, sm.labels);

  const int m = int(sm.indices.size());
  const Matrix z = feature_eval(state, take_rows(ds.x, sm.indices)).z;
  sm.s = Matrix(m, m);
  Matrix zi(m, z.cols);
  for (int i = 0; i < m; ++i) {
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < z.cols; ++c) zi(r, c) = z(i, c);
    const Matrix p = similarity_eval(state, zi, z, /*use_ema=*/false);
    for (int j = 0; j < m; ++j) sm.s(i, j) = p(j, 0);
  }
  return sm;
}

SimilarityMatrix pseudo_label_matrix(const ModelState& state, const Dataset& ds,
                                     std::vector<int> sample_idx) {
  if (sample_idx.empty()) throw ParameterError("pseudo_label_matrix: empty sample set");
  SimilarityMatrix sm;
  sm.indices = std::move(sample_idx);
  order_by_class(ds, sm.indices, sm.labels);

  const int m = int(sm.indices.size());
  const std::vector<int> pred =
      argmax_rows(feature_eval(state, take_rows(ds.x, sm.indices)).f);
  sm.s = Matrix(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      sm.s(i, j) = pred[std::size_t(i)] == pred[std::size_t(j)] ? 1.0 : 0.0;
  return sm;
}

double mse_vs_ideal(const SimilarityMatrix& sm) {
  const int m = sm.s.rows;
  if (m == 0 || int(sm.labels.size()) != m)
    throw ContractError("mse_vs_ideal: labels missing");
  double acc = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const double ideal =
          sm.labels[std::size_t(i)] == sm.labels[std::size_t(j)] ? 1.0 : 0.0;
      const double d = sm.s(i, j) - ideal;
      acc += d * d;
    }
  return acc / (double(m) * double(m));
}

QueryResult knn_query(const ModelState& state, const Dataset& ds, int target, int k,
                      QueryMeasure measure, double beta) {
  if (target < 0 || target >= ds.n()) throw IndexError("knn_query: target out of range");
  if (k < 1 || k >= ds.n()) throw ParameterError("knn_query: need 1 <= k < n");

  std::vector<double> score(std::size_t(ds.n()), 0.0);
  if (measure == QueryMeasure::learned) {
    const Matrix z = feature_eval(state, ds.x).z;
    Matrix zt(ds.n(), z.cols);
    for (int r = 0; r < ds.n(); ++r)
      for (int c = 0; c < z.cols; ++c) zt(r, c) = z(target, c);
    const Matrix p = similarity_eval(state, zt, z, /*use_ema=*/false);
    for (int j = 0; j < ds.n(); ++j) score[std::size_t(j)] = p(j, 0);
  } else {
    if (beta <= 0.0) throw ParameterError("knn_query: beta must be > 0");
    for (int j = 0; j < ds.n(); ++j) {
      double d = 0.0;
      for (int c = 0; c < ds.dim(); ++c) {
        const double diff = ds.x(target, c) - ds.x(j, c);
        d += diff * diff;
      }
      score[std::size_t(j)] = std::exp(-beta * d);
    }
  }

  std::vector<int> order;
  order.reserve(std::size_t(ds.n()) - 1);
  for (int j = 0; j < ds.n(); ++j)
    if (j != target) order.push_back(j);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double sa = score[std::size_t(a)], sb = score[std::size_t(b)];
    return sa != sb ? sa > sb : a < b;
  });

  QueryResult q;
  q.target = target;
  for (int i = 0; i < k; ++i)
    q.neighbors.push_back(Neighbor{order[std::size_t(i)], score[std::size_t(order[std::size_t(i)])]});
  return q;
}

Matrix decision_grid(const ModelState& state, const Rect& bounds, int resolution) {
  if (state.feature.spec.in_dim() != 2)
    throw ContractError("decision_grid: model does not take 2-d inputs");
  if (resolution < 2) throw ParameterError("decision_grid: resolution must be >= 2");
  if (bounds.xmax <= bounds.xmin || bounds.ymax <= bounds.ymin)
    throw ParameterError("decision_grid: degenerate bounds");

  const int cells = resolution * resolution;
  Matrix points(cells, 2);
  int r = 0;
  for (int iy = 0; iy < resolution; ++iy) {
    const double y = bounds.ymin +
                     (bounds.ymax - bounds.ymin) * double(iy) / double(resolution - 1);
    for (int ix = 0; ix < resolution; ++ix, ++r) {
      points(r, 0) = bounds.xmin +
                     (bounds.xmax - bounds.xmin) * double(ix) / double(resolution - 1);
      points(r, 1) = y;
    }
  }
  const Matrix f = feature_eval(state, points).f;
  Matrix grid(cells, 2 + f.cols);
  for (int i = 0; i < cells; ++i) {
    grid(i, 0) = points(i, 0);
    grid(i, 1) = points(i, 1);
    for (int j = 0; j < f.cols; ++j) grid(i, 2 + j) = f(i, j);
  }
  return grid;
}

void write_similarity_csv(const SimilarityMatrix& sm, std::ostream& os) {
  os.precision(17);
  for (int i = 0; i < sm.s.rows; ++i) {
    for (int j = 0; j < sm.s.cols; ++j) {
      if (j) os << ',';
      os << sm.s(i, j);
    }
    os << '\n';
  }
}

void write_similarity_meta_json(const SimilarityMatrix& sm, std::ostream& os) {
  nlohmann::ordered_json meta;
  meta["size"] = sm.s.rows;
  meta["indices"] = sm.indices;
  meta["labels"] = sm.labels;
  os << meta.dump(2) << '\n';
}

void write_grid_csv(const Matrix& grid, std::ostream& os) {
  os << "x,y";
  for (int j = 2; j < grid.cols; ++j) os << ",p" << (j - 2);
  os << '\n';
  os.precision(17);
  for (int i = 0; i < grid.rows; ++i) {
    for (int j = 0; j < grid.cols; ++j) {
      if (j) os << ',';
      os << grid(i, j);
    }
    os << '\n';
  }
}

void write_queries_json(const std::vector<QueryResult>& queries, const Dataset& ds,
                        std::ostream& os) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const QueryResult& q : queries) {
    nlohmann::ordered_json neighbors = nlohmann::ordered_json::array();
    for (const Neighbor& nb : q.neighbors)
      neighbors.push_back({{"index", nb.index},
                           {"score", nb.score},
                           {"label", ds.y[std::size_t(nb.index)]}});
    arr.push_back({{"target", q.target},
                   {"target_label", ds.y[std::size_t(q.target)]},
                   {"neighbors", neighbors}});
  }
  os << arr.dump(2) << '\n';
}

}  // namespace sesim
