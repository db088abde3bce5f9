#include "sesim/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

namespace sesim {

namespace {

// Per sample: parameter draw first, then x noise, then y noise, so the
// sequence is reproducible independent of how callers batch things.
Dataset make_two_class(const std::string& name, int n, double sigma,
                       std::uint64_t seed,
                       void (*point)(double t, int cls, double* x, double* y),
                       double t_max) {
  if (n < 2) throw ParameterError(name + ": need at least 2 samples");
  if (sigma < 0.0) throw ParameterError(name + ": sigma must be >= 0");
  RngStream rng(seed);
  Dataset ds;
  ds.name = name;
  ds.classes = 2;
  ds.x = Matrix(n, 2);
  ds.y.resize(std::size_t(n));
  const int n0 = (n + 1) / 2;
  for (int i = 0; i < n; ++i) {
    const int cls = i < n0 ? 0 : 1;
    const double t = rng.uniform() * t_max;
    double px = 0.0, py = 0.0;
    point(t, cls, &px, &py);
    ds.x(i, 0) = px + sigma * rng.gaussian();
    ds.x(i, 1) = py + sigma * rng.gaussian();
    ds.y[std::size_t(i)] = cls;
  }
  return ds;
}

void moons_point(double t, int cls, double* x, double* y) {
  if (cls == 0) {
    *x = std::cos(t);
    *y = std::sin(t);
  } else {
    *x = 1.0 - std::cos(t);
    *y = 0.5 - std::sin(t);
  }
}

void circles_point(double t, int cls, double* x, double* y) {
  const double r = cls == 0 ? 1.0 : 0.5;
  *x = r * std::cos(t);
  *y = r * std::sin(t);
}

}  // namespace

Dataset make_two_moons(int n, double sigma, std::uint64_t seed) {
  return make_two_class("two_moons", n, sigma, seed, moons_point, std::numbers::pi);
}

Dataset make_two_circles(int n, double sigma, std::uint64_t seed) {
  return make_two_class("two_circles", n, sigma, seed, circles_point,
                        2.0 * std::numbers::pi);
}

Dataset make_dataset(const std::string& name, int n, double sigma, std::uint64_t seed) {
  if (name == "two_moons") return make_two_moons(n, sigma, seed);
  if (name == "two_circles") return make_two_circles(n, sigma, seed);
  throw ParameterError("unknown dataset: " + name);
}

Dataset select_labeled(Dataset ds, int l, std::uint64_t seed) {
  if (l <= 0 || l % ds.classes != 0)
    throw ParameterError("select_labeled: label budget must be a positive multiple of the class count");
  const int per_class = l / ds.classes;
  RngStream rng(seed);
  ds.labeled_idx.clear();
  for (int c = 0; c < ds.classes; ++c) {
    std::vector<int> members;
    for (int i = 0; i < ds.n(); ++i)
      if (ds.y[std::size_t(i)] == c) members.push_back(i);
    if (int(members.size()) < per_class)
      throw ParameterError("select_labeled: class " + std::to_string(c) +
                           " has fewer than " + std::to_string(per_class) + " points");
    for (int pick : rng.sample_without_replacement(int(members.size()), per_class))
      ds.labeled_idx.push_back(members[std::size_t(pick)]);
  }
  std::sort(ds.labeled_idx.begin(), ds.labeled_idx.end());
  return ds;
}

Matrix augment(const Matrix& x, double sigma, RngStream& rng) {
  if (sigma < 0.0) throw ParameterError("augment: sigma must be >= 0");
  Matrix out = x;
  for (double& v : out.data) v += sigma * rng.gaussian();
  return out;
}

Matrix one_hot(const std::vector<int>& labels, int classes) {
  Matrix out(int(labels.size()), classes);
  for (int i = 0; i < out.rows; ++i) {
    const int c = labels[std::size_t(i)];
    if (c < 0 || c >= classes) throw IndexError("one_hot: label out of range");
    out(i, c) = 1.0;
  }
  return out;
}

void write_dataset_csv(const Dataset& ds, std::ostream& os) {
  std::vector<char> labeled(std::size_t(ds.n()), 0);
  for (int i : ds.labeled_idx) labeled[std::size_t(i)] = 1;
  for (int j = 0; j < ds.dim(); ++j) os << "x" << j << ",";
  os << "label,labeled\n";
  os.precision(17);
  for (int i = 0; i < ds.n(); ++i) {
    for (int j = 0; j < ds.dim(); ++j) os << ds.x(i, j) << ",";
    os << ds.y[std::size_t(i)] << "," << int(labeled[std::size_t(i)]) << "\n";
  }
}

}  // namespace sesim
