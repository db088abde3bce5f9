#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sesim/matrix.hpp"
#include "sesim/rng.hpp"

namespace sesim {

/// A labelled point cloud plus the (small) subset of indices whose labels
/// the trainer is allowed to see. All other labels exist only for
/// evaluation.
struct Dataset {
  Matrix x;                       // n x d
  std::vector<int> y;             // class id per row
  std::vector<int> labeled_idx;   // sorted, subset of [0, n)
  int classes = 2;
  std::string name;

  int n() const { return x.rows; }
  int dim() const { return x.cols; }
  int labeled_count() const { return int(labeled_idx.size()); }
};

/// Two interleaved half-circles: class 0 on (cos t, sin t) and class 1 on
/// (1 - cos t, 0.5 - sin t), t uniform in [0, pi], isotropic gaussian noise
/// of the given sigma on both coordinates. First ceil(n/2) rows are class 0.
Dataset make_two_moons(int n, double sigma, std::uint64_t seed);

/// Two concentric circles: class 0 at radius 1.0, class 1 at radius 0.5,
/// angle uniform in [0, 2*pi), same noise model as the moons.
Dataset make_two_circles(int n, double sigma, std::uint64_t seed);

/// By-name dispatch ("two_moons" | "two_circles").
Dataset make_dataset(const std::string& name, int n, double sigma, std::uint64_t seed);

/// Mark l points as labeled, balanced across classes (l must be divisible by
/// the class count and each class must have enough points).
Dataset select_labeled(Dataset ds, int l, std::uint64_t seed);

/// x + sigma * N(0, 1), drawn entrywise in row-major order.
Matrix augment(const Matrix& x, double sigma, RngStream& rng);

/// n x classes one-hot matrix.
Matrix one_hot(const std::vector<int>& labels, int classes);

/// Columns: coordinates, label, labeled flag. Header row included.
void write_dataset_csv(const Dataset& ds, std::ostream& os);

}  // namespace sesim
