#pragma once

#include <vector>

#include "sesim/dataset.hpp"
#include "sesim/matrix.hpp"
#include "sesim/rng.hpp"

namespace sesim {

/// Sizes of the three pair blocks drawn per step. The split block reuses the
/// augmentation block's samples, so its size is pinned to b1 / 2.
struct BatchSpec {
  int b1 = 100;  // samples paired with their own augmentation
  int b2 = 10;   // labeled pairs (two independent draws, paired positionally)

  int b3() const { return b1 / 2; }
  void validate() const;  // throws ParameterError
};

/// One block of row-aligned pairs. a/b feed the live networks; a_shadow and
/// b_shadow are freshly-perturbed copies of the same points for the
/// no-gradient teacher side. targets is a pair-level one-hot
/// [same-class, different-class] matrix, empty for the split block where no
/// target exists.
struct PairBlock {
  Matrix a, b;
  Matrix a_shadow, b_shadow;
  Matrix targets;
  std::vector<int> labels_a, labels_b;

  int pairs() const { return a.rows; }
};

/// The composite batch consumed by one optimisation step:
///  - aug_pairs: b1 dataset points, each paired with an augmented copy.
///  - labeled_pairs: b2 positional pairs of labeled points, targets from
///    label agreement.
///  - split_pairs: the b1 clean points of aug_pairs shuffled and halved into
///    b1/2 pairs; the trainer scores these with the live similarity net.
struct TrainingBatch {
  PairBlock aug_pairs;
  PairBlock labeled_pairs;
  PairBlock split_pairs;
};

/// Draws TrainingBatches from a dataset. The augmentation block walks a
/// shuffled permutation of the whole dataset (reshuffled when exhausted), so
/// every point is visited once per pass; the labeled block samples
/// uniformly. All randomness (index draws, perturbations, the split
/// shuffle) comes from the stream passed to next(), in a fixed order, so a
/// run is reproducible from the stream's seed alone.
class BatchBuilder {
 public:
  BatchBuilder(const Dataset& ds, BatchSpec spec, double aug_sigma);

  TrainingBatch next(RngStream& rng);

  /// Steps that visit the whole dataset about once: ceil(n / b1).
  int steps_per_epoch() const;

 private:
  std::vector<int> draw_from_permutation(int k, RngStream& rng);

  const Dataset* ds_;
  BatchSpec spec_;
  double aug_sigma_;
  std::vector<int> perm_;
  std::size_t cursor_;
};

}  // namespace sesim
