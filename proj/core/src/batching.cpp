#include "sesim/batching.hpp"

#include <numeric>
#include <string>

namespace sesim {

void BatchSpec::validate() const {
  if (b1 < 2 || b1 % 2 != 0)
    throw ParameterError("BatchSpec: b1 must be even and >= 2 (the split block halves it)");
  if (b2 < 1) throw ParameterError("BatchSpec: b2 must be >= 1");
}

BatchBuilder::BatchBuilder(const Dataset& ds, BatchSpec spec, double aug_sigma)
    : ds_(&ds), spec_(spec), aug_sigma_(aug_sigma) {
  spec_.validate();
  if (aug_sigma < 0.0) throw ParameterError("BatchBuilder: aug_sigma must be >= 0");
  if (ds.n() < spec.b1)
    throw ParameterError("BatchBuilder: dataset smaller than b1");
  if (ds.labeled_count() < spec.b2)
    throw ParameterError("BatchBuilder: fewer labeled points than b2");
  perm_.resize(std::size_t(ds.n()));
  std::iota(perm_.begin(), perm_.end(), 0);
  cursor_ = perm_.size();  // force a shuffle on first draw
}

int BatchBuilder::steps_per_epoch() const {
  return (ds_->n() + spec_.b1 - 1) / spec_.b1;
}

std::vector<int> BatchBuilder::draw_from_permutation(int k, RngStream& rng) {
  std::vector<int> out;
  out.reserve(std::size_t(k));
  while (int(out.size()) < k) {
    if (cursor_ == perm_.size()) {
      rng.shuffle(perm_);
      cursor_ = 0;
    }
    out.push_back(perm_[cursor_++]);
  }
  return out;
}

TrainingBatch BatchBuilder::next(RngStream& rng) {
  const Dataset& ds = *ds_;
  TrainingBatch batch;

  // Block 1: permutation walk, pair each point with an augmented copy.
  const std::vector<int> idx1 = draw_from_permutation(spec_.b1, rng);
  PairBlock& aug = batch.aug_pairs;
  aug.a = take_rows(ds.x, idx1);
  aug.b = augment(aug.a, aug_sigma_, rng);
  aug.a_shadow = augment(aug.a, aug_sigma_, rng);
  aug.b_shadow = augment(aug.b, aug_sigma_, rng);
  aug.targets = Matrix(spec_.b1, 2);
  for (int i = 0; i < spec_.b1; ++i) aug.targets(i, 0) = 1.0;  // always same point

  // Block 2: two independent draws from the labeled pool, paired by position.
  PairBlock& lab = batch.labeled_pairs;
  const int l = ds.labeled_count();
  auto pick_labeled = [&](std::vector<int>& labels) {
    std::vector<int> rows = rng.sample_without_replacement(l, spec_.b2);
    for (int& r : rows) r = ds.labeled_idx[std::size_t(r)];
    labels.reserve(rows.size());
    for (int r : rows) labels.push_back(ds.y[std::size_t(r)]);
    return take_rows(ds.x, rows);
  };
  lab.a = pick_labeled(lab.labels_a);
  lab.b = pick_labeled(lab.labels_b);
  lab.a_shadow = augment(lab.a, aug_sigma_, rng);
  lab.b_shadow = augment(lab.b, aug_sigma_, rng);
  lab.targets = Matrix(spec_.b2, 2);
  for (int i = 0; i < spec_.b2; ++i) {
    const bool same = lab.labels_a[std::size_t(i)] == lab.labels_b[std::size_t(i)];
    lab.targets(i, same ? 0 : 1) = 1.0;
  }

  // Block 3: shuffle block 1's clean points and halve them into pairs whose
  // similarity the trainer estimates with the live network.
  PairBlock& split = batch.split_pairs;
  std::vector<int> order(std::size_t(spec_.b1));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  const int half = spec_.b3();
  std::vector<int> first(order.begin(), order.begin() + half);
  std::vector<int> second(order.begin() + half, order.end());
  split.a = take_rows(aug.a, first);
  split.b = take_rows(aug.a, second);
  split.a_shadow = augment(split.a, aug_sigma_, rng);
  split.b_shadow = augment(split.b, aug_sigma_, rng);

  return batch;
}

}  // namespace sesim
