#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "sesim/batching.hpp"
#include "sesim/dataset.hpp"
#include "sesim/losses.hpp"
#include "sesim/network.hpp"

namespace sesim {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Epoch counts of the warm-up schedules. Epochs are 1-based (the first
/// training epoch is epoch 1).
struct RampConfig {
  int lambda13_rampup_epochs = 80;  // lambda1 and lambda3 warm up together
  int lambda2_zero_until = 100;     // lambda2 is exactly 0 for epochs 1..this
  int lambda2_rampup_epochs = 50;
  int lr_rampup_epochs = 80;
};

struct TrainConfig {
  double beta = 3.0;
  double k1 = 3.0;  // lambda1 peak = k1 * labeled / n
  double k2 = 3.0;  // lambda2 peak = k2 * labeled / n
  double lambda3_max = 0.15;
  int epochs = 200;
  double lr_max = 3e-3;
  AdamConfig adam;
  double ema_decay = 0.99;
  RampConfig ramp;
  BatchSpec batch;
  double aug_sigma = 0.05;
  std::uint64_t seed = 0;

  // architecture knobs (input/output widths come from the dataset)
  int feature_hidden = 100;
  double feature_leaky_slope = 0.1;
  std::vector<int> similarity_hidden = {512, 128, 64};
  double similarity_dropout = 0.2;

  void validate() const;  // throws ParameterError
};

MlpSpec feature_spec_from(const TrainConfig& cfg, const Dataset& ds);
MlpSpec similarity_spec_from(const TrainConfig& cfg);

/// Warm-up weight: 0 for epoch <= delay, then max_val * exp(-5 * (1 - t)^2)
/// with t = min(1, (epoch - delay) / ramp_epochs). Exactly max_val once
/// epoch >= delay + ramp_epochs.
double rampup(int epoch, double max_val, int ramp_epochs, int delay);

/// The loss weights in force during the given (1-based) epoch.
LossWeights effective_weights(const TrainConfig& cfg, const Dataset& ds, int epoch);
double effective_lr(const TrainConfig& cfg, int epoch);

/// One bias-corrected Adam update. t is the 1-based update count; m and v
/// are this parameter's moment buffers (same shape as p).
void adam_step(Matrix& p, const Matrix& g, Matrix& m, Matrix& v, double lr,
               const AdamConfig& cfg, long t);

/// Adam over a fixed list of parameter matrices.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(AdamConfig cfg) : cfg_(cfg) {}

  /// params and grads are aligned; shapes must stay stable across calls.
  void step(const std::vector<Matrix*>& params,
            const std::vector<const Matrix*>& grads, double lr);

  long updates() const { return t_; }

 private:
  AdamConfig cfg_;
  long t_ = 0;
  std::vector<Matrix> m_, v_;
};

struct TrainLogRow {
  int epoch = 0;
  int step = 0;
  LossBreakdown loss;
  double lr = 0.0;
};

struct TrainLog {
  std::vector<TrainLogRow> rows;
  int steps_per_epoch = 0;

  /// One row per step, full precision; identical configs yield identical
  /// bytes.
  void write_csv(std::ostream& os) const;
  /// Per-epoch means of every loss component as a JSON array.
  void write_epoch_json(std::ostream& os) const;
};

struct TrainResult {
  ModelState state;
  TrainLog log;
};

/// The full optimisation loop: per step, draw a composite batch, evaluate
/// the combined objective under the epoch's ramped weights, backpropagate,
/// apply one Adam update over both networks jointly, then advance the
/// teacher's EMA. Deterministic given cfg.seed.
TrainResult train(const Dataset& ds, const TrainConfig& cfg);

}  // namespace sesim
