#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sesim/autodiff.hpp"
#include "sesim/matrix.hpp"
#include "sesim/rng.hpp"

namespace sesim {

/// Layer widths plus activation/regularisation knobs for a plain MLP.
/// widths = {in, h1, ..., out}; dropout has one rate per hidden activation
/// (widths.size() - 2 entries) and is applied after the activation.
struct MlpSpec {
  std::vector<int> widths;
  double leaky_slope = 0.1;
  std::vector<double> dropout;
  bool softmax_head = true;

  int layer_count() const { return int(widths.size()) - 1; }
  int in_dim() const { return widths.front(); }
  int out_dim() const { return widths.back(); }
  void validate() const;  // throws ParameterError
};

/// Concrete weights for an MlpSpec. w[i] is widths[i] x widths[i+1],
/// b[i] is 1 x widths[i+1].
struct MlpParams {
  MlpSpec spec;
  std::vector<Matrix> w;
  std::vector<Matrix> b;
};

/// He-normal init: entries ~ N(0, 2 / fan_in), biases zero.
MlpParams init_mlp(const MlpSpec& spec, std::uint64_t seed);

/// Parameters registered on a tape, in layer order.
struct BoundMlp {
  const MlpSpec* spec = nullptr;
  std::vector<Var> w;
  std::vector<Var> b;
};
BoundMlp bind_mlp(Tape& tape, const MlpParams& params, bool requires_grad);

/// Differentiable forward pass. latent is the input to the final linear
/// layer (the last hidden activation, after dropout), or x itself for a
/// single-layer net.
struct MlpForward {
  Var output;
  Var latent;
};
MlpForward mlp_forward(Tape& tape, const BoundMlp& net, Var x, bool training,
                       RngStream* dropout_rng);

/// Plain-value forward pass with the exact same arithmetic and rng
/// consumption as the tape path; used for evaluation and for the no-gradient
/// teacher side of training.
struct MlpValueForward {
  Matrix output;
  Matrix latent;
};
MlpValueForward mlp_forward_values(const MlpParams& params, const Matrix& x,
                                   bool training, RngStream* dropout_rng);

/// The trainable state of the method: feature network f, pairwise similarity
/// network phi, and phi's exponential-moving-average shadow used as the
/// consistency teacher.
struct ModelState {
  MlpParams feature;
  MlpParams similarity;
  MlpParams similarity_ema;
  double ema_decay = 0.99;
};

/// Initialises f and phi from per-network substreams of `seed` and starts
/// the shadow as an exact copy of phi.
ModelState init_model(const MlpSpec& feature, const MlpSpec& similarity,
                      std::uint64_t seed, double ema_decay);

/// shadow = decay * shadow + (1 - decay) * live, elementwise.
void ema_update(ModelState& state, double decay);

/// Eval-mode forward of the feature net: latent z and class posterior f.
struct FeatureEval {
  Matrix z;
  Matrix f;
};
FeatureEval feature_eval(const ModelState& state, const Matrix& x);

/// Eval-mode similarity for row-aligned latent pairs; column 0 is the
/// predicted same-class probability. use_ema selects the shadow weights.
Matrix similarity_eval(const ModelState& state, const Matrix& zi, const Matrix& zj,
                       bool use_ema);

/// Versioned little-endian binary snapshot; round-trips bit-exactly.
void save_model(const ModelState& state, const std::string& path);
ModelState load_model(const std::string& path);

/// Reference architectures for the 2-d point-cloud experiments.
MlpSpec toy_feature_spec(int in_dim, int hidden, int classes, double slope = 0.1);
MlpSpec toy_similarity_spec(int latent_dim, const std::vector<int>& hidden,
                            double dropout_rate);

}  // namespace sesim
