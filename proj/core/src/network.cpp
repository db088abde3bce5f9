#include "sesim/network.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace sesim {

void MlpSpec::validate() const {
  if (widths.size() < 2) throw ParameterError("MlpSpec: need at least one layer");
  for (int w : widths)
    if (w < 1) throw ParameterError("MlpSpec: widths must be positive");
  if (dropout.size() != widths.size() - 2)
    throw ParameterError("MlpSpec: need one dropout rate per hidden activation");
  for (double d : dropout)
    if (d < 0.0 || d >= 1.0) throw ParameterError("MlpSpec: dropout rate must be in [0, 1)");
}

MlpParams init_mlp(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  RngStream rng(seed);
  MlpParams p;
  p.spec = spec;
  for (int i = 0; i < spec.layer_count(); ++i) {
    const int fan_in = spec.widths[std::size_t(i)];
    const int fan_out = spec.widths[std::size_t(i) + 1];
    const double std_dev = std::sqrt(2.0 / double(fan_in));
    Matrix w(fan_in, fan_out);
    for (double& v : w.data) v = std_dev * rng.gaussian();
    p.w.push_back(std::move(w));
    p.b.emplace_back(1, fan_out);  // zeros
  }
  return p;
}

BoundMlp bind_mlp(Tape& tape, const MlpParams& params, bool requires_grad) {
  BoundMlp net;
  net.spec = &params.spec;
  for (std::size_t i = 0; i < params.w.size(); ++i) {
    net.w.push_back(tape.leaf(params.w[i], requires_grad));
    net.b.push_back(tape.leaf(params.b[i], requires_grad));
  }
  return net;
}

MlpForward mlp_forward(Tape& tape, const BoundMlp& net, Var x, bool training,
                       RngStream* dropout_rng) {
  const MlpSpec& spec = *net.spec;
  if (tape.value(x).cols != spec.in_dim())
    throw ShapeError("mlp_forward: input has wrong width");
  Var h = x;
  Var latent = x;
  const int layers = spec.layer_count();
  for (int i = 0; i < layers; ++i) {
    Var pre = add_rowvec(matmul(h, net.w[std::size_t(i)]), net.b[std::size_t(i)]);
    if (i < layers - 1) {
      h = leaky_relu(pre, spec.leaky_slope);
      h = dropout(h, spec.dropout[std::size_t(i)], training, dropout_rng);
      latent = h;
    } else {
      h = spec.softmax_head ? softmax_rows(pre) : pre;
    }
  }
  return MlpForward{h, latent};
}

MlpValueForward mlp_forward_values(const MlpParams& params, const Matrix& x,
                                   bool training, RngStream* dropout_rng) {
  // One throwaway tape keeps this path arithmetically identical to the
  // differentiable one (same op order, same rng consumption) at the cost of
  // a few value copies, which is cheap next to the matmuls.
  Tape tape;
  BoundMlp net = bind_mlp(tape, params, /*requires_grad=*/false);
  MlpForward f = mlp_forward(tape, net, tape.constant(x), training, dropout_rng);
  return MlpValueForward{tape.value(f.output), tape.value(f.latent)};
}

ModelState init_model(const MlpSpec& feature, const MlpSpec& similarity,
                      std::uint64_t seed, double ema_decay) {
  if (ema_decay < 0.0 || ema_decay >= 1.0)
    throw ParameterError("init_model: ema_decay must be in [0, 1)");
  const int latent_width = feature.widths[feature.widths.size() - 2];
  if (similarity.in_dim() != 2 * latent_width)
    throw ParameterError("init_model: similarity input width must be twice the feature latent width");
  ModelState s;
  s.feature = init_mlp(feature, derive_seed(seed, streams::kInitFeature));
  s.similarity = init_mlp(similarity, derive_seed(seed, streams::kInitSimilarity));
  s.similarity_ema = s.similarity;
  s.ema_decay = ema_decay;
  return s;
}

void ema_update(ModelState& state, double decay) {
  if (decay < 0.0 || decay >= 1.0) throw ParameterError("ema_update: decay must be in [0, 1)");
  auto blend = [decay](Matrix& shadow, const Matrix& live) {
    for (std::size_t i = 0; i < shadow.size(); ++i)
      shadow.data[i] = decay * shadow.data[i] + (1.0 - decay) * live.data[i];
  };
  for (std::size_t i = 0; i < state.similarity.w.size(); ++i) {
    blend(state.similarity_ema.w[i], state.similarity.w[i]);
    blend(state.similarity_ema.b[i], state.similarity.b[i]);
  }
}

FeatureEval feature_eval(const ModelState& state, const Matrix& x) {
  MlpValueForward f = mlp_forward_values(state.feature, x, /*training=*/false, nullptr);
  return FeatureEval{std::move(f.latent), std::move(f.output)};
}

Matrix similarity_eval(const ModelState& state, const Matrix& zi, const Matrix& zj,
                       bool use_ema) {
  if (zi.rows != zj.rows || zi.cols != zj.cols)
    throw ShapeError("similarity_eval: latent pair shapes differ");
  const MlpParams& phi = use_ema ? state.similarity_ema : state.similarity;
  return mlp_forward_values(phi, concat_cols(zi, zj), /*training=*/false, nullptr).output;
}

// ---- persistence ----

namespace {

constexpr char kMagic[8] = {'S', 'E', 'S', 'I', 'M', 'B', '0', '1'};

void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void put_f64(std::ostream& os, double v) { os.write(reinterpret_cast<const char*>(&v), 8); }

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 4)) throw IoError("model file truncated");
  return v;
}
double get_f64(std::istream& is) {
  double v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 8)) throw IoError("model file truncated");
  return v;
}

void put_params(std::ostream& os, const MlpParams& p) {
  put_u32(os, std::uint32_t(p.spec.widths.size()));
  for (int w : p.spec.widths) put_u32(os, std::uint32_t(w));
  put_f64(os, p.spec.leaky_slope);
  put_u32(os, std::uint32_t(p.spec.dropout.size()));
  for (double d : p.spec.dropout) put_f64(os, d);
  put_u32(os, p.spec.softmax_head ? 1 : 0);
  for (std::size_t i = 0; i < p.w.size(); ++i) {
    os.write(reinterpret_cast<const char*>(p.w[i].data.data()),
             std::streamsize(p.w[i].size() * sizeof(double)));
    os.write(reinterpret_cast<const char*>(p.b[i].data.data()),
             std::streamsize(p.b[i].size() * sizeof(double)));
  }
}

MlpParams get_params(std::istream& is) {
  MlpParams p;
  const std::uint32_t nw = get_u32(is);
  if (nw < 2 || nw > 64) throw IoError("model file corrupt: width count");
  for (std::uint32_t i = 0; i < nw; ++i) p.spec.widths.push_back(int(get_u32(is)));
  p.spec.leaky_slope = get_f64(is);
  const std::uint32_t nd = get_u32(is);
  for (std::uint32_t i = 0; i < nd; ++i) p.spec.dropout.push_back(get_f64(is));
  p.spec.softmax_head = get_u32(is) != 0;
  p.spec.validate();
  for (int i = 0; i < p.spec.layer_count(); ++i) {
    Matrix w(p.spec.widths[std::size_t(i)], p.spec.widths[std::size_t(i) + 1]);
    if (!is.read(reinterpret_cast<char*>(w.data.data()),
                 std::streamsize(w.size() * sizeof(double))))
      throw IoError("model file truncated");
    Matrix b(1, p.spec.widths[std::size_t(i) + 1]);
    if (!is.read(reinterpret_cast<char*>(b.data.data()),
                 std::streamsize(b.size() * sizeof(double))))
      throw IoError("model file truncated");
    p.w.push_back(std::move(w));
    p.b.push_back(std::move(b));
  }
  return p;
}

}  // namespace

void save_model(const ModelState& state, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os.write(kMagic, sizeof(kMagic));
  put_params(os, state.feature);
  put_params(os, state.similarity);
  put_params(os, state.similarity_ema);
  put_f64(os, state.ema_decay);
  if (!os) throw IoError("write failed: " + path);
}

ModelState load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw IoError("not a model file (bad magic): " + path);
  ModelState s;
  s.feature = get_params(is);
  s.similarity = get_params(is);
  s.similarity_ema = get_params(is);
  s.ema_decay = get_f64(is);
  return s;
}

MlpSpec toy_feature_spec(int in_dim, int hidden, int classes, double slope) {
  MlpSpec spec;
  spec.widths = {in_dim, hidden, classes};
  spec.leaky_slope = slope;
  spec.dropout = {0.0};
  spec.softmax_head = true;
  return spec;
}

MlpSpec toy_similarity_spec(int latent_dim, const std::vector<int>& hidden,
                            double dropout_rate) {
  if (hidden.empty()) throw ParameterError("toy_similarity_spec: need at least one hidden layer");
  MlpSpec spec;
  spec.widths.push_back(2 * latent_dim);
  for (int h : hidden) spec.widths.push_back(h);
  spec.widths.push_back(2);
  spec.leaky_slope = 0.1;
  // dropout after every hidden activation except the final one
  spec.dropout.assign(hidden.size(), dropout_rate);
  spec.dropout.back() = 0.0;
  spec.softmax_head = true;
  return spec;
}

}  // namespace sesim
