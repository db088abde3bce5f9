#include "sesim/trainer.hpp"

#include <json.hpp>

#include <cmath>
#include <ostream>
#include <string>

namespace sesim {

void TrainConfig::validate() const {
  if (beta <= 0.0) throw ParameterError("TrainConfig: beta must be > 0");
  if (k1 < 0.0 || k2 < 0.0 || lambda3_max < 0.0)
    throw ParameterError("TrainConfig: regularisation coefficients must be >= 0");
  if (epochs < 0) throw ParameterError("TrainConfig: epochs must be >= 0");
  if (lr_max <= 0.0) throw ParameterError("TrainConfig: lr_max must be > 0");
  if (ema_decay < 0.0 || ema_decay >= 1.0)
    throw ParameterError("TrainConfig: ema_decay must be in [0, 1)");
  if (ramp.lambda13_rampup_epochs <= 0 || ramp.lambda2_rampup_epochs <= 0 ||
      ramp.lr_rampup_epochs <= 0 || ramp.lambda2_zero_until < 0)
    throw ParameterError("TrainConfig: ramp epochs must be positive");
  if (aug_sigma < 0.0) throw ParameterError("TrainConfig: aug_sigma must be >= 0");
  if (feature_hidden < 1) throw ParameterError("TrainConfig: feature_hidden must be >= 1");
  if (similarity_dropout < 0.0 || similarity_dropout >= 1.0)
    throw ParameterError("TrainConfig: similarity_dropout must be in [0, 1)");
  batch.validate();
}

MlpSpec feature_spec_from(const TrainConfig& cfg, const Dataset& ds) {
  return toy_feature_spec(ds.dim(), cfg.feature_hidden, ds.classes,
                          cfg.feature_leaky_slope);
}

MlpSpec similarity_spec_from(const TrainConfig& cfg) {
  return toy_similarity_spec(cfg.feature_hidden, cfg.similarity_hidden,
                             cfg.similarity_dropout);
}

double rampup(int epoch, double max_val, int ramp_epochs, int delay) {
  if (ramp_epochs <= 0) throw ParameterError("rampup: ramp_epochs must be > 0");
  if (epoch <= delay) return 0.0;
  const double t = std::min(1.0, double(epoch - delay) / double(ramp_epochs));
  return max_val * std::exp(-5.0 * (1.0 - t) * (1.0 - t));
}

LossWeights effective_weights(const TrainConfig& cfg, const Dataset& ds, int epoch) {
  const double ratio = double(ds.labeled_count()) / double(ds.n());
  LossWeights w;
  w.beta = cfg.beta;
  w.lambda1 = rampup(epoch, cfg.k1 * ratio, cfg.ramp.lambda13_rampup_epochs, 0);
  w.lambda2 = rampup(epoch, cfg.k2 * ratio, cfg.ramp.lambda2_rampup_epochs,
                     cfg.ramp.lambda2_zero_until);
  w.lambda3 = rampup(epoch, cfg.lambda3_max, cfg.ramp.lambda13_rampup_epochs, 0);
  return w;
}

double effective_lr(const TrainConfig& cfg, int epoch) {
  return rampup(epoch, cfg.lr_max, cfg.ramp.lr_rampup_epochs, 0);
}

void adam_step(Matrix& p, const Matrix& g, Matrix& m, Matrix& v, double lr,
               const AdamConfig& cfg, long t) {
  if (!p.same_shape(g) || !p.same_shape(m) || !p.same_shape(v))
    throw ShapeError("adam_step: parameter/gradient/moment shapes differ");
  if (t < 1) throw ContractError("adam_step: update count must be >= 1");
  const double bc1 = 1.0 - std::pow(cfg.beta1, double(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, double(t));
  for (std::size_t i = 0; i < p.size(); ++i) {
    m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * g.data[i];
    v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * g.data[i] * g.data[i];
    const double m_hat = m.data[i] / bc1;
    const double v_hat = v.data[i] / bc2;
    p.data[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

void AdamOptimizer::step(const std::vector<Matrix*>& params,
                         const std::vector<const Matrix*>& grads, double lr) {
  if (params.size() != grads.size())
    throw ContractError("AdamOptimizer: params/grads count mismatch");
  if (m_.empty()) {
    for (const Matrix* p : params) {
      m_.emplace_back(p->rows, p->cols);
      v_.emplace_back(p->rows, p->cols);
    }
  }
  if (m_.size() != params.size())
    throw ContractError("AdamOptimizer: parameter set changed between steps");
  ++t_;
  for (std::size_t i = 0; i < params.size(); ++i)
    adam_step(*params[i], *grads[i], m_[i], v_[i], lr, cfg_, t_);
}

namespace {

const char* first_non_finite(const LossBreakdown& parts) {
  if (!std::isfinite(parts.sup_f)) return "sup_f";
  if (!std::isfinite(parts.sup_w)) return "sup_w";
  if (!std::isfinite(parts.unsup_pinned)) return "unsup_pinned";
  if (!std::isfinite(parts.unsup_estimated)) return "unsup_estimated";
  if (!std::isfinite(parts.consistency)) return "consistency";
  if (!std::isfinite(parts.total)) return "total";
  return nullptr;
}

}  // namespace

TrainResult train(const Dataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  if (ds.labeled_count() == 0)
    throw ParameterError("train: dataset has no labeled subset");

  ModelState state = init_model(feature_spec_from(cfg, ds), similarity_spec_from(cfg),
                                cfg.seed, cfg.ema_decay);
  BatchBuilder builder(ds, cfg.batch, cfg.aug_sigma);

  RngStream batch_rng(derive_seed(cfg.seed, streams::kBatch));
  RngStream feature_dropout(derive_seed(cfg.seed, streams::kFeatureDropout));
  RngStream similarity_dropout(derive_seed(cfg.seed, streams::kSimilarityDropout));
  RngStream shadow_dropout(derive_seed(cfg.seed, streams::kShadowDropout));

  // One optimizer over both networks; order fixed as (feature, similarity)
  // with per-layer (w, b) interleaving.
  std::vector<Matrix*> params;
  for (std::size_t i = 0; i < state.feature.w.size(); ++i) {
    params.push_back(&state.feature.w[i]);
    params.push_back(&state.feature.b[i]);
  }
  for (std::size_t i = 0; i < state.similarity.w.size(); ++i) {
    params.push_back(&state.similarity.w[i]);
    params.push_back(&state.similarity.b[i]);
  }
  AdamOptimizer opt(cfg.adam);

  TrainLog log;
  log.steps_per_epoch = builder.steps_per_epoch();
  log.rows.reserve(std::size_t(cfg.epochs) * std::size_t(log.steps_per_epoch));

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const LossWeights weights = effective_weights(cfg, ds, epoch);
    const double lr = effective_lr(cfg, epoch);
    for (int step = 1; step <= log.steps_per_epoch; ++step) {
      TrainingBatch batch = builder.next(batch_rng);
      ShadowOutputs shadow =
          compute_shadow(state, batch, /*training=*/true, &shadow_dropout);
      Tape tape;
      StepGraph g = build_step_graph(tape, state, batch, weights, /*training=*/true,
                                     &feature_dropout, &similarity_dropout, shadow);
      if (const char* bad = first_non_finite(g.parts))
        throw NumericalError("train: non-finite " + std::string(bad) + " at epoch " +
                             std::to_string(epoch) + " step " + std::to_string(step));
      tape.backward(g.total);

      std::vector<const Matrix*> grads;
      grads.reserve(params.size());
      for (std::size_t i = 0; i < g.feature.w.size(); ++i) {
        grads.push_back(&tape.grad(g.feature.w[i]));
        grads.push_back(&tape.grad(g.feature.b[i]));
      }
      for (std::size_t i = 0; i < g.similarity.w.size(); ++i) {
        grads.push_back(&tape.grad(g.similarity.w[i]));
        grads.push_back(&tape.grad(g.similarity.b[i]));
      }
      opt.step(params, grads, lr);
      ema_update(state, cfg.ema_decay);

      log.rows.push_back(TrainLogRow{epoch, step, g.parts, lr});
    }
  }
  return TrainResult{std::move(state), std::move(log)};
}

// ---- log output ----

void TrainLog::write_csv(std::ostream& os) const {
  os << "epoch,step,sup_f,sup_w,unsup_pinned,unsup_estimated,consistency,total,"
        "lambda1,lambda2,lambda3,beta,lr\n";
  os.precision(17);
  for (const TrainLogRow& r : rows) {
    os << r.epoch << ',' << r.step << ',' << r.loss.sup_f << ',' << r.loss.sup_w
       << ',' << r.loss.unsup_pinned << ',' << r.loss.unsup_estimated << ','
       << r.loss.consistency << ',' << r.loss.total << ',' << r.loss.lambda1 << ','
       << r.loss.lambda2 << ',' << r.loss.lambda3 << ',' << r.loss.beta << ','
       << r.lr << '\n';
  }
}

void TrainLog::write_epoch_json(std::ostream& os) const {
  nlohmann::ordered_json epochs = nlohmann::ordered_json::array();
  std::size_t i = 0;
  while (i < rows.size()) {
    const int epoch = rows[i].epoch;
    double sup_f = 0, sup_w = 0, up = 0, ue = 0, cons = 0, total = 0;
    std::size_t count = 0;
    for (; i < rows.size() && rows[i].epoch == epoch; ++i, ++count) {
      sup_f += rows[i].loss.sup_f;
      sup_w += rows[i].loss.sup_w;
      up += rows[i].loss.unsup_pinned;
      ue += rows[i].loss.unsup_estimated;
      cons += rows[i].loss.consistency;
      total += rows[i].loss.total;
    }
    const double n = double(count);
    const TrainLogRow& last = rows[i - 1];
    epochs.push_back({{"epoch", epoch},
                      {"sup_f", sup_f / n},
                      {"sup_w", sup_w / n},
                      {"unsup_pinned", up / n},
                      {"unsup_estimated", ue / n},
                      {"consistency", cons / n},
                      {"total", total / n},
                      {"lambda1", last.loss.lambda1},
                      {"lambda2", last.loss.lambda2},
                      {"lambda3", last.loss.lambda3},
                      {"lr", last.lr}});
  }
  os << epochs.dump(2) << '\n';
}

}  // namespace sesim
