#include "sesim/baselines.hpp"

#include <cmath>

namespace sesim {

BaselineKind baseline_from_name(const std::string& name) {
  if (name == "supervised") return BaselineKind::supervised_only;
  if (name == "pi") return BaselineKind::pi_model;
  if (name == "full") return BaselineKind::full_method;
  throw ParameterError("unknown method: " + name + " (expected supervised | pi | full)");
}

std::string baseline_name(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::supervised_only: return "supervised";
    case BaselineKind::pi_model: return "pi";
    case BaselineKind::full_method: return "full";
  }
  throw ContractError("baseline_name: bad enum");
}

Var pi_consistency_loss(Tape& tape, Var f_clean, Var f_perturbed) {
  const Matrix& a = tape.value(f_clean);
  const Matrix& b = tape.value(f_perturbed);
  if (!a.same_shape(b)) throw ShapeError("pi_consistency_loss: shape mismatch");
  if (a.rows < 1) throw ContractError("pi_consistency_loss: empty batch");
  return scale(sum(square(sub(f_clean, f_perturbed))), 1.0 / double(a.rows));
}

namespace {

/// Shared loop for the two reduced variants. Keeps the exact same rng
/// stream layout as train() so a given seed sees identical batches; only
/// the feature net is trained (the similarity net stays at init).
TrainResult train_reduced(const Dataset& ds, const TrainConfig& cfg,
                          bool with_consistency) {
  cfg.validate();
  if (ds.labeled_count() == 0)
    throw ParameterError("train_baseline: dataset has no labeled subset");

  ModelState state = init_model(feature_spec_from(cfg, ds), similarity_spec_from(cfg),
                                cfg.seed, cfg.ema_decay);
  BatchBuilder builder(ds, cfg.batch, cfg.aug_sigma);
  RngStream batch_rng(derive_seed(cfg.seed, streams::kBatch));
  RngStream feature_dropout(derive_seed(cfg.seed, streams::kFeatureDropout));

  std::vector<Matrix*> params;
  for (std::size_t i = 0; i < state.feature.w.size(); ++i) {
    params.push_back(&state.feature.w[i]);
    params.push_back(&state.feature.b[i]);
  }
  AdamOptimizer opt(cfg.adam);

  const double ratio = double(ds.labeled_count()) / double(ds.n());
  TrainLog log;
  log.steps_per_epoch = builder.steps_per_epoch();
  log.rows.reserve(std::size_t(cfg.epochs) * std::size_t(log.steps_per_epoch));

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double cons_weight =
        with_consistency
            ? rampup(epoch, cfg.k1 * ratio, cfg.ramp.lambda13_rampup_epochs, 0)
            : 0.0;
    const double lr = effective_lr(cfg, epoch);
    for (int step = 1; step <= log.steps_per_epoch; ++step) {
      TrainingBatch batch = builder.next(batch_rng);
      const PairBlock& lab = batch.labeled_pairs;
      const PairBlock& aug = batch.aug_pairs;

      Tape tape;
      BoundMlp f = bind_mlp(tape, state.feature, /*requires_grad=*/true);
      auto fwd = [&](const Matrix& x) {
        return mlp_forward(tape, f, tape.constant(x), /*training=*/true,
                           &feature_dropout)
            .output;
      };

      const Matrix y_a = one_hot(lab.labels_a, state.feature.spec.out_dim());
      const Matrix y_b = one_hot(lab.labels_b, state.feature.spec.out_dim());
      Var sup = scale(add(ce_sum(tape, fwd(lab.a), y_a), ce_sum(tape, fwd(lab.b), y_b)),
                      1.0 / double(2 * lab.pairs()));

      Var total = sup;
      double cons_value = 0.0;
      if (with_consistency) {
        // Every distinct batch sample paired with a perturbed copy: the
        // augmentation block's own pairs plus the labeled draws against
        // their shadow perturbations.
        Var cons = scale(
            add(add(sum(square(sub(fwd(aug.a), fwd(aug.b)))),
                    sum(square(sub(fwd(lab.a), fwd(lab.a_shadow))))),
                sum(square(sub(fwd(lab.b), fwd(lab.b_shadow))))),
            1.0 / double(aug.pairs() + 2 * lab.pairs()));
        cons_value = scalar(cons);
        total = add(sup, scale(cons, cons_weight));
      }

      LossBreakdown parts;
      parts.sup_f = scalar(sup);
      parts.consistency = cons_value;
      parts.lambda3 = cons_weight;
      parts.beta = cfg.beta;
      parts.total = scalar(total);
      if (!std::isfinite(parts.total))
        throw NumericalError("train_baseline: non-finite loss at epoch " +
                             std::to_string(epoch) + " step " + std::to_string(step));

      tape.backward(total);
      std::vector<const Matrix*> grads;
      grads.reserve(params.size());
      for (std::size_t i = 0; i < f.w.size(); ++i) {
        grads.push_back(&tape.grad(f.w[i]));
        grads.push_back(&tape.grad(f.b[i]));
      }
      opt.step(params, grads, lr);
      log.rows.push_back(TrainLogRow{epoch, step, parts, lr});
    }
  }
  return TrainResult{std::move(state), std::move(log)};
}

}  // namespace

TrainResult train_baseline(const Dataset& ds, BaselineKind kind,
                           const TrainConfig& cfg) {
  switch (kind) {
    case BaselineKind::full_method: return train(ds, cfg);
    case BaselineKind::pi_model: return train_reduced(ds, cfg, true);
    case BaselineKind::supervised_only: return train_reduced(ds, cfg, false);
  }
  throw ContractError("train_baseline: bad enum");
}

}  // namespace sesim
