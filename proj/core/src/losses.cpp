#include "sesim/losses.hpp"

#include <string>

namespace sesim {

namespace {

void check_probs_targets(const Matrix& probs, const Matrix& targets, const char* op) {
  if (!probs.same_shape(targets))
    throw ShapeError(std::string(op) + ": probs/targets shape mismatch");
  if (probs.rows < 1) throw ContractError(std::string(op) + ": empty batch");
}

}  // namespace

Var ce_sum(Tape& tape, Var probs, const Matrix& targets) {
  check_probs_targets(tape.value(probs), targets, "ce_sum");
  Var safe = clamp(probs, kLnFloor, 1.0);
  Var picked = mul(ln(safe), tape.constant(targets));
  return scale(sum(picked), -1.0);
}

Var loss_sup_f(Tape& tape, Var f, const Matrix& y_onehot) {
  return scale(ce_sum(tape, f, y_onehot), 1.0 / double(y_onehot.rows));
}

Var loss_sup_w(Tape& tape, Var w_probs, const Matrix& pair_targets) {
  return scale(ce_sum(tape, w_probs, pair_targets), 1.0 / double(pair_targets.rows));
}

Var pair_sq_dist(Tape& tape, Var fi, Var fj) {
  if (!tape.value(fi).same_shape(tape.value(fj)))
    throw ShapeError("pair_sq_dist: shape mismatch");
  return row_sum(square(sub(fi, fj)));
}

Var confidence_kernel(Tape& tape, Var fi, Var fj, double beta) {
  if (beta <= 0.0) throw ParameterError("confidence_kernel: beta must be > 0");
  return exp(scale(pair_sq_dist(tape, fi, fj), -beta));
}

Var unsup_sum(Tape& tape, Var fi, Var fj, Var w, double beta) {
  if (beta <= 0.0) throw ParameterError("unsup_sum: beta must be > 0");
  Var d = pair_sq_dist(tape, fi, fj);
  const Matrix& wv = tape.value(w);
  if (wv.cols != 1 || wv.rows != tape.value(d).rows)
    throw ShapeError("unsup_sum: w must be pairs x 1");
  // attraction: beta * w * d
  Var attract = scale(mul(w, d), beta);
  // repulsion: -(1 - w) * ln(1 - exp(-beta * d)), floored so identical
  // points (gap = 0) stay finite; there w = 1 and the term vanishes anyway.
  Var gap = sub(tape.constant(Matrix(wv.rows, 1, 1.0)), exp(scale(d, -beta)));
  Var repel = mul(sub(tape.constant(Matrix(wv.rows, 1, 1.0)), w),
                  ln(clamp(gap, kLnFloor, 1.0)));
  return sum(sub(attract, repel));
}

Var loss_unsup(Tape& tape, Var fi, Var fj, Var w, double beta) {
  const int pairs = tape.value(fi).rows;
  if (pairs < 1) throw ContractError("loss_unsup: empty batch");
  return scale(unsup_sum(tape, fi, fj, w, beta), 1.0 / double(pairs));
}

Var cons_sum(Tape& tape, Var p_live, const Matrix& p_teacher) {
  check_probs_targets(tape.value(p_live), p_teacher, "cons_sum");
  return sum(square(sub(p_live, tape.constant(p_teacher))));
}

Var loss_cons(Tape& tape, Var p_live, const Matrix& p_teacher) {
  return scale(cons_sum(tape, p_live, p_teacher), 1.0 / double(p_teacher.rows));
}

// ---- full objective ----

namespace {

// Teacher prediction for one block: feature latents of the shadow copies,
// then the EMA similarity net. Dropout (when training) uses its own stream.
Matrix shadow_block(const ModelState& state, const PairBlock& block, bool training,
                    RngStream* rng) {
  Matrix za = mlp_forward_values(state.feature, block.a_shadow, training, rng).latent;
  Matrix zb = mlp_forward_values(state.feature, block.b_shadow, training, rng).latent;
  return mlp_forward_values(state.similarity_ema, concat_cols(za, zb), training, rng)
      .output;
}

}  // namespace

ShadowOutputs compute_shadow(const ModelState& state, const TrainingBatch& batch,
                             bool training, RngStream* dropout_rng) {
  ShadowOutputs q;
  q.aug = shadow_block(state, batch.aug_pairs, training, dropout_rng);
  q.labeled = shadow_block(state, batch.labeled_pairs, training, dropout_rng);
  q.split = shadow_block(state, batch.split_pairs, training, dropout_rng);
  return q;
}

StepGraph build_step_graph(Tape& tape, const ModelState& state,
                           const TrainingBatch& batch, const LossWeights& weights,
                           bool training, RngStream* feature_dropout,
                           RngStream* similarity_dropout, const ShadowOutputs& shadow) {
  const PairBlock& aug = batch.aug_pairs;
  const PairBlock& lab = batch.labeled_pairs;
  const PairBlock& spl = batch.split_pairs;
  const int b1 = aug.pairs(), b2 = lab.pairs(), b3 = spl.pairs();
  if (b1 < 1 || b2 < 1 || b3 < 1)
    throw ContractError("build_step_graph: every block must be non-empty");
  if (shadow.aug.rows != b1 || shadow.labeled.rows != b2 || shadow.split.rows != b3)
    throw ShapeError("build_step_graph: shadow predictions do not match the batch");

  StepGraph g;
  g.feature = bind_mlp(tape, state.feature, /*requires_grad=*/true);
  g.similarity = bind_mlp(tape, state.similarity, /*requires_grad=*/true);

  // Live forwards. Order matters: it defines how the dropout streams are
  // consumed, and the teacher side (compute_shadow) mirrors it.
  auto fwd = [&](const Matrix& x) {
    return mlp_forward(tape, g.feature, tape.constant(x), training, feature_dropout);
  };
  MlpForward f_aug_a = fwd(aug.a);
  MlpForward f_aug_b = fwd(aug.b);
  MlpForward f_lab_a = fwd(lab.a);
  MlpForward f_lab_b = fwd(lab.b);
  MlpForward f_spl_a = fwd(spl.a);
  MlpForward f_spl_b = fwd(spl.b);

  auto sim = [&](Var za, Var zb) {
    return mlp_forward(tape, g.similarity, concat_cols(za, zb), training,
                       similarity_dropout)
        .output;
  };
  Var p_aug = sim(f_aug_a.latent, f_aug_b.latent);
  Var p_lab = sim(f_lab_a.latent, f_lab_b.latent);
  Var p_spl = sim(f_spl_a.latent, f_spl_b.latent);

  // Supervised pieces: class cross-entropy on both labeled draws, pair
  // cross-entropy on the blocks that have targets. One shared normaliser.
  const double sup_norm = 1.0 / double(b1 + 2 * b2);
  const Matrix y_a = one_hot(lab.labels_a, state.feature.spec.out_dim());
  const Matrix y_b = one_hot(lab.labels_b, state.feature.spec.out_dim());
  Var sup_f = scale(add(ce_sum(tape, f_lab_a.output, y_a),
                        ce_sum(tape, f_lab_b.output, y_b)),
                    sup_norm);
  Var sup_w = scale(add(ce_sum(tape, p_aug, aug.targets),
                        ce_sum(tape, p_lab, lab.targets)),
                    sup_norm);

  // Graph term over blocks with pinned pair weights: augmentation pairs are
  // the same point (w = 1), labeled pairs take w from label agreement.
  Var w_aug = tape.constant(Matrix(b1, 1, 1.0));
  Matrix w_lab_m(b2, 1);
  for (int i = 0; i < b2; ++i) w_lab_m(i, 0) = lab.targets(i, 0);
  Var unsup_pinned =
      scale(add(unsup_sum(tape, f_aug_a.output, f_aug_b.output, w_aug, weights.beta),
                unsup_sum(tape, f_lab_a.output, f_lab_b.output,
                          tape.constant(w_lab_m), weights.beta)),
            1.0 / double(b1 + b2));

  // Graph term with the live similarity estimate; gradients flow into the
  // pair weight as well as the features.
  Var unsup_estimated =
      scale(unsup_sum(tape, f_spl_a.output, f_spl_b.output, column(p_spl, 0),
                      weights.beta),
            1.0 / double(b3));

  // Consistency toward the (constant) teacher predictions.
  Var consistency = scale(add(add(cons_sum(tape, p_aug, shadow.aug),
                                  cons_sum(tape, p_lab, shadow.labeled)),
                              cons_sum(tape, p_spl, shadow.split)),
                          1.0 / double(b1 + b2 + b3));

  Var total = add(add(add(add(sup_f, sup_w), scale(unsup_pinned, weights.lambda1)),
                      scale(unsup_estimated, weights.lambda2)),
                  scale(consistency, weights.lambda3));

  g.total = total;
  g.parts.sup_f = scalar(sup_f);
  g.parts.sup_w = scalar(sup_w);
  g.parts.unsup_pinned = scalar(unsup_pinned);
  g.parts.unsup_estimated = scalar(unsup_estimated);
  g.parts.consistency = scalar(consistency);
  g.parts.total = scalar(total);
  g.parts.lambda1 = weights.lambda1;
  g.parts.lambda2 = weights.lambda2;
  g.parts.lambda3 = weights.lambda3;
  g.parts.beta = weights.beta;
  return g;
}

LossBreakdown combined_loss(const ModelState& state, const TrainingBatch& batch,
                            const LossWeights& weights) {
  ShadowOutputs shadow = compute_shadow(state, batch, /*training=*/false, nullptr);
  Tape tape;
  return build_step_graph(tape, state, batch, weights, /*training=*/false, nullptr,
                          nullptr, shadow)
      .parts;
}

}  // namespace sesim
