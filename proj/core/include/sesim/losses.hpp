#pragma once

#include "sesim/autodiff.hpp"
#include "sesim/batching.hpp"
#include "sesim/matrix.hpp"
#include "sesim/network.hpp"

namespace sesim {

/// Floor applied to every ln argument. Keeps ln(1 - A) finite when the
/// confidence kernel saturates at 1 (identical points) and cross-entropy
/// finite when a predicted probability underflows.
inline constexpr double kLnFloor = 1e-12;

/// Effective weights of one optimisation step (after ramp-up scaling).
struct LossWeights {
  double lambda1 = 0.0;  // graph regulariser on aug + labeled pairs
  double lambda2 = 0.0;  // graph regulariser on split pairs (estimated W)
  double lambda3 = 0.0;  // teacher consistency
  double beta = 1.0;     // kernel sharpness
};

/// Scalar readout of one step's objective. The *_part fields are already
/// normalised by their pair counts, so
///   total == sup_f + sup_w + lambda1*unsup_pinned + lambda2*unsup_estimated
///            + lambda3*consistency
/// holds to rounding error (recompose() evaluates the right-hand side with
/// the same association order the graph used).
struct LossBreakdown {
  double sup_f = 0.0;
  double sup_w = 0.0;
  double unsup_pinned = 0.0;     // pair weight fixed by construction / labels
  double unsup_estimated = 0.0;  // pair weight from the live similarity net
  double consistency = 0.0;
  double total = 0.0;
  double lambda1 = 0.0, lambda2 = 0.0, lambda3 = 0.0, beta = 0.0;

  double recompose() const {
    return ((sup_f + sup_w) + lambda1 * unsup_pinned) + lambda2 * unsup_estimated +
           lambda3 * consistency;
  }
};

// ---- building blocks (all differentiable) ----

/// -sum_ij targets_ij * ln(clamp(probs_ij)). targets must be row-stochastic
/// one-hot (or soft) with the same shape as probs.
Var ce_sum(Tape& tape, Var probs, const Matrix& targets);
/// ce_sum / rows: mean cross-entropy of the class posterior.
Var loss_sup_f(Tape& tape, Var f, const Matrix& y_onehot);
/// ce_sum / rows: mean cross-entropy of pair similarity predictions.
Var loss_sup_w(Tape& tape, Var w_probs, const Matrix& pair_targets);

/// Row-wise squared euclidean distance ||fi_k - fj_k||^2 as n x 1.
Var pair_sq_dist(Tape& tape, Var fi, Var fj);
/// exp(-beta * ||fi - fj||^2): 1 for identical rows, -> 0 as they separate.
Var confidence_kernel(Tape& tape, Var fi, Var fj, double beta);

/// Sum over pairs of
///   beta * w * d  -  (1 - w) * ln(clamp(1 - exp(-beta * d)))
/// i.e. similar pairs are pulled together, dissimilar pairs pushed apart
/// with a force that dies off once they are far. w may require gradients.
Var unsup_sum(Tape& tape, Var fi, Var fj, Var w, double beta);
/// unsup_sum / pairs.
Var loss_unsup(Tape& tape, Var fi, Var fj, Var w, double beta);

/// Sum over pairs of ||p_live - p_teacher||^2 (teacher is a constant).
Var cons_sum(Tape& tape, Var p_live, const Matrix& p_teacher);
/// cons_sum / pairs.
Var loss_cons(Tape& tape, Var p_live, const Matrix& p_teacher);

// ---- full objective ----

/// Teacher-side predictions for each block, computed from the EMA similarity
/// weights (and the live feature weights) on the shadow-perturbed copies.
/// Held constant during differentiation: the trainer learns toward them but
/// never through them.
struct ShadowOutputs {
  Matrix aug, labeled, split;  // pairs x 2 each
};
ShadowOutputs compute_shadow(const ModelState& state, const TrainingBatch& batch,
                             bool training, RngStream* dropout_rng);

/// The fully assembled differentiable objective for one step, plus the bound
/// parameter leaves whose gradients the optimiser will read.
struct StepGraph {
  BoundMlp feature;
  BoundMlp similarity;
  Var total;
  LossBreakdown parts;
};
StepGraph build_step_graph(Tape& tape, const ModelState& state,
                           const TrainingBatch& batch, const LossWeights& weights,
                           bool training, RngStream* feature_dropout,
                           RngStream* similarity_dropout, const ShadowOutputs& shadow);

/// Convenience eval-mode readout of the objective (teacher computed
/// internally, no dropout anywhere). Used by tests and diagnostics.
LossBreakdown combined_loss(const ModelState& state, const TrainingBatch& batch,
                            const LossWeights& weights);

}  // namespace sesim
