#pragma once

#include <string>

#include "sesim/trainer.hpp"

namespace sesim {

/// Ablation variants. All three consume the same batch/init stream layout,
/// so per-seed comparisons are paired.
enum class BaselineKind { supervised_only, pi_model, full_method };

BaselineKind baseline_from_name(const std::string& name);  // supervised | pi | full
std::string baseline_name(BaselineKind kind);

/// Mean squared euclidean distance between paired rows of two predictions
/// of the same samples under different perturbations.
Var pi_consistency_loss(Tape& tape, Var f_clean, Var f_perturbed);

/// supervised_only: mean label cross-entropy on the labeled block only.
/// pi_model: the same plus a warm-up-weighted consistency penalty between
/// each batch sample's prediction and its perturbed copy's (both branches
/// live). The consistency weight follows the lambda1 rule (peak k1 *
/// labeled / n, same ramp); in the log it occupies the lambda3 column and
/// the penalty itself the consistency column so recomposition still holds.
/// full_method: delegates to train().
TrainResult train_baseline(const Dataset& ds, BaselineKind kind,
                           const TrainConfig& cfg);

}  // namespace sesim
