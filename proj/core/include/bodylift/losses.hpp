#pragma once

#include <optional>
#include <string>

#include "bodylift/autodiff.hpp"

namespace bodylift::losses {

using ad::Var;

struct LossWeights {
  double est = 10.0;            // λ1
  double perceptual = 1.0;      // λ2
  double rec = 1.0;             // λ3
  double disc_unlabeled = 0.1;  // λ4
  double perc_unlabeled = 0.5;  // λ5

  /// Throws ConfigError on a negative or non-finite weight.
  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

/// Scalar values of each term for one step. Absent terms are zero.
struct LossBreakdown {
  double est = 0.0;
  double perceptual_labeled = 0.0;
  double rec = 0.0;
  double disc_unlabeled = 0.0;
  double perceptual_unlabeled = 0.0;
  double total = 0.0;
};

/// Mean over the batch of the Euclidean distance between predicted and true pose vectors.
Var loss_est(const Var& pred, const Var& gt);
/// Reconstruction from both latents: loss_est(from_h3d, gt) + loss_est(from_f2d, gt).
Var loss_rec(const Var& recon_from_h3d, const Var& recon_from_f2d, const Var& gt);
/// Mean absolute difference over batch × width.
Var loss_perceptual(const Var& f2d, const Var& h3d);
/// Discriminator objective: BCE with target 1 on 3D-side logits and 0 on 2D-side logits.
Var loss_discriminator(const Var& real_logits, const Var& fake_logits);
/// Encoder-side adversarial term, non-saturating: −E[log D(f2d)].
Var adversarial_generator_loss(const Var& fake_logits);

struct SupervisedParts {
  double est = 0.0;
  double perceptual = 0.0;
  double rec = 0.0;
};

struct UnlabeledParts {
  double disc = 0.0;
  double perceptual = 0.0;
};

/// total = λ1·est + λ2·perceptual + λ3·rec.
LossBreakdown total_supervised(const SupervisedParts& parts, const LossWeights& weights);
/// Adds λ4·disc + λ5·perceptual for the unlabeled batch when present.
LossBreakdown total_semi(const SupervisedParts& labeled, const std::optional<UnlabeledParts>& unlabeled,
                         const LossWeights& weights);

/// CSV header of the per-step training log.
inline constexpr const char* kLogHeader = "step,est,perc_l,rec,disc_ul,perc_ul,total,disc_loss";

}  // namespace bodylift::losses
