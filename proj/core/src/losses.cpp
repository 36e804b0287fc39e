#include "bodylift/losses.hpp"

#include <cmath>

#include "bodylift/error.hpp"
#include "bodylift/ops.hpp"

namespace bodylift::losses {

void LossWeights::validate() const {
  const double all[] = {est, perceptual, rec, disc_unlabeled, perc_unlabeled};
  for (double w : all) {
    if (!std::isfinite(w) || w < 0.0) throw ConfigError("loss weights must be finite and non-negative");
  }
}

Var loss_est(const Var& pred, const Var& gt) { return ad::l2_norm_loss(pred, gt); }

Var loss_rec(const Var& recon_from_h3d, const Var& recon_from_f2d, const Var& gt) {
  return ad::add(ad::l2_norm_loss(recon_from_h3d, gt), ad::l2_norm_loss(recon_from_f2d, gt));
}

Var loss_perceptual(const Var& f2d, const Var& h3d) { return ad::l1_loss(f2d, h3d); }

Var loss_discriminator(const Var& real_logits, const Var& fake_logits) {
  return ad::add(ad::bce_with_logit(real_logits, 1.0), ad::bce_with_logit(fake_logits, 0.0));
}

Var adversarial_generator_loss(const Var& fake_logits) { return ad::bce_with_logit(fake_logits, 1.0); }

LossBreakdown total_supervised(const SupervisedParts& parts, const LossWeights& weights) {
  weights.validate();
  LossBreakdown b;
  b.est = parts.est;
  b.perceptual_labeled = parts.perceptual;
  b.rec = parts.rec;
  b.total = weights.est * parts.est + weights.perceptual * parts.perceptual + weights.rec * parts.rec;
  return b;
}

LossBreakdown total_semi(const SupervisedParts& labeled, const std::optional<UnlabeledParts>& unlabeled,
                         const LossWeights& weights) {
  LossBreakdown b = total_supervised(labeled, weights);
  if (unlabeled) {
    b.disc_unlabeled = unlabeled->disc;
    b.perceptual_unlabeled = unlabeled->perceptual;
    b.total = b.total + weights.disc_unlabeled * unlabeled->disc + weights.perc_unlabeled * unlabeled->perceptual;
  }
  return b;
}

}  // namespace bodylift::losses
