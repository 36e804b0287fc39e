#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "bodylift/error.hpp"
#include "bodylift/grad_check.hpp"
#include "bodylift/losses.hpp"
#include "test_support.hpp"

namespace bodylift::losses {
namespace {

Var c(Tensor t) { return ad::constant(std::move(t)); }

// Plain-loop references.
double ref_est(const Tensor& a, const Tensor& b) {
  double total = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double sq = 0.0;
    for (std::size_t k = 0; k < a.cols(); ++k) sq += (a.at(r, k) - b.at(r, k)) * (a.at(r, k) - b.at(r, k));
    total += std::sqrt(sq);
  }
  return total / double(a.rows());
}

double ref_l1(const Tensor& a, const Tensor& b) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += std::abs(a[i] - b[i]);
  return total / double(a.size());
}

TEST(Losses, EstimationExamples) {
  const Tensor gt = Tensor::matrix({{1, 2, 3}});
  EXPECT_EQ(loss_est(c(gt), c(gt)).item(), 0.0);
  EXPECT_DOUBLE_EQ(loss_est(c(Tensor::matrix({{3, 4, 0}})), c(Tensor::matrix({{0, 0, 0}}))).item(), 5.0);
}

TEST(Losses, EstimationMatchesReference) {
  Rng rng = make_rng(1);
  for (int k = 0; k < 20; ++k) {
    const std::size_t b = 1 + std::size_t(k % 7);
    const Tensor p = testing::random_tensor(rng, {b, 48});
    const Tensor g = testing::random_tensor(rng, {b, 48});
    EXPECT_NEAR(loss_est(c(p), c(g)).item(), ref_est(p, g), 1e-12);
    EXPECT_GE(loss_est(c(p), c(g)).item(), 0.0);
  }
}

TEST(Losses, ReconstructionIsSumOfBranches) {
  Rng rng = make_rng(2);
  const Tensor g = testing::random_tensor(rng, {5, 48});
  const Tensor a = testing::random_tensor(rng, {5, 48});
  const Tensor b = testing::random_tensor(rng, {5, 48});
  EXPECT_EQ(loss_rec(c(g), c(g), c(g)).item(), 0.0);
  EXPECT_NEAR(loss_rec(c(g), c(b), c(g)).item(), loss_est(c(b), c(g)).item(), 1e-15);
  EXPECT_NEAR(loss_rec(c(a), c(b), c(g)).item(), ref_est(a, g) + ref_est(b, g), 1e-12);
}

TEST(Losses, PerceptualExamplesAndProperties) {
  EXPECT_DOUBLE_EQ(loss_perceptual(c(Tensor::matrix({{1, -1}})), c(Tensor::matrix({{0, 0}}))).item(), 1.0);
  Rng rng = make_rng(3);
  for (int k = 0; k < 20; ++k) {
    const Tensor f = testing::random_tensor(rng, {4, 32});
    const Tensor h = testing::random_tensor(rng, {4, 32});
    EXPECT_EQ(loss_perceptual(c(f), c(f)).item(), 0.0);
    EXPECT_EQ(loss_perceptual(c(f), c(h)).item(), loss_perceptual(c(h), c(f)).item());
    EXPECT_NEAR(loss_perceptual(c(f), c(h)).item(), ref_l1(f, h), 1e-12);
  }
}

TEST(Losses, ShapeMismatchesThrow) {
  const Tensor a({2, 3});
  const Tensor b({2, 4});
  EXPECT_THROW(loss_est(c(a), c(b)), ShapeError);
  EXPECT_THROW(loss_rec(c(a), c(a), c(b)), ShapeError);
  EXPECT_THROW(loss_perceptual(c(a), c(b)), ShapeError);
}

TEST(Losses, DiscriminatorClosedForms) {
  const Tensor zeros({8, 1});
  EXPECT_NEAR(loss_discriminator(c(zeros), c(zeros)).item(), 2.0 * std::numbers::ln2, 1e-12);
  EXPECT_NEAR(adversarial_generator_loss(c(zeros)).item(), std::numbers::ln2, 1e-12);
  const Tensor real({8, 1}, 20.0);
  const Tensor fake({8, 1}, -20.0);
  EXPECT_LT(loss_discriminator(c(real), c(fake)).item(), 1e-8);
  // Swapped roles are maximally wrong.
  EXPECT_GT(loss_discriminator(c(fake), c(real)).item(), 39.0);
}

TEST(Losses, DiscriminatorMatchesBceReference) {
  Rng rng = make_rng(4);
  const Tensor real = testing::random_tensor(rng, {6, 1}, 3.0);
  const Tensor fake = testing::random_tensor(rng, {5, 1}, 3.0);
  auto log_sig = [](double z) { return -std::log1p(std::exp(-z)); };
  double expected = 0.0;
  for (double z : real.data()) expected -= log_sig(z) / 6.0;
  for (double z : fake.data()) expected -= log_sig(-z) / 5.0;
  EXPECT_NEAR(loss_discriminator(c(real), c(fake)).item(), expected, 1e-12);
  double adv = 0.0;
  for (double z : fake.data()) adv -= log_sig(z) / 5.0;
  EXPECT_NEAR(adversarial_generator_loss(c(fake)).item(), adv, 1e-12);
}

TEST(Losses, GradientsPassFiniteDifferences) {
  Rng rng = make_rng(5);
  const Tensor p = testing::random_tensor(rng, {4, 9});
  const Tensor g = testing::random_tensor(rng, {4, 9});
  const Tensor q = testing::random_tensor(rng, {4, 9});
  const Tensor real = testing::random_tensor(rng, {4, 1});
  const Tensor fake = testing::random_tensor(rng, {3, 1});
  EXPECT_LT(ad::grad_check([&](const Var& v) { return loss_est(v, c(g)); }, p), 1e-4);
  EXPECT_LT(ad::grad_check([&](const Var& v) { return loss_rec(v, c(q), c(g)); }, p), 1e-4);
  EXPECT_LT(ad::grad_check([&](const Var& v) { return loss_rec(c(p), v, c(g)); }, q), 1e-4);
  EXPECT_LT(ad::grad_check([&](const Var& v) { return loss_perceptual(v, c(g)); }, p), 1e-4);
  EXPECT_LT(ad::grad_check([&](const Var& v) { return loss_discriminator(v, c(fake)); }, real), 1e-4);
  EXPECT_LT(ad::grad_check([&](const Var& v) { return loss_discriminator(c(real), v); }, fake), 1e-4);
  EXPECT_LT(ad::grad_check([&](const Var& v) { return adversarial_generator_loss(v); }, fake), 1e-4);
}

// Weighted totals ---------------------------------------------------------------

TEST(Totals, SupervisedExamples) {
  const LossWeights w;
  const LossBreakdown b = total_supervised({1.0, 2.0, 3.0}, w);
  EXPECT_EQ(b.total, 15.0);
  EXPECT_EQ(b.disc_unlabeled, 0.0);
  EXPECT_EQ(b.perceptual_unlabeled, 0.0);
  EXPECT_EQ(total_supervised({1.0, 2.0, 3.0}, LossWeights{0, 0, 0, 0, 0}).total, 0.0);
}

TEST(Totals, SemiExamples) {
  const LossWeights w;
  EXPECT_NEAR(total_semi({1, 1, 1}, UnlabeledParts{1, 1}, w).total, 12.6, 1e-12);
  const SupervisedParts parts{0.3, 0.7, 1.9};
  const LossBreakdown a = total_semi(parts, std::nullopt, w);
  const LossBreakdown b = total_supervised(parts, w);
  EXPECT_EQ(a.total, b.total);
  EXPECT_EQ(a.est, b.est);
}

TEST(Totals, MatchScalarRecomputationAndAreLinear) {
  Rng rng = make_rng(6);
  for (int k = 0; k < 200; ++k) {
    const LossWeights w{uniform(rng, 0, 20), uniform(rng, 0, 2), uniform(rng, 0, 2), uniform(rng, 0, 1),
                        uniform(rng, 0, 1)};
    const SupervisedParts s{uniform(rng, 0, 5), uniform(rng, 0, 5), uniform(rng, 0, 5)};
    const UnlabeledParts u{uniform(rng, 0, 5), uniform(rng, 0, 5)};
    const double expected = w.est * s.est + w.perceptual * s.perceptual + w.rec * s.rec +
                            w.disc_unlabeled * u.disc + w.perc_unlabeled * u.perceptual;
    const LossBreakdown b = total_semi(s, u, w);
    EXPECT_NEAR(b.total, expected, 1e-12);
    // Perturbing one component moves the total by λ·δ.
    UnlabeledParts u2 = u;
    u2.disc += 1.0;
    EXPECT_NEAR(total_semi(s, u2, w).total - b.total, w.disc_unlabeled, 1e-12);
    SupervisedParts s2 = s;
    s2.rec += 1.0;
    EXPECT_NEAR(total_semi(s2, u, w).total - b.total, w.rec, 1e-12);
  }
}

TEST(Totals, InvalidWeightsAreRejected) {
  LossWeights w;
  EXPECT_NO_THROW(w.validate());
  w.rec = -1.0;
  EXPECT_THROW(w.validate(), ConfigError);
  EXPECT_THROW(total_supervised({1, 1, 1}, w), ConfigError);
  w = {};
  w.disc_unlabeled = std::nan("");
  EXPECT_THROW(w.validate(), ConfigError);
}

}  // namespace
}  // namespace bodylift::losses
