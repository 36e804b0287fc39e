#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "bodylift/error.hpp"
#include "bodylift/grad_check.hpp"
#include "bodylift/ops.hpp"
#include "test_support.hpp"

namespace bodylift::ad {
namespace {

using testing::random_tensor;

Var project(const Var& y, const Tensor& c) { return sum(mul(y, constant(c))); }

TEST(Linear, HandArithmetic) {
  const Var y = linear(constant(Tensor::matrix({{1, 0}})), constant(Tensor::matrix({{2, 0}, {0, 3}})),
                       constant(Tensor::vector({1, 1})));
  EXPECT_EQ(y.value(), Tensor::matrix({{3, 1}}));
}

TEST(Linear, ZeroInputPassesBias) {
  Rng rng = make_rng(1);
  const Var y = linear(constant(Tensor({1, 2})), constant(random_tensor(rng, {2, 2})),
                       constant(Tensor::vector({5, -5})));
  EXPECT_EQ(y.value(), Tensor::matrix({{5, -5}}));
}

TEST(Linear, ShapeErrorReportsBothShapes) {
  try {
    linear(constant(Tensor({2, 3})), constant(Tensor({4, 2})), constant(Tensor({2})));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4x2]"), std::string::npos) << msg;
  }
}

TEST(Linear, GradientOfSumMatchesFiniteDifferences) {
  Rng rng = make_rng(2);
  const Tensor x = random_tensor(rng, {4, 8});
  const Tensor w = random_tensor(rng, {8, 5});
  const Tensor b = random_tensor(rng, {5});
  EXPECT_LT(grad_check([&](const Var& v) { return sum(linear(v, constant(w), constant(b))); }, x), 1e-6);
  EXPECT_LT(grad_check([&](const Var& v) { return sum(linear(constant(x), v, constant(b))); }, w), 1e-6);
  EXPECT_LT(grad_check([&](const Var& v) { return sum(linear(constant(x), constant(w), v)); }, b), 1e-6);
}

TEST(BatchNorm, AlreadyNormalizedInputPassesThrough) {
  // Columns with mean 0 and (biased) variance 1.
  const Tensor x = Tensor::matrix({{1, -1}, {-1, 1}, {1, 1}, {-1, -1}});
  BatchNormState state(2);
  const Var y = batchnorm(constant(x), constant(Tensor({2}, 1.0)), constant(Tensor({2}, 0.0)), state, Mode::Train);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y.value()[i], x[i], 1e-5);
}

TEST(BatchNorm, ConstantColumnMapsToBeta) {
  const Tensor x = Tensor::matrix({{3, 1}, {3, 2}, {3, 5}});
  BatchNormState state(2);
  const Var y = batchnorm(constant(x), constant(Tensor({2}, 1.0)), constant(Tensor::vector({7, 0})), state, Mode::Train);
  for (std::size_t r = 0; r < 3; ++r) EXPECT_DOUBLE_EQ(y.value().at(r, 0), 7.0);
}

TEST(BatchNorm, SingleRowInTrainModeIsAnError) {
  BatchNormState state(2);
  EXPECT_THROW(batchnorm(constant(Tensor({1, 2})), constant(Tensor({2}, 1.0)), constant(Tensor({2})), state, Mode::Train),
               ShapeError);
  // Eval mode uses running statistics and accepts one row.
  EXPECT_NO_THROW(batchnorm(constant(Tensor({1, 2})), constant(Tensor({2}, 1.0)), constant(Tensor({2})), state, Mode::Eval));
}

TEST(BatchNorm, RunningStatisticsUpdate) {
  const Tensor x = Tensor::matrix({{0, 10}, {2, 10}, {4, 10}});
  BatchNormState state(2);
  batchnorm(constant(x), constant(Tensor({2}, 1.0)), constant(Tensor({2})), state, Mode::Train);
  // momentum 0.1: mean 0.9·0 + 0.1·2, unbiased var 0.9·1 + 0.1·4.
  EXPECT_NEAR(state.running_mean[0], 0.2, 1e-15);
  EXPECT_NEAR(state.running_mean[1], 1.0, 1e-15);
  EXPECT_NEAR(state.running_var[0], 1.3, 1e-15);
  EXPECT_NEAR(state.running_var[1], 0.9, 1e-15);

  BatchNormState frozen(2);
  batchnorm(constant(x), constant(Tensor({2}, 1.0)), constant(Tensor({2})), frozen, Mode::Train, false);
  EXPECT_EQ(frozen.running_mean, Tensor({2}, 0.0));
  EXPECT_EQ(frozen.running_var, Tensor({2}, 1.0));
}

TEST(BatchNorm, EvalModeUsesRunningStatistics) {
  BatchNormState state(1);
  state.running_mean = Tensor::vector({2.0});
  state.running_var = Tensor::vector({4.0});
  const Var y = batchnorm(constant(Tensor::matrix({{4.0}})), constant(Tensor::vector({3.0})),
                          constant(Tensor::vector({1.0})), state, Mode::Eval);
  EXPECT_NEAR(y.item(), 3.0 * 2.0 / std::sqrt(4.0 + state.epsilon) + 1.0, 1e-15);
}

TEST(BatchNorm, GradientsMatchFiniteDifferences) {
  Rng rng = make_rng(3);
  const Tensor x = random_tensor(rng, {8, 4});
  const Tensor gamma = random_tensor(rng, {4});
  const Tensor beta = random_tensor(rng, {4});
  const Tensor c = random_tensor(rng, {8, 4});
  for (auto mode : {Mode::Train, Mode::Eval}) {
    BatchNormState base(4);
    base.running_mean = random_tensor(rng, {4});
    auto f = [&](const Var& xv, const Var& gv, const Var& bv) {
      BatchNormState s = base;
      return project(batchnorm(xv, gv, bv, s, mode, false), c);
    };
    EXPECT_LT(grad_check([&](const Var& v) { return f(v, constant(gamma), constant(beta)); }, x), 1e-5);
    EXPECT_LT(grad_check([&](const Var& v) { return f(constant(x), v, constant(beta)); }, gamma), 1e-5);
    EXPECT_LT(grad_check([&](const Var& v) { return f(constant(x), constant(gamma), v); }, beta), 1e-5);
  }
}

TEST(Dropout, ZeroRateIsIdentityInTrainMode) {
  Rng rng = make_rng(4);
  const Tensor x = random_tensor(rng, {3, 5});
  EXPECT_EQ(dropout(constant(x), 0.0, Mode::Train, rng).value(), x);
}

TEST(Dropout, EvalModeIsIdentity) {
  Rng rng = make_rng(4);
  const Tensor x = random_tensor(rng, {3, 5});
  EXPECT_EQ(dropout(constant(x), 0.5, Mode::Eval, rng).value(), x);
}

TEST(Dropout, InvertedScalingPreservesMean) {
  Rng rng = make_rng(5);
  const Var y = dropout(constant(Tensor({100000}, 1.0)), 0.5, Mode::Train, rng);
  double mean = 0.0;
  for (double v : y.value().data()) {
    EXPECT_TRUE(v == 0.0 || v == 2.0);
    mean += v;
  }
  mean /= 100000.0;
  EXPECT_GE(mean, 0.98);
  EXPECT_LE(mean, 1.02);
}

TEST(Dropout, MaskIsReusedInBackward) {
  Rng rng = make_rng(6);
  Var x = leaf(Tensor({4, 8}, 1.0), true);
  Var y = dropout(x, 0.3, Mode::Train, rng);
  sum(y).backward();
  EXPECT_EQ(x.grad(), y.value());  // x = 1, so output entries equal the mask scale
}

TEST(Dropout, RateOutsideRangeIsConfigError) {
  Rng rng = make_rng(7);
  EXPECT_THROW(dropout(constant(Tensor({2})), 1.0, Mode::Train, rng), ConfigError);
  EXPECT_THROW(dropout(constant(Tensor({2})), -0.1, Mode::Eval, rng), ConfigError);
}

TEST(Relu, ClampsNegatives) {
  EXPECT_EQ(relu(constant(Tensor::vector({-1, 2}))).value(), Tensor::vector({0, 2}));
}

TEST(Concat, JoinsLastAxis) {
  const Var y = concat(constant(Tensor::matrix({{1, 2}, {3, 4}})), constant(Tensor::matrix({{5}, {6}})));
  EXPECT_EQ(y.value(), Tensor::matrix({{1, 2, 5}, {3, 4, 6}}));
  EXPECT_THROW(concat(constant(Tensor({2, 2})), constant(Tensor({3, 1}))), ShapeError);
}

TEST(Losses, L1OfIdenticalInputsIsZero) {
  Rng rng = make_rng(8);
  const Tensor a = random_tensor(rng, {3, 4});
  EXPECT_EQ(l1_loss(constant(a), constant(a)).item(), 0.0);
  EXPECT_THROW(l1_loss(constant(a), constant(Tensor({4, 3}))), ShapeError);
}

TEST(Losses, BceAtZeroLogitIsLn2) {
  EXPECT_NEAR(bce_with_logit(constant(Tensor::matrix({{0.0}})), 1.0).item(), std::numbers::ln2, 1e-15);
  EXPECT_NEAR(bce_with_logit(constant(Tensor::matrix({{0.0}})), 0.0).item(), std::numbers::ln2, 1e-15);
}

TEST(Losses, BceIsStableForLargeLogits) {
  const double big = bce_with_logit(constant(Tensor::matrix({{800.0}})), 0.0).item();
  EXPECT_NEAR(big, 800.0, 1e-9);
  EXPECT_NEAR(bce_with_logit(constant(Tensor::matrix({{800.0}})), 1.0).item(), 0.0, 1e-12);
}

TEST(Losses, L2FamiliesOnThreeFourFive) {
  const Tensor a = Tensor::matrix({{3, 4, 0}});
  const Tensor z({1, 3});
  EXPECT_DOUBLE_EQ(l2_norm_loss(constant(a), constant(z)).item(), 5.0);
  EXPECT_DOUBLE_EQ(l2_loss(constant(a), constant(z)).item(), 25.0);
}

TEST(Losses, L2NormGradientAtZeroResidualIsZero) {
  Var a = leaf(Tensor({2, 3}, 1.0), true);
  l2_norm_loss(a, constant(Tensor({2, 3}, 1.0))).backward();
  EXPECT_TRUE(a.grad().all_finite());
  EXPECT_EQ(a.grad(), Tensor({2, 3}, 0.0));
}

TEST(Ops, WeightedSumIsLinear) {
  const Var a = constant(Tensor::scalar(2.0));
  const Var b = constant(Tensor::scalar(5.0));
  EXPECT_DOUBLE_EQ(weighted_sum({{3.0, a}, {0.5, b}}).item(), 8.5);
}

TEST(Ops, FiniteInputGivesFiniteOutput) {
  Rng rng = make_rng(9);
  const Tensor x = random_tensor(rng, {5, 6}, 1e3);
  BatchNormState s(6);
  const Var y = relu(batchnorm(constant(x), constant(Tensor({6}, 1.0)), constant(Tensor({6})), s, Mode::Train));
  EXPECT_TRUE(y.value().all_finite());
}

}  // namespace
}  // namespace bodylift::ad
