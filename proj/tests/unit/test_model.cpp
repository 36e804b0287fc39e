#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "bodylift/error.hpp"
#include "bodylift/model.hpp"
#include "test_support.hpp"

namespace bodylift::net {
namespace {

ModelParams small_model(std::uint64_t seed, Variant variant = Variant::Full, std::size_t width = 32) {
  ModelSpec spec;
  spec.width = width;
  spec.dropout = 0.25;
  spec.variant = variant;
  Rng rng = make_rng(seed);
  return build_model(spec, rng);
}

ForwardContext eval_ctx() {
  ForwardContext ctx;
  ctx.mode = Mode::Eval;
  ctx.trainable = false;
  return ctx;
}

TEST(Model, ParameterCountMatchesClosedForm) {
  // J = 16, w = 1024. Linear a→b has a·b + b, batch norm 2w, residual block
  // 2(w² + w) + 4w. Counted by hand per network:
  //   E2d  32·1024+1024 + 2048 + 2 blocks           = 4242432
  //   E3d  48·1024+1024 + 2048 + 2 blocks           = 4258816
  //   Dec  1 block + 1024·48+48                      = 2152496
  //   Gen  1056·1024+1024 + 2048 + 1 block + 49200   = 3236912
  //   Disc 1024·512+512 + 512·1024+1024 + 1024+1     = 1051137
  ModelSpec spec;
  Rng rng = make_rng(0);
  ModelParams full = build_model(spec, rng);
  EXPECT_EQ(full.parameter_count(), 14941793u);
  spec.variant = Variant::Baseline;
  ModelParams base = build_model(spec, rng);
  EXPECT_EQ(base.parameter_count(), 2188336u);
  EXPECT_LT(base.parameter_count(), full.parameter_count());
}

TEST(Model, ParameterGroupsPartitionTheModel) {
  ModelParams m = small_model(1);
  const auto lift = m.lifting_parameters();
  const auto disc = m.discriminator_parameters();
  const auto all = m.all_parameters();
  EXPECT_EQ(lift.size() + disc.size(), all.size());
  for (auto* p : disc) EXPECT_EQ(std::count(lift.begin(), lift.end(), p), 0);
}

TEST(Model, OutputShapes) {
  ModelParams m = small_model(2);
  Rng rng = make_rng(3);
  const auto ctx = eval_ctx();
  const Var x2 = ad::constant(testing::random_tensor(rng, {5, 32}));
  const Var x3 = ad::constant(testing::random_tensor(rng, {5, 48}));
  const Var f2d = encode2d(m, x2, ctx);
  EXPECT_EQ(f2d.shape(), (Shape{5, 32}));
  EXPECT_EQ(encode3d(m, x3, ctx).shape(), (Shape{5, 32}));
  EXPECT_EQ(decode(m, f2d, ctx).shape(), (Shape{5, 48}));
  EXPECT_EQ(generate(m, x2, f2d, ctx).shape(), (Shape{5, 48}));
  EXPECT_EQ(discriminate(m, f2d, ctx).shape(), (Shape{5, 1}));
  EXPECT_EQ(predict(m, x2.value()).shape(), (Shape{5, 48}));
}

TEST(Model, SameSeedSameParametersAndOutputs) {
  ModelParams a = small_model(4);
  ModelParams b = small_model(4);
  EXPECT_EQ(a.snapshot(), b.snapshot());
  ModelParams c = small_model(5);
  EXPECT_NE(a.snapshot(), c.snapshot());
  Rng rng = make_rng(6);
  const Tensor x = testing::random_tensor(rng, {7, 32});
  EXPECT_EQ(predict(a, x), predict(b, x));
}

TEST(Model, EvalPredictionIsBatchInvariant) {
  ModelParams m = small_model(7);
  Rng rng = make_rng(8);
  const Tensor x = testing::random_tensor(rng, {6, 32});
  const Tensor batched = predict(m, x);
  for (std::size_t r = 0; r < 6; ++r) {
    Tensor one({1, 32});
    std::copy(x.row(r).begin(), x.row(r).end(), one.data().begin());
    const Tensor single = predict(m, one);
    for (std::size_t c = 0; c < 48; ++c) EXPECT_NEAR(single[c], batched.at(r, c), 1e-10);
  }
}

TEST(Model, ZeroedSecondBranchMakesResidualBlockIdentity) {
  Rng rng = make_rng(9);
  ResidualBlock block("b", 16, 0.5, rng);
  block.bn2.gamma.value.fill(0.0);
  block.bn2.beta.value.fill(0.0);
  const Tensor x = testing::random_tensor(rng, {4, 16});
  const Var y = block.forward(ad::constant(x), eval_ctx());
  EXPECT_EQ(y.value(), x);
}

TEST(Model, ZeroFinalDiscriminatorLayerGivesEvenOdds) {
  ModelParams m = small_model(10);
  m.discriminator.fc3.weight.value.fill(0.0);
  m.discriminator.fc3.bias.value.fill(0.0);
  Rng rng = make_rng(11);
  const Var logit = discriminate(m, ad::constant(testing::random_tensor(rng, {4, 32})), eval_ctx());
  for (double v : logit.value().data()) {
    EXPECT_EQ(v, 0.0);
    EXPECT_EQ(1.0 / (1.0 + std::exp(-v)), 0.5);
  }
}

TEST(Model, TrainModeOutputsAreFiniteOnLargeInputs) {
  ModelParams m = small_model(12);
  Rng rng = make_rng(13);
  Rng drop = make_rng(14);
  ForwardContext ctx;
  ctx.mode = Mode::Train;
  ctx.dropout_rng = &drop;
  const Var x = ad::constant(testing::random_tensor(rng, {8, 32}, 1e3));
  const Var f = encode2d(m, x, ctx);
  EXPECT_TRUE(generate(m, x, f, ctx).value().all_finite());
  EXPECT_TRUE(discriminate(m, f, ctx).value().all_finite());
}

TEST(Model, ShapeMistakesAreReported) {
  ModelParams m = small_model(15);
  Rng rng = make_rng(16);
  const auto ctx = eval_ctx();
  const Var x2 = ad::constant(testing::random_tensor(rng, {4, 32}));
  const Var f_other = ad::constant(testing::random_tensor(rng, {3, 32}));
  EXPECT_THROW(generate(m, x2, f_other, ctx), ShapeError);
  EXPECT_THROW(generate(m, x2, Var{}, ctx), ConfigError);
  EXPECT_THROW(encode2d(m, ad::constant(testing::random_tensor(rng, {4, 34})), ctx), ShapeError);
  EXPECT_THROW(encode3d(m, x2, ctx), ShapeError);
}

TEST(Model, BaselineHasNoEncodersOrDiscriminator) {
  ModelParams m = small_model(17, Variant::Baseline);
  EXPECT_FALSE(m.is_full());
  EXPECT_TRUE(m.discriminator_parameters().empty());
  Rng rng = make_rng(18);
  const Tensor x = testing::random_tensor(rng, {3, 32});
  EXPECT_EQ(predict(m, x).shape(), (Shape{3, 48}));
  EXPECT_THROW(discriminate(m, ad::constant(testing::random_tensor(rng, {3, 32})), eval_ctx()), ConfigError);
}

TEST(Model, InvalidSpecsAreRejected) {
  Rng rng = make_rng(0);
  ModelSpec spec;
  spec.width = 4;
  EXPECT_THROW(build_model(spec, rng), ConfigError);
  spec = {};
  spec.dropout = 1.0;
  EXPECT_THROW(build_model(spec, rng), ConfigError);
  spec = {};
  spec.joints = 1;
  EXPECT_THROW(build_model(spec, rng), ConfigError);
}

TEST(Model, CloneAndRestoreCopyEveryStateTensor) {
  ModelParams m = small_model(19);
  for (auto* t : m.state_tensors()) {
    for (auto& v : t->data()) v += 0.5;
  }
  ModelParams copy = m.clone();
  EXPECT_EQ(copy.snapshot(), m.snapshot());
  ModelParams other = small_model(20, Variant::Full, 16);
  EXPECT_THROW(other.restore(m.snapshot()), ShapeError);
}

}  // namespace
}  // namespace bodylift::net
