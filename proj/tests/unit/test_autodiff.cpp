#include <gtest/gtest.h>

#include <cmath>

#include "bodylift/autodiff.hpp"
#include "bodylift/error.hpp"
#include "bodylift/grad_check.hpp"
#include "bodylift/ops.hpp"
#include "test_support.hpp"

namespace bodylift::ad {
namespace {

TEST(Autodiff, BackwardRequiresScalarRoot) {
  Var x = leaf(Tensor({2, 2}, 1.0), true);
  EXPECT_THROW(x.backward(), ShapeError);
}

TEST(Autodiff, GradOfUntouchedLeafIsZero) {
  Var x = leaf(Tensor({2}, 3.0), true);
  Var y = leaf(Tensor({2}, 1.0), true);
  sum(x).backward();
  EXPECT_EQ(y.grad(), Tensor({2}, 0.0));
  EXPECT_EQ(x.grad(), Tensor({2}, 1.0));
}

TEST(Autodiff, SharedSubexpressionAccumulates) {
  // f = sum(x*x + x), df/dx = 2x + 1.
  Var x = leaf(Tensor::vector({1.0, -2.0, 0.5}), true);
  Var y = add(mul(x, x), x);
  sum(y).backward();
  const Tensor g = x.grad();
  EXPECT_DOUBLE_EQ(g[0], 3.0);
  EXPECT_DOUBLE_EQ(g[1], -3.0);
  EXPECT_DOUBLE_EQ(g[2], 2.0);
}

TEST(Autodiff, ParamAccumulatesIntoParameterGrad) {
  Parameter p("p", Tensor::vector({2.0, 3.0}));
  Var a = param(p);
  sum(add(a, a)).backward();
  EXPECT_EQ(p.grad, Tensor::vector({2.0, 2.0}));
  sum(a).backward();  // a second graph adds on top
  EXPECT_EQ(p.grad, Tensor::vector({3.0, 3.0}));
}

TEST(Autodiff, FrozenParamReceivesNothing) {
  Parameter p("p", Tensor::vector({2.0}));
  Var x = leaf(Tensor::vector({1.0}), true);
  sum(mul(param(p, false), x)).backward();
  EXPECT_EQ(p.grad, Tensor::vector({0.0}));
  EXPECT_EQ(x.grad(), Tensor::vector({2.0}));
}

TEST(Autodiff, DetachCutsGradient) {
  Var x = leaf(Tensor::vector({1.0, 2.0}), true);
  Var y = add(detach(mul(x, x)), x);
  sum(y).backward();
  EXPECT_EQ(x.grad(), Tensor::vector({1.0, 1.0}));
}

// Forward-mode oracle over a scalar DAG: every node carries its value and
// its derivative with respect to one chosen input.
struct ScalarGraph {
  enum Op { Input, Add, Sub, Mul, Scale };
  struct N {
    Op op;
    std::size_t a = 0, b = 0;
    double c = 0.0;
  };
  std::vector<N> nodes;
  std::vector<double> inputs;

  std::pair<double, double> eval_dual(std::size_t wrt) const {
    std::vector<double> v(nodes.size()), d(nodes.size());
    std::size_t next_input = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const N& n = nodes[i];
      switch (n.op) {
        case Input:
          v[i] = inputs[next_input];
          d[i] = next_input == wrt ? 1.0 : 0.0;
          ++next_input;
          break;
        case Add: v[i] = v[n.a] + v[n.b]; d[i] = d[n.a] + d[n.b]; break;
        case Sub: v[i] = v[n.a] - v[n.b]; d[i] = d[n.a] - d[n.b]; break;
        case Mul: v[i] = v[n.a] * v[n.b]; d[i] = d[n.a] * v[n.b] + v[n.a] * d[n.b]; break;
        case Scale: v[i] = n.c * v[n.a]; d[i] = n.c * d[n.a]; break;
      }
    }
    return {v.back(), d.back()};
  }
};

TEST(Autodiff, RandomDagsMatchForwardModeOracle) {
  Rng rng = make_rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    ScalarGraph g;
    const std::size_t n_inputs = 1 + trial % 3;
    const std::size_t n_nodes = 6 + trial % 15;  // ≤ 20 nodes
    std::vector<Var> vars;
    std::vector<Var> leaves;
    for (std::size_t i = 0; i < n_inputs; ++i) {
      const double x = uniform(rng, -1.5, 1.5);
      g.inputs.push_back(x);
      g.nodes.push_back({ScalarGraph::Input});
      leaves.push_back(leaf(Tensor::scalar(x), true));
      vars.push_back(leaves.back());
    }
    while (g.nodes.size() < n_nodes) {
      std::uniform_int_distribution<std::size_t> pick(0, g.nodes.size() - 1);
      const auto op = static_cast<ScalarGraph::Op>(1 + std::uniform_int_distribution<int>(0, 3)(rng));
      // Operands are reused freely, so most graphs share subexpressions.
      const std::size_t a = pick(rng), b = pick(rng);
      const double c = uniform(rng, -2.0, 2.0);
      g.nodes.push_back({op, a, b, c});
      switch (op) {
        case ScalarGraph::Add: vars.push_back(add(vars[a], vars[b])); break;
        case ScalarGraph::Sub: vars.push_back(sub(vars[a], vars[b])); break;
        case ScalarGraph::Mul: vars.push_back(mul(vars[a], vars[b])); break;
        case ScalarGraph::Scale: vars.push_back(scale(vars[a], c)); break;
        case ScalarGraph::Input: break;
      }
    }
    Var out = vars.back();
    if (!out.requires_grad()) continue;
    out.backward();
    for (std::size_t i = 0; i < n_inputs; ++i) {
      const auto [value, deriv] = g.eval_dual(i);
      ASSERT_NEAR(out.item(), value, 1e-12 * (1.0 + std::abs(value)));
      EXPECT_NEAR(leaves[i].grad().item(), deriv, 1e-10 * (1.0 + std::abs(deriv))) << "trial " << trial;
    }
  }
}

TEST(GradCheck, SumOfSquaresIsExact) {
  Rng rng = make_rng(5);
  const Tensor x = testing::random_tensor(rng, {3, 4});
  const double err = grad_check([](const Var& v) { return sum(mul(v, v)); }, x);
  EXPECT_LT(err, 1e-8);
}

TEST(GradCheck, L1AwayFromKinks) {
  Rng rng = make_rng(6);
  Tensor x = testing::random_tensor(rng, {4, 5});
  for (auto& v : x.data()) v += v < 0 ? -0.1 : 0.1;
  const Tensor zero({4, 5});
  const double err = grad_check([&](const Var& v) { return l1_loss(v, constant(zero)); }, x);
  EXPECT_LT(err, 1e-6);
}

TEST(GradCheck, ReportsWrongGradient) {
  // Forward x², backward pretends the derivative is 3x.
  auto bad = [](const Var& v) {
    Tensor y = v.value();
    for (auto& e : y.data()) e *= e;
    return sum(make_node(y, {v}, [](Node& self) {
      Node& p = *self.parents[0];
      Tensor& g = p.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += 3.0 * p.value()[i] * self.grad[i];
    }));
  };
  EXPECT_GT(grad_check(bad, Tensor::vector({1.0, 2.0})), 0.1);
}

TEST(Autodiff, ForwardIsBitReproducible) {
  Rng r1 = make_rng(9), r2 = make_rng(9);
  const Tensor x = testing::random_tensor(r1, {6, 4});
  const Tensor w = testing::random_tensor(r1, {4, 3});
  Rng d1 = make_rng(1), d2 = make_rng(1);
  const Tensor y1 = dropout(relu(linear(constant(x), constant(w), constant(Tensor({3})))), 0.5, Mode::Train, d1).value();
  const Tensor y2 = dropout(relu(linear(constant(x), constant(w), constant(Tensor({3})))), 0.5, Mode::Train, d2).value();
  EXPECT_EQ(y1, y2);
  (void)r2;
}

}  // namespace
}  // namespace bodylift::ad
