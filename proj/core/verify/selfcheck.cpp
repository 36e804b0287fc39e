#include "bodylift/verify/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "bodylift/checkpoint.hpp"
#include "bodylift/grad_check.hpp"
#include "bodylift/losses.hpp"
#include "bodylift/metrics.hpp"
#include "bodylift/model.hpp"
#include "bodylift/ops.hpp"
#include "bodylift/synth.hpp"
#include "bodylift/trainer.hpp"
#include "bodylift/verify/oracles.hpp"

namespace bodylift::verify {

using ad::Var;

namespace {

Tensor random_tensor(Rng& rng, Shape shape, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = normal(rng, 0.0, scale);
  return t;
}

// Keeps every entry at least `margin` away from zero so |·| and ReLU kinks
// stay outside the finite-difference stencil.
Tensor away_from_zero(Tensor t, double margin = 0.05) {
  for (auto& v : t.data()) {
    if (std::abs(v) < margin) v = v < 0 ? v - margin : v + margin;
  }
  return t;
}

// Scalar read-out Σ c ⊙ y that depends on every output coordinate.
Var project(const Var& y, const Tensor& c) { return ad::sum(ad::mul(y, ad::constant(c))); }

struct Battery {
  double eps;
  bool fault;
  std::vector<GradientCase> cases;

  void check(const std::string& name, const std::function<Var(const Var&)>& f, const Tensor& x) {
    auto g = f;
    if (fault && name == "linear/input") {
      g = [f](const Var& v) { return v.requires_grad() ? ad::scale(f(v), 1.001) : f(v); };
    }
    const double err = ad::grad_check(g, x, eps);
    auto it = std::find_if(cases.begin(), cases.end(), [&](const GradientCase& c) { return c.name == name; });
    if (it == cases.end()) {
      cases.push_back({name, err});
    } else {
      it->max_rel_error = std::max(it->max_rel_error, err);
    }
  }
};

void randomize_batchnorm(net::BatchNorm& bn, Rng& rng) {
  for (auto& v : bn.gamma.value.data()) v = uniform(rng, 0.5, 1.5);
  for (auto& v : bn.beta.value.data()) v = normal(rng, 0.0, 0.3);
  for (auto& v : bn.state.running_mean.data()) v = normal(rng, 0.0, 0.3);
  for (auto& v : bn.state.running_var.data()) v = uniform(rng, 0.5, 2.0);
}

void randomize_stats(net::ModelParams& m, Rng& rng) {
  auto stem = [&](net::Stem& s) {
    randomize_batchnorm(s.input_bn, rng);
    for (auto& b : s.blocks) {
      randomize_batchnorm(b.bn1, rng);
      randomize_batchnorm(b.bn2, rng);
    }
  };
  stem(m.enc2d.stem);
  stem(m.enc3d.stem);
  stem(m.generator.stem);
  randomize_batchnorm(m.decoder.block.bn1, rng);
  randomize_batchnorm(m.decoder.block.bn2, rng);
}

// ReLU on/off pattern of the discriminator's hidden layers at `lat`.
std::vector<bool> relu_pattern(net::ModelParams& m, const Tensor& lat) {
  auto& d = m.discriminator;
  const Tensor h1 =
      ad::linear(ad::constant(lat), ad::constant(d.fc1.weight.value), ad::constant(d.fc1.bias.value)).value();
  const Tensor h2 = ad::linear(ad::relu(ad::constant(h1)), ad::constant(d.fc2.weight.value),
                               ad::constant(d.fc2.bias.value))
                        .value();
  std::vector<bool> out;
  for (const Tensor* h : {&h1, &h2}) {
    for (double v : h->data()) out.push_back(v > 0.0);
  }
  return out;
}

// Redraws `lat` until every ±eps probe keeps the same ReLU pattern, so the
// central difference never straddles a kink.
Tensor kink_free_feature(net::ModelParams& m, Rng& rng, Shape shape, double eps) {
  for (;;) {
    Tensor lat = random_tensor(rng, shape);
    const auto base = relu_pattern(m, lat);
    bool clean = true;
    for (std::size_t i = 0; clean && i < lat.size(); ++i) {
      for (double step : {eps, -eps}) {
        Tensor probe = lat;
        probe[i] += step;
        if (relu_pattern(m, probe) != base) {
          clean = false;
          break;
        }
      }
    }
    if (clean) return lat;
  }
}

}  // namespace

std::vector<GradientCase> gradient_battery_impl(std::size_t configs, double eps, bool fault) {
  Battery bat{eps, fault, {}};
  for (std::size_t k = 0; k < configs; ++k) {
    Rng rng = make_rng(0x6a0d, k);
    // Batch of 2 makes train-mode batchnorm nearly constant in x, which leaves
    // only roundoff for the difference quotient to measure.
    const std::size_t b = 3 + k % 4, n = 2 + (k * 3) % 5, m = 2 + (k * 7) % 5;
    const Tensor x = random_tensor(rng, {b, n});
    const Tensor w = random_tensor(rng, {n, m});
    const Tensor bias = random_tensor(rng, {m});
    const Tensor c = random_tensor(rng, {b, m});
    const Tensor cn = random_tensor(rng, {b, n});

    bat.check("linear/input", [&](const Var& v) { return project(ad::linear(v, ad::constant(w), ad::constant(bias)), c); }, x);
    bat.check("linear/weight", [&](const Var& v) { return project(ad::linear(ad::constant(x), v, ad::constant(bias)), c); }, w);
    bat.check("linear/bias", [&](const Var& v) { return project(ad::linear(ad::constant(x), ad::constant(w), v), c); }, bias);

    const Tensor gamma = random_tensor(rng, {n}), beta = random_tensor(rng, {n});
    ad::BatchNormState state(n);
    for (auto& v : state.running_mean.data()) v = normal(rng);
    for (auto& v : state.running_var.data()) v = uniform(rng, 0.5, 2.0);
    for (auto mode : {ad::Mode::Train, ad::Mode::Eval}) {
      const std::string tag = mode == ad::Mode::Train ? "batchnorm-train/" : "batchnorm-eval/";
      auto bn = [&, mode](const Var& xv, const Var& gv, const Var& bv) {
        ad::BatchNormState s = state;
        return project(ad::batchnorm(xv, gv, bv, s, mode, false), cn);
      };
      bat.check(tag + "input", [&](const Var& v) { return bn(v, ad::constant(gamma), ad::constant(beta)); }, x);
      bat.check(tag + "gamma", [&](const Var& v) { return bn(ad::constant(x), v, ad::constant(beta)); }, gamma);
      bat.check(tag + "beta", [&](const Var& v) { return bn(ad::constant(x), ad::constant(gamma), v); }, beta);
    }

    const std::uint64_t mask_seed = 77 + k;
    bat.check("dropout-train/input", [&](const Var& v) {
      Rng mask = make_rng(mask_seed);
      return project(ad::dropout(v, 0.3, ad::Mode::Train, mask), cn);
    }, x);
    bat.check("relu/input", [&](const Var& v) { return project(ad::relu(v), cn); }, away_from_zero(x));

    const Tensor x2 = random_tensor(rng, {b, m});
    Tensor cc = random_tensor(rng, {b, n + m});
    bat.check("concat/left", [&](const Var& v) { return project(ad::concat(v, ad::constant(x2)), cc); }, x);
    bat.check("concat/right", [&](const Var& v) { return project(ad::concat(ad::constant(x), v), cc); }, x2);
    bat.check("mul/left", [&](const Var& v) { return project(ad::mul(v, ad::constant(cn)), cn); }, x);

    const Tensor y = random_tensor(rng, {b, n});
    const Tensor diff_y = [&] {
      Tensor d = away_from_zero(random_tensor(rng, {b, n}));
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += y[i];
      return d;
    }();
    bat.check("l2_loss/input", [&](const Var& v) { return ad::l2_loss(v, ad::constant(y)); }, x);
    bat.check("l2_norm_loss/input", [&](const Var& v) { return ad::l2_norm_loss(v, ad::constant(y)); }, x);
    bat.check("l1_loss/input", [&](const Var& v) { return ad::l1_loss(v, ad::constant(y)); }, diff_y);
    const Tensor logits = random_tensor(rng, {b, 1}, 2.0);
    bat.check("bce_with_logit/target1", [&](const Var& v) { return ad::bce_with_logit(v, 1.0); }, logits);
    bat.check("bce_with_logit/target0", [&](const Var& v) { return ad::bce_with_logit(v, 0.0); }, logits);

    const Tensor gt = random_tensor(rng, {b, 3 * n});
    const Tensor pred = random_tensor(rng, {b, 3 * n});
    const Tensor other = random_tensor(rng, {b, 3 * n});
    bat.check("loss_est/pred", [&](const Var& v) { return losses::loss_est(v, ad::constant(gt)); }, pred);
    bat.check("loss_rec/from_h3d", [&](const Var& v) {
      return losses::loss_rec(v, ad::constant(other), ad::constant(gt));
    }, pred);
    bat.check("loss_rec/from_f2d", [&](const Var& v) {
      return losses::loss_rec(ad::constant(other), v, ad::constant(gt));
    }, pred);
    bat.check("loss_perceptual/f2d", [&](const Var& v) { return losses::loss_perceptual(v, ad::constant(y)); }, diff_y);
    bat.check("loss_perceptual/h3d", [&](const Var& v) { return losses::loss_perceptual(ad::constant(y), v); }, diff_y);
    const Tensor other_logits = random_tensor(rng, {b, 1}, 2.0);
    bat.check("loss_discriminator/real", [&](const Var& v) {
      return losses::loss_discriminator(v, ad::constant(other_logits));
    }, logits);
    bat.check("loss_discriminator/fake", [&](const Var& v) {
      return losses::loss_discriminator(ad::constant(other_logits), v);
    }, logits);
    bat.check("adversarial_generator_loss/fake", [&](const Var& v) { return losses::adversarial_generator_loss(v); },
              logits);

    // Whole networks, small enough for coordinate-wise differencing.
    net::ModelSpec spec;
    spec.joints = 3 + k % 3;
    spec.width = 8;
    spec.dropout = 0.25;
    spec.joint_set = JointSet::Custom;
    Rng init = make_rng(0xbeef, k);
    net::ModelParams model = net::build_model(spec, init);
    randomize_stats(model, rng);
    net::ForwardContext eval{ad::Mode::Eval, nullptr, false, false};
    const std::size_t bb = 3;
    const Tensor p2 = random_tensor(rng, {bb, spec.input2d()});
    const Tensor p3 = random_tensor(rng, {bb, spec.input3d()});
    const Tensor lat = random_tensor(rng, {bb, spec.width});
    const Tensor cw = random_tensor(rng, {bb, spec.width});
    const Tensor c3 = random_tensor(rng, {bb, spec.input3d()});
    const Tensor c1 = random_tensor(rng, {bb, 1});
    bat.check("encode2d/input", [&](const Var& v) { return project(net::encode2d(model, v, eval), cw); }, p2);
    bat.check("encode3d/input", [&](const Var& v) { return project(net::encode3d(model, v, eval), cw); }, p3);
    bat.check("decode/latent", [&](const Var& v) { return project(net::decode(model, v, eval), c3); }, lat);
    bat.check("generate/pose2d", [&](const Var& v) {
      return project(net::generate(model, v, ad::constant(lat), eval), c3);
    }, p2);
    bat.check("generate/f2d", [&](const Var& v) {
      return project(net::generate(model, ad::constant(p2), v, eval), c3);
    }, lat);
    bat.check("discriminate/feature", [&](const Var& v) { return project(net::discriminate(model, v, eval), c1); },
              kink_free_feature(model, rng, {bb, spec.width}, eps));
    bat.check("encode2d-train/input", [&](const Var& v) {
      Rng mask = make_rng(mask_seed);
      net::ForwardContext train{ad::Mode::Train, &mask, false, false};
      return project(net::encode2d(model, v, train), cw);
    }, p2);
  }
  return bat.cases;
}

std::vector<GradientCase> gradient_battery(std::size_t configs, double eps) {
  return gradient_battery_impl(configs, eps, false);
}

MetricOracleSummary metric_oracles(std::size_t pairs, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x3e7);
  MetricOracleSummary s;
  s.pairs = pairs;
  std::vector<Pose3D> preds, gts;
  const std::size_t joints = 16;
  for (std::size_t k = 0; k < pairs; ++k) {
    Pose3D gt = random_pose(rng, joints);
    const double sigma = uniform(rng, 5.0, 250.0);
    Pose3D pred = gt;
    for (auto& p : pred) p += Vec3(normal(rng, 0, sigma), normal(rng, 0, sigma), normal(rng, 0, sigma));
    const std::size_t root = k % joints;

    s.p1_max_diff = std::max(s.p1_max_diff, std::abs(metrics::mpjpe_p1(pred, gt, root) - brute_mpjpe_p1(pred, gt, root)));
    s.p2_max_diff = std::max(s.p2_max_diff, std::abs(metrics::mpjpe_p2(pred, gt) - brute_mpjpe_p2(pred, gt)));

    const Mat3 r = random_rotation(rng);
    const double scale = uniform(rng, 0.2, 5.0);
    const Vec3 t(normal(rng, 0, 1000), normal(rng, 0, 1000), normal(rng, 0, 1000));
    s.p2_similarity_max = std::max(s.p2_similarity_max, metrics::mpjpe_p2(transform(gt, r, t, scale), gt));

    preds.push_back(std::move(pred));
    gts.push_back(std::move(gt));
  }
  const auto grid = metrics::default_auc_grid();
  for (std::size_t start = 0; start < pairs; start += 50) {
    const std::size_t end = std::min(pairs, start + 50);
    std::vector<Pose3D> ps(preds.begin() + long(start), preds.begin() + long(end));
    std::vector<Pose3D> gs(gts.begin() + long(start), gts.begin() + long(end));
    for (double thr : {50.0, 100.0, 150.0, 300.0}) {
      s.pck_max_diff = std::max(s.pck_max_diff, std::abs(metrics::pck(ps, gs, thr, 0) - brute_pck(ps, gs, thr, 0)));
    }
    s.auc_max_diff = std::max(s.auc_max_diff, std::abs(metrics::auc(ps, gs, grid, 0) - brute_auc(ps, gs, grid, 0)));
  }
  return s;
}

double checkpoint_roundtrip_error() {
  Rng data_rng = make_rng(5, 1);
  const Skeleton sk = Skeleton::h36m16();
  const Dataset data = synth_dataset(sk, 40, data_rng);
  const NormStats stats = compute_norm_stats(data);
  net::ModelSpec spec;
  spec.joints = 16;
  spec.width = 16;
  Rng init = make_rng(5, 2);
  net::ModelParams model = net::build_model(spec, init);
  Rng noise = make_rng(5, 3);
  randomize_stats(model, noise);

  const Checkpoint loaded = deserialize_checkpoint(serialize_checkpoint(model, stats));
  if (loaded.model.snapshot() != model.snapshot() || !(loaded.stats == stats)) {
    return std::numeric_limits<double>::infinity();
  }
  net::ModelParams reloaded = loaded.model.clone();
  const double before = metrics::evaluate(train::make_predictor(model), data, stats).mpjpe_p1;
  const double after = metrics::evaluate(train::make_predictor(reloaded), data, loaded.stats).mpjpe_p1;
  return std::abs(before - after);
}

std::vector<CheckResult> run_selfcheck(const SelfCheckOptions& options) {
  std::vector<CheckResult> out;
  constexpr double kGradTol = 1e-4;
  for (const auto& c : gradient_battery_impl(options.gradient_configs, 1e-5, options.inject_fault)) {
    out.push_back({"grad " + c.name, c.max_rel_error < kGradTol, c.max_rel_error, kGradTol, ""});
  }
  const auto m = metric_oracles(options.metric_pairs);
  const std::string pairs = std::to_string(m.pairs) + " pairs";
  out.push_back({"metric mpjpe_p1 vs oracle", m.p1_max_diff < 1e-9, m.p1_max_diff, 1e-9, pairs});
  out.push_back({"metric mpjpe_p2 vs Horn oracle", m.p2_max_diff < 1e-9, m.p2_max_diff, 1e-9, pairs});
  out.push_back({"metric pck vs oracle", m.pck_max_diff < 1e-9, m.pck_max_diff, 1e-9, pairs});
  out.push_back({"metric auc vs oracle", m.auc_max_diff < 1e-9, m.auc_max_diff, 1e-9, pairs});
  out.push_back({"metric p2 similarity copies", m.p2_similarity_max < 1e-9, m.p2_similarity_max, 1e-9, pairs});
  const double ck = checkpoint_roundtrip_error();
  out.push_back({"checkpoint round trip", ck <= 1e-12, ck, 1e-12, "bit-exact tensors, eval MPJPE"});
  return out;
}

std::string format_results(const std::vector<CheckResult>& results) {
  std::ostringstream os;
  char line[256];
  std::size_t failed = 0;
  for (const auto& r : results) {
    std::snprintf(line, sizeof line, "%-4s %-40s %12.3e  (tol %.0e)%s%s\n", r.passed ? "PASS" : "FAIL",
                  r.name.c_str(), r.value, r.tolerance, r.detail.empty() ? "" : "  ", r.detail.c_str());
    os << line;
    failed += r.passed ? 0 : 1;
  }
  os << results.size() - failed << "/" << results.size() << " checks passed\n";
  return os.str();
}

}  // namespace bodylift::verify
