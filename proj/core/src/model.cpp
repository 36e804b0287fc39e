#include "bodylift/model.hpp"

#include <cmath>

#include "bodylift/error.hpp"

namespace bodylift::net {

namespace {

void require_width(const Var& x, std::size_t width, const char* what) {
  const auto& shape = x.shape();
  if (shape.size() != 2 || shape[1] != width) {
    throw ShapeError(std::string(what) + ": expected B x " + std::to_string(width) + " input, got " + to_string(shape));
  }
}

Var drop(const Var& x, double rate, const ForwardContext& ctx) {
  if (ctx.mode == Mode::Train && rate > 0.0) {
    if (!ctx.dropout_rng) throw ConfigError("train-mode forward with dropout needs an RNG");
    return ad::dropout(x, rate, ctx.mode, *ctx.dropout_rng);
  }
  return x;
}

void append(std::vector<Parameter*>& out, Linear& l) {
  out.push_back(&l.weight);
  out.push_back(&l.bias);
}
void append(std::vector<Parameter*>& out, BatchNorm& b) {
  out.push_back(&b.gamma);
  out.push_back(&b.beta);
}
void append(std::vector<Parameter*>& out, ResidualBlock& r) {
  append(out, r.fc1);
  append(out, r.bn1);
  append(out, r.fc2);
  append(out, r.bn2);
}
void append(std::vector<Parameter*>& out, Stem& s) {
  append(out, s.input);
  append(out, s.input_bn);
  for (auto& b : s.blocks) append(out, b);
}

// Running statistics interleaved after each batch-norm's parameters.
template <class T, class Fn>
void visit_state(T& m, Fn&& fn) {
  auto lin = [&](auto& l) {
    fn(l.weight.value);
    fn(l.bias.value);
  };
  auto bn = [&](auto& b) {
    fn(b.gamma.value);
    fn(b.beta.value);
    fn(b.state.running_mean);
    fn(b.state.running_var);
  };
  auto block = [&](auto& r) {
    lin(r.fc1);
    bn(r.bn1);
    lin(r.fc2);
    bn(r.bn2);
  };
  auto stem = [&](auto& s) {
    lin(s.input);
    bn(s.input_bn);
    for (auto& b : s.blocks) block(b);
  };
  if (m.spec.variant == Variant::Full) {
    stem(m.enc2d.stem);
    stem(m.enc3d.stem);
    block(m.decoder.block);
    lin(m.decoder.output);
  }
  stem(m.generator.stem);
  lin(m.generator.output);
  if (m.spec.variant == Variant::Full) {
    lin(m.discriminator.fc1);
    lin(m.discriminator.fc2);
    lin(m.discriminator.fc3);
  }
}

Stem make_stem(const std::string& name, std::size_t in, std::size_t width, std::size_t blocks, double dropout,
               Rng& rng) {
  Stem s;
  s.input = Linear(name + ".input", in, width, rng);
  s.input_bn = BatchNorm(name + ".input_bn", width);
  s.dropout = dropout;
  for (std::size_t i = 0; i < blocks; ++i) {
    s.blocks.emplace_back(name + ".block" + std::to_string(i), width, dropout, rng);
  }
  return s;
}

}  // namespace

Linear::Linear(std::string name, std::size_t in, std::size_t out, Rng& rng, bool zero_init)
    : weight(name + ".weight", Tensor({in, out})), bias(name + ".bias", Tensor({out})) {
  if (!zero_init) {
    // Normal weights with variance 1/(3·fan_in); biases uniform within ±1/sqrt(fan_in).
    const double bound = 1.0 / std::sqrt(double(in));
    const double stddev = bound / std::sqrt(3.0);
    for (auto& v : weight.value.data()) v = normal(rng, 0.0, stddev);
    for (auto& v : bias.value.data()) v = uniform(rng, -bound, bound);
  }
}

Var Linear::forward(const Var& x, const ForwardContext& ctx) {
  return ad::linear(x, ad::param(weight, ctx.trainable), ad::param(bias, ctx.trainable));
}

BatchNorm::BatchNorm(std::string name, std::size_t features)
    : gamma(name + ".gamma", Tensor({features}, 1.0)), beta(name + ".beta", Tensor({features})), state(features) {}

Var BatchNorm::forward(const Var& x, const ForwardContext& ctx) {
  return ad::batchnorm(x, ad::param(gamma, ctx.trainable), ad::param(beta, ctx.trainable), state, ctx.mode,
                       ctx.update_bn_stats);
}

ResidualBlock::ResidualBlock(const std::string& name, std::size_t width, double dropout_rate, Rng& rng)
    : fc1(name + ".fc1", width, width, rng),
      bn1(name + ".bn1", width),
      fc2(name + ".fc2", width, width, rng),
      bn2(name + ".bn2", width),
      dropout(dropout_rate) {}

Var ResidualBlock::forward(const Var& x, const ForwardContext& ctx) {
  Var h = drop(ad::relu(bn1.forward(fc1.forward(x, ctx), ctx)), dropout, ctx);
  h = drop(ad::relu(bn2.forward(fc2.forward(h, ctx), ctx)), dropout, ctx);
  return ad::add(x, h);
}

Var Stem::forward(const Var& x, const ForwardContext& ctx) {
  Var h = drop(ad::relu(input_bn.forward(input.forward(x, ctx), ctx)), dropout, ctx);
  for (auto& b : blocks) h = b.forward(h, ctx);
  return h;
}

Var Decoder::forward(const Var& latent, const ForwardContext& ctx) {
  return output.forward(block.forward(latent, ctx), ctx);
}

Var Generator::forward(const Var& input, const ForwardContext& ctx) {
  return output.forward(stem.forward(input, ctx), ctx);
}

Var Discriminator::forward(const Var& feature, const ForwardContext& ctx) {
  Var h = ad::relu(fc1.forward(feature, ctx));
  h = ad::relu(fc2.forward(h, ctx));
  return fc3.forward(h, ctx);
}

std::vector<Parameter*> ModelParams::lifting_parameters() {
  std::vector<Parameter*> out;
  if (is_full()) {
    append(out, enc2d.stem);
    append(out, enc3d.stem);
    append(out, decoder.block);
    append(out, decoder.output);
  }
  append(out, generator.stem);
  append(out, generator.output);
  return out;
}

std::vector<Parameter*> ModelParams::discriminator_parameters() {
  std::vector<Parameter*> out;
  if (is_full()) {
    append(out, discriminator.fc1);
    append(out, discriminator.fc2);
    append(out, discriminator.fc3);
  }
  return out;
}

std::vector<Parameter*> ModelParams::all_parameters() {
  auto out = lifting_parameters();
  auto d = discriminator_parameters();
  out.insert(out.end(), d.begin(), d.end());
  return out;
}

std::size_t ModelParams::parameter_count() {
  std::size_t n = 0;
  for (auto* p : all_parameters()) n += p->value.size();
  return n;
}

std::vector<Tensor*> ModelParams::state_tensors() {
  std::vector<Tensor*> out;
  visit_state(*this, [&](Tensor& t) { out.push_back(&t); });
  return out;
}

std::vector<const Tensor*> ModelParams::state_tensors() const {
  std::vector<const Tensor*> out;
  visit_state(*this, [&](const Tensor& t) { out.push_back(&t); });
  return out;
}

std::vector<Tensor> ModelParams::snapshot() const {
  std::vector<Tensor> out;
  for (const auto* t : state_tensors()) out.push_back(*t);
  return out;
}

void ModelParams::restore(const std::vector<Tensor>& state) {
  auto targets = state_tensors();
  if (targets.size() != state.size()) throw ShapeError("snapshot does not match model layout");
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (targets[i]->shape() != state[i].shape()) throw ShapeError("snapshot tensor shape differs from model");
    *targets[i] = state[i];
  }
}

ModelParams ModelParams::clone() const {
  Rng rng = make_rng(0);
  ModelParams copy = build_model(spec, rng);
  copy.restore(snapshot());
  return copy;
}

ModelParams build_model(const ModelSpec& spec, Rng& rng) {
  if (spec.joints < 2) throw ConfigError("model needs at least 2 joints");
  if (spec.width < 8) throw ConfigError("model width must be at least 8");
  if (!(spec.dropout >= 0.0 && spec.dropout < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
  ModelParams m;
  m.spec = spec;
  const std::size_t w = spec.width;
  if (spec.variant == Variant::Full) {
    m.enc2d.stem = make_stem("enc2d", spec.input2d(), w, 2, spec.dropout, rng);
    m.enc3d.stem = make_stem("enc3d", spec.input3d(), w, 2, spec.dropout, rng);
    m.decoder.block = ResidualBlock("decoder.block0", w, spec.dropout, rng);
    m.decoder.output = Linear("decoder.output", w, spec.input3d(), rng);
    m.generator.stem = make_stem("generator", spec.input2d() + w, w, 1, spec.dropout, rng);
    m.generator.output = Linear("generator.output", w, spec.input3d(), rng);
    m.discriminator.fc1 = Linear("discriminator.fc1", w, kDiscHidden1, rng);
    m.discriminator.fc2 = Linear("discriminator.fc2", kDiscHidden1, kDiscHidden2, rng);
    m.discriminator.fc3 = Linear("discriminator.fc3", kDiscHidden2, 1, rng);
  } else {
    m.generator.stem = make_stem("generator", spec.input2d(), w, 1, spec.dropout, rng);
    m.generator.output = Linear("generator.output", w, spec.input3d(), rng);
  }
  return m;
}

namespace {

void require_full(const ModelParams& m, const char* what) {
  if (!m.is_full()) throw ConfigError(std::string(what) + " is not part of the baseline model");
}

}  // namespace

Var encode2d(ModelParams& m, const Var& pose2d, const ForwardContext& ctx) {
  require_full(m, "2D encoder");
  require_width(pose2d, m.spec.input2d(), "encode2d");
  return m.enc2d.forward(pose2d, ctx);
}

Var encode3d(ModelParams& m, const Var& pose3d, const ForwardContext& ctx) {
  require_full(m, "3D encoder");
  require_width(pose3d, m.spec.input3d(), "encode3d");
  return m.enc3d.forward(pose3d, ctx);
}

Var decode(ModelParams& m, const Var& latent, const ForwardContext& ctx) {
  require_full(m, "decoder");
  require_width(latent, m.spec.width, "decode");
  return m.decoder.forward(latent, ctx);
}

Var generate(ModelParams& m, const Var& pose2d, const Var& f2d, const ForwardContext& ctx) {
  require_width(pose2d, m.spec.input2d(), "generate");
  if (!m.is_full()) return m.generator.forward(pose2d, ctx);
  if (!f2d) throw ConfigError("generate: the full model needs the 2D feature");
  require_width(f2d, m.spec.width, "generate");
  if (f2d.shape()[0] != pose2d.shape()[0]) {
    throw ShapeError("generate: pose batch " + to_string(pose2d.shape()) + " and feature batch " +
                     to_string(f2d.shape()) + " differ");
  }
  return m.generator.forward(ad::concat(pose2d, f2d), ctx);
}

Var discriminate(ModelParams& m, const Var& feature, const ForwardContext& ctx) {
  require_full(m, "discriminator");
  require_width(feature, m.spec.width, "discriminate");
  return m.discriminator.forward(feature, ctx);
}

Tensor predict(ModelParams& m, const Tensor& pose2d_norm) {
  ForwardContext ctx;
  ctx.mode = Mode::Eval;
  ctx.trainable = false;
  Var x = ad::constant(pose2d_norm);
  Var f2d = m.is_full() ? encode2d(m, x, ctx) : Var{};
  return generate(m, x, f2d, ctx).value();
}

}  // namespace bodylift::net
