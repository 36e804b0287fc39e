#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "bodylift/autodiff.hpp"
#include "bodylift/ops.hpp"
#include "bodylift/random.hpp"
#include "bodylift/skeleton.hpp"

namespace bodylift::net {

using ad::Mode;
using ad::Parameter;
using ad::Var;

/// How a forward pass treats randomness, parameters and batch-norm statistics.
struct ForwardContext {
  Mode mode = Mode::Eval;
  Rng* dropout_rng = nullptr;     // required when mode == Train and dropout > 0
  bool trainable = true;          // false: parameters enter the graph as constants
  bool update_bn_stats = true;    // train mode only
};

struct Linear {
  Parameter weight;  // in × out
  Parameter bias;    // out

  Linear() = default;
  Linear(std::string name, std::size_t in, std::size_t out, Rng& rng, bool zero_init = false);
  Var forward(const Var& x, const ForwardContext& ctx);
  std::size_t in_features() const { return weight.value.rows(); }
  std::size_t out_features() const { return weight.value.cols(); }
};

struct BatchNorm {
  Parameter gamma;
  Parameter beta;
  ad::BatchNormState state;

  BatchNorm() = default;
  BatchNorm(std::string name, std::size_t features);
  Var forward(const Var& x, const ForwardContext& ctx);
};

/// linear → batch-norm → ReLU → dropout, twice, then the skip connection adds the input.
struct ResidualBlock {
  Linear fc1;
  BatchNorm bn1;
  Linear fc2;
  BatchNorm bn2;
  double dropout = 0.5;

  ResidualBlock() = default;
  ResidualBlock(const std::string& name, std::size_t width, double dropout, Rng& rng);
  Var forward(const Var& x, const ForwardContext& ctx);
};

/// Input projection (linear → BN → ReLU → dropout) followed by residual blocks.
struct Stem {
  Linear input;
  BatchNorm input_bn;
  double dropout = 0.5;
  std::vector<ResidualBlock> blocks;

  Var forward(const Var& x, const ForwardContext& ctx);
};

/// E2d / E3d: input projection + two residual blocks, ending at the latent.
struct Encoder {
  Stem stem;
  Var forward(const Var& x, const ForwardContext& ctx) { return stem.forward(x, ctx); }
  std::size_t input_width() const { return stem.input.in_features(); }
};

/// Shared decoder: one residual block on the latent, then a linear head to 3J.
struct Decoder {
  ResidualBlock block;
  Linear output;
  Var forward(const Var& latent, const ForwardContext& ctx);
};

/// Pose generator: input projection over concat(pose2d, f2d), one residual block, linear head.
struct Generator {
  Stem stem;
  Linear output;
  Var forward(const Var& input, const ForwardContext& ctx);
  std::size_t input_width() const { return stem.input.in_features(); }
};

/// Domain discriminator: w → 512 → 1024 → 1 with ReLU between layers, raw logit out.
struct Discriminator {
  Linear fc1;
  Linear fc2;
  Linear fc3;
  Var forward(const Var& feature, const ForwardContext& ctx);
};

enum class Variant : std::uint32_t {
  Full = 1,      // E2d, E3d, decoder, generator, discriminator
  Baseline = 2,  // generator on the 2D pose alone
};

struct ModelSpec {
  std::size_t joints = 16;
  std::size_t width = 1024;
  double dropout = 0.5;
  JointSet joint_set = JointSet::H36M16;
  Variant variant = Variant::Full;

  std::size_t input2d() const { return 2 * joints; }
  std::size_t input3d() const { return 3 * joints; }
  bool operator==(const ModelSpec&) const = default;
};

inline constexpr std::size_t kDiscHidden1 = 512;
inline constexpr std::size_t kDiscHidden2 = 1024;

/// Parameters of all five networks. Non-copyable: parameters are referenced
/// in place by live graphs. Use snapshot()/restore() to keep copies.
class ModelParams {
 public:
  ModelParams() = default;
  ModelParams(const ModelParams&) = delete;
  ModelParams& operator=(const ModelParams&) = delete;
  ModelParams(ModelParams&&) = default;
  ModelParams& operator=(ModelParams&&) = default;

  ModelSpec spec;
  Encoder enc2d;
  Encoder enc3d;
  Decoder decoder;
  Generator generator;
  Discriminator discriminator;

  bool is_full() const noexcept { return spec.variant == Variant::Full; }

  /// Trainable parameters of the lifting side (encoders, decoder, generator).
  std::vector<Parameter*> lifting_parameters();
  std::vector<Parameter*> discriminator_parameters();
  std::vector<Parameter*> all_parameters();
  std::size_t parameter_count();

  /// Every persistent tensor (parameters then batch-norm running statistics,
  /// network by network) in the fixed checkpoint order.
  std::vector<Tensor*> state_tensors();
  std::vector<const Tensor*> state_tensors() const;

  std::vector<Tensor> snapshot() const;
  void restore(const std::vector<Tensor>& state);
  /// Deep copy via snapshot.
  ModelParams clone() const;
};

/// Fan-in scaled normal initialization; identical seeds give identical parameters.
ModelParams build_model(const ModelSpec& spec, Rng& rng);

// Network entry points. Inputs are normalized poses; shapes are checked.
Var encode2d(ModelParams& m, const Var& pose2d, const ForwardContext& ctx);
Var encode3d(ModelParams& m, const Var& pose3d, const ForwardContext& ctx);
Var decode(ModelParams& m, const Var& latent, const ForwardContext& ctx);
/// Full variant: generator over concat(pose2d, f2d). Baseline: pass an empty Var for f2d.
Var generate(ModelParams& m, const Var& pose2d, const Var& f2d, const ForwardContext& ctx);
Var discriminate(ModelParams& m, const Var& feature, const ForwardContext& ctx);

/// Final prediction path in eval mode: normalized B×2J → normalized B×3J.
Tensor predict(ModelParams& m, const Tensor& pose2d_norm);

}  // namespace bodylift::net
