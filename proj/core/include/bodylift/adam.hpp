#pragma once

#include <cstdint>
#include <vector>

#include "bodylift/autodiff.hpp"

namespace bodylift::ad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Optional exponential decay: lr · decay_rate^(t / decay_steps). Off when decay_rate == 1.
  double decay_rate = 1.0;
  std::uint64_t decay_steps = 100000;
};

struct AdamState {
  Tensor m;
  Tensor v;
};

/// Adam with bias correction over a fixed group of parameters. The group is
/// the optimizer's whole world: parameters outside it are never touched.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig config);

  /// Applies one update from the current `grad` of each parameter.
  /// Throws NumericError naming the parameter if any gradient is non-finite.
  void step();
  void zero_grad();

  std::uint64_t steps() const noexcept { return t_; }
  double current_lr() const noexcept;
  const AdamConfig& config() const noexcept { return config_; }
  const std::vector<AdamState>& state() const noexcept { return state_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<AdamState> state_;
  AdamConfig config_;
  std::uint64_t t_ = 0;
};

}  // namespace bodylift::ad
