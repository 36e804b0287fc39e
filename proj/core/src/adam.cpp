#include "bodylift/adam.hpp"

#include <cmath>

#include "bodylift/error.hpp"

namespace bodylift::ad {

Adam::Adam(std::vector<Parameter*> params, AdamConfig config) : params_(std::move(params)), config_(config) {
  if (!(config_.lr > 0.0)) throw ConfigError("Adam learning rate must be positive");
  if (!(config_.beta1 >= 0.0 && config_.beta1 < 1.0) || !(config_.beta2 >= 0.0 && config_.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  state_.reserve(params_.size());
  for (auto* p : params_) state_.push_back({Tensor(p->value.shape()), Tensor(p->value.shape())});
}

double Adam::current_lr() const noexcept {
  if (config_.decay_rate == 1.0) return config_.lr;
  return config_.lr * std::pow(config_.decay_rate, double(t_) / double(config_.decay_steps));
}

void Adam::step() {
  for (auto* p : params_) {
    if (p->grad.shape() != p->value.shape()) p->zero_grad();
    if (!p->grad.all_finite()) throw NumericError("non-finite gradient in parameter '" + p->name + "'");
  }
  const double lr = current_lr();
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, double(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, double(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto value = params_[k]->value.data();
    auto grad = params_[k]->grad.data();
    auto m = state_[k].m.data();
    auto v = state_[k].v.data();
    for (std::size_t i = 0; i < value.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * grad[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * grad[i] * grad[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      value[i] -= lr * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

}  // namespace bodylift::ad
