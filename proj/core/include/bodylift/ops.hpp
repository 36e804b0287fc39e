#pragma once

#include <utility>
#include <vector>

#include "bodylift/autodiff.hpp"
#include "bodylift/random.hpp"

namespace bodylift::ad {

/// y = x·W + b for x[B×n], W[n×m], b[m].
Var linear(const Var& x, const Var& weight, const Var& bias);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
/// Elementwise product of equally shaped tensors.
Var mul(const Var& a, const Var& b);
Var sum(const Var& a);
Var relu(const Var& x);
/// Concatenation along the last axis of two matrices with equal row counts.
Var concat(const Var& a, const Var& b);

/// Σ weight·term over scalar terms, evaluated left to right.
Var weighted_sum(const std::vector<std::pair<double, Var>>& terms);

struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double epsilon = 1e-5;

  BatchNormState() = default;
  explicit BatchNormState(std::size_t features, double momentum = 0.1, double epsilon = 1e-5);
};

/// Train mode normalizes with batch statistics (biased variance) and, when
/// `update_stats`, folds them into the running estimates (unbiased variance).
/// Eval mode uses the running estimates.
Var batchnorm(const Var& x, const Var& gamma, const Var& beta, BatchNormState& state, Mode mode,
              bool update_stats = true);

/// Inverted dropout: train mode zeroes entries with probability `rate` and
/// scales survivors by 1/(1-rate); eval mode is the identity.
Var dropout(const Var& x, double rate, Mode mode, Rng& rng);

/// Mean over rows of the squared Euclidean distance between rows of a and b.
Var l2_loss(const Var& a, const Var& b);
/// Mean over rows of the Euclidean distance between rows of a and b.
Var l2_norm_loss(const Var& a, const Var& b);
/// Mean absolute difference over all entries.
Var l1_loss(const Var& a, const Var& b);
/// Mean binary cross-entropy of sigmoid(logits) against a constant target.
Var bce_with_logit(const Var& logits, double target);

}  // namespace bodylift::ad
