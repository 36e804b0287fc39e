#pragma once

#include <functional>

#include "bodylift/autodiff.hpp"

namespace bodylift::ad {

/// Relative error used throughout: |a − n| / max(1e-8, |a| + |n|).
double relative_error(double analytic, double numeric);

/// Compares the reverse-mode gradient of the scalar `f` at `x` with central
/// differences of step `eps`, coordinate by coordinate. Returns the largest
/// relative error. `f` must be deterministic (eval mode or a fixed mask).
double grad_check(const std::function<Var(const Var&)>& f, const Tensor& x, double eps = 1e-5);

}  // namespace bodylift::ad
