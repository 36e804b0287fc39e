#include "bodylift/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace bodylift::ad {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

double grad_check(const std::function<Var(const Var&)>& f, const Tensor& x, double eps) {
  Var input = leaf(x, true);
  Var out = f(input);
  out.backward();
  const Tensor analytic = input.grad();

  double worst = 0.0;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + eps;
    const double up = f(constant(probe)).item();
    probe[i] = x[i] - eps;
    const double down = f(constant(probe)).item();
    probe[i] = x[i];
    const double numeric = (up - down) / (2.0 * eps);
    worst = std::max(worst, relative_error(analytic[i], numeric));
  }
  return worst;
}

}  // namespace bodylift::ad
