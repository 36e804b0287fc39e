#include "bodylift/ops.hpp"

#include <algorithm>
#include <cmath>

#include "bodylift/error.hpp"

namespace bodylift::ad {

namespace {

void require_rank2(const Tensor& t, const char* what) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(what) + ": expected a matrix, got " + to_string(t.shape()));
  }
}

// grad(parent) += g, elementwise.
void accumulate(Node& parent, std::span<const double> g, double factor = 1.0) {
  if (!parent.requires_grad) return;
  auto out = parent.ensure_grad().data();
  for (std::size_t i = 0; i < g.size(); ++i) out[i] += factor * g[i];
}

Node& parent(Node& n, std::size_t i) { return *n.parents[i]; }

}  // namespace

Var linear(const Var& x, const Var& weight, const Var& bias) {
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  const Tensor& bv = bias.value();
  require_rank2(xv, "linear input");
  require_rank2(wv, "linear weight");
  if (xv.cols() != wv.rows()) {
    throw ShapeError("linear: input " + to_string(xv.shape()) + " does not match weight " +
                     to_string(wv.shape()));
  }
  if (bv.size() != wv.cols()) {
    throw ShapeError("linear: bias " + to_string(bv.shape()) + " does not match weight " +
                     to_string(wv.shape()));
  }
  Tensor y;
  gemm_nn(xv, wv, y);
  const std::size_t m = wv.cols();
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    for (std::size_t j = 0; j < m; ++j) row[j] += bv[j];
  }
  return make_node(std::move(y), {x, weight, bias}, [](Node& self) {
    Node& xn = parent(self, 0);
    Node& wn = parent(self, 1);
    Node& bn = parent(self, 2);
    const Tensor& g = self.grad;
    if (xn.requires_grad) gemm_nt(g, wn.value(), xn.ensure_grad(), true);
    if (wn.requires_grad) gemm_tn(xn.value(), g, wn.ensure_grad(), true);
    if (bn.requires_grad) {
      auto db = bn.ensure_grad().data();
      for (std::size_t r = 0; r < g.rows(); ++r) {
        auto row = g.row(r);
        for (std::size_t j = 0; j < row.size(); ++j) db[j] += row[j];
      }
    }
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor y = a.value();
  auto bd = b.value().data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bd[i];
  return make_node(std::move(y), {a, b}, [](Node& self) {
    accumulate(parent(self, 0), self.grad.data());
    accumulate(parent(self, 1), self.grad.data());
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor y = a.value();
  auto bd = b.value().data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bd[i];
  return make_node(std::move(y), {a, b}, [](Node& self) {
    accumulate(parent(self, 0), self.grad.data());
    accumulate(parent(self, 1), self.grad.data(), -1.0);
  });
}

Var scale(const Var& a, double factor) {
  Tensor y = a.value();
  for (auto& v : y.data()) v *= factor;
  return make_node(std::move(y), {a}, [factor](Node& self) {
    accumulate(parent(self, 0), self.grad.data(), factor);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor y = a.value();
  auto bd = b.value().data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bd[i];
  return make_node(std::move(y), {a, b}, [](Node& self) {
    Node& an = parent(self, 0);
    Node& bn = parent(self, 1);
    auto g = self.grad.data();
    if (an.requires_grad) {
      auto out = an.ensure_grad().data();
      auto other = bn.value().data();
      for (std::size_t i = 0; i < g.size(); ++i) out[i] += g[i] * other[i];
    }
    if (bn.requires_grad) {
      auto out = bn.ensure_grad().data();
      auto other = an.value().data();
      for (std::size_t i = 0; i < g.size(); ++i) out[i] += g[i] * other[i];
    }
  });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return make_node(Tensor::scalar(s), {a}, [](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    const double g = self.grad[0];
    for (auto& v : p.ensure_grad().data()) v += g;
  });
}

Var relu(const Var& x) {
  Tensor y = x.value();
  for (auto& v : y.data()) v = v > 0.0 ? v : 0.0;
  return make_node(std::move(y), {x}, [](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto in = p.value().data();
    auto g = self.grad.data();
    auto out = p.ensure_grad().data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (in[i] > 0.0) out[i] += g[i];
    }
  });
}

Var concat(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank2(av, "concat");
  require_rank2(bv, "concat");
  if (av.rows() != bv.rows()) {
    throw ShapeError("concat: batch sizes differ " + to_string(av.shape()) + " vs " + to_string(bv.shape()));
  }
  const std::size_t ca = av.cols(), cb = bv.cols();
  Tensor y({av.rows(), ca + cb});
  for (std::size_t r = 0; r < av.rows(); ++r) {
    std::copy_n(av.row(r).data(), ca, y.row(r).data());
    std::copy_n(bv.row(r).data(), cb, y.row(r).data() + ca);
  }
  return make_node(std::move(y), {a, b}, [ca, cb](Node& self) {
    Node& an = parent(self, 0);
    Node& bn = parent(self, 1);
    const Tensor& g = self.grad;
    for (std::size_t r = 0; r < g.rows(); ++r) {
      auto gr = g.row(r);
      if (an.requires_grad) {
        auto out = an.ensure_grad().row(r);
        for (std::size_t j = 0; j < ca; ++j) out[j] += gr[j];
      }
      if (bn.requires_grad) {
        auto out = bn.ensure_grad().row(r);
        for (std::size_t j = 0; j < cb; ++j) out[j] += gr[ca + j];
      }
    }
  });
}

Var weighted_sum(const std::vector<std::pair<double, Var>>& terms) {
  if (terms.empty()) return constant(Tensor::scalar(0.0));
  Var total = scale(terms.front().second, terms.front().first);
  for (std::size_t i = 1; i < terms.size(); ++i) {
    total = add(total, scale(terms[i].second, terms[i].first));
  }
  return total;
}

BatchNormState::BatchNormState(std::size_t features, double momentum_, double epsilon_)
    : running_mean({features}, 0.0), running_var({features}, 1.0), momentum(momentum_), epsilon(epsilon_) {
  if (!(momentum > 0.0 && momentum < 1.0)) throw ConfigError("batch-norm momentum must lie in (0,1)");
  if (!(epsilon > 0.0)) throw ConfigError("batch-norm epsilon must be positive");
}

Var batchnorm(const Var& x, const Var& gamma, const Var& beta, BatchNormState& state, Mode mode,
              bool update_stats) {
  const Tensor& xv = x.value();
  require_rank2(xv, "batchnorm");
  const std::size_t batch = xv.rows(), m = xv.cols();
  if (gamma.value().size() != m || beta.value().size() != m || state.running_mean.size() != m) {
    throw ShapeError("batchnorm: parameter width does not match input " + to_string(xv.shape()));
  }
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();

  if (mode == Mode::Eval) {
    Tensor inv_std({m});
    for (std::size_t j = 0; j < m; ++j) inv_std[j] = 1.0 / std::sqrt(state.running_var[j] + state.epsilon);
    Tensor xhat({batch, m});
    Tensor y({batch, m});
    for (std::size_t r = 0; r < batch; ++r) {
      for (std::size_t j = 0; j < m; ++j) {
        const double h = (xv.at(r, j) - state.running_mean[j]) * inv_std[j];
        xhat.at(r, j) = h;
        y.at(r, j) = gv[j] * h + bv[j];
      }
    }
    return make_node(std::move(y), {x, gamma, beta},
                     [inv_std = std::move(inv_std), xhat = std::move(xhat)](Node& self) {
                       Node& xn = parent(self, 0);
                       Node& gn = parent(self, 1);
                       Node& bn = parent(self, 2);
                       const Tensor& g = self.grad;
                       const Tensor& gam = gn.value();
                       for (std::size_t r = 0; r < g.rows(); ++r) {
                         for (std::size_t j = 0; j < g.cols(); ++j) {
                           const double d = g.at(r, j);
                           if (xn.requires_grad) xn.ensure_grad().at(r, j) += d * gam[j] * inv_std[j];
                           if (gn.requires_grad) gn.ensure_grad()[j] += d * xhat.at(r, j);
                           if (bn.requires_grad) bn.ensure_grad()[j] += d;
                         }
                       }
                     });
  }

  if (batch < 2) throw ShapeError("batchnorm: train mode needs a batch of at least 2 rows");
  Tensor mean({m}, 0.0), var({m}, 0.0);
  for (std::size_t r = 0; r < batch; ++r) {
    for (std::size_t j = 0; j < m; ++j) mean[j] += xv.at(r, j);
  }
  for (std::size_t j = 0; j < m; ++j) mean[j] /= double(batch);
  for (std::size_t r = 0; r < batch; ++r) {
    for (std::size_t j = 0; j < m; ++j) {
      const double d = xv.at(r, j) - mean[j];
      var[j] += d * d;
    }
  }
  for (std::size_t j = 0; j < m; ++j) var[j] /= double(batch);

  Tensor inv_std({m});
  for (std::size_t j = 0; j < m; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + state.epsilon);
  Tensor xhat({batch, m});
  Tensor y({batch, m});
  for (std::size_t r = 0; r < batch; ++r) {
    for (std::size_t j = 0; j < m; ++j) {
      const double h = (xv.at(r, j) - mean[j]) * inv_std[j];
      xhat.at(r, j) = h;
      y.at(r, j) = gv[j] * h + bv[j];
    }
  }

  if (update_stats) {
    const double unbias = double(batch) / double(batch - 1);
    for (std::size_t j = 0; j < m; ++j) {
      state.running_mean[j] = (1.0 - state.momentum) * state.running_mean[j] + state.momentum * mean[j];
      state.running_var[j] = (1.0 - state.momentum) * state.running_var[j] + state.momentum * var[j] * unbias;
    }
  }

  return make_node(std::move(y), {x, gamma, beta},
                   [inv_std = std::move(inv_std), xhat = std::move(xhat)](Node& self) {
                     Node& xn = parent(self, 0);
                     Node& gn = parent(self, 1);
                     Node& bn = parent(self, 2);
                     const Tensor& g = self.grad;
                     const std::size_t rows = g.rows(), cols = g.cols();
                     const Tensor& gam = gn.value();
                     std::vector<double> sum_g(cols, 0.0), sum_gx(cols, 0.0);
                     for (std::size_t r = 0; r < rows; ++r) {
                       for (std::size_t j = 0; j < cols; ++j) {
                         sum_g[j] += g.at(r, j);
                         sum_gx[j] += g.at(r, j) * xhat.at(r, j);
                       }
                     }
                     if (gn.requires_grad) {
                       auto dg = gn.ensure_grad().data();
                       for (std::size_t j = 0; j < cols; ++j) dg[j] += sum_gx[j];
                     }
                     if (bn.requires_grad) {
                       auto db = bn.ensure_grad().data();
                       for (std::size_t j = 0; j < cols; ++j) db[j] += sum_g[j];
                     }
                     if (xn.requires_grad) {
                       Tensor& dx = xn.ensure_grad();
                       const double n = double(rows);
                       for (std::size_t r = 0; r < rows; ++r) {
                         for (std::size_t j = 0; j < cols; ++j) {
                           dx.at(r, j) += gam[j] * inv_std[j] / n *
                                          (n * g.at(r, j) - sum_g[j] - xhat.at(r, j) * sum_gx[j]);
                         }
                       }
                     }
                   });
}

Var dropout(const Var& x, double rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (mode == Mode::Eval || rate == 0.0) {
    return make_node(x.value(), {x}, [](Node& self) { accumulate(parent(self, 0), self.grad.data()); });
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor mask(x.value().shape());
  Tensor y = x.value();
  for (std::size_t i = 0; i < y.size(); ++i) {
    mask[i] = u(rng) < rate ? 0.0 : keep_scale;
    y[i] *= mask[i];
  }
  return make_node(std::move(y), {x}, [mask = std::move(mask)](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto g = self.grad.data();
    auto out = p.ensure_grad().data();
    for (std::size_t i = 0; i < g.size(); ++i) out[i] += g[i] * mask[i];
  });
}

namespace {

void require_rows(const Tensor& a, const Tensor& b, const char* what) {
  require_same_shape(a, b, what);
  require_rank2(a, what);
  if (a.rows() == 0) throw ShapeError(std::string(what) + ": empty batch");
}

}  // namespace

Var l2_loss(const Var& a, const Var& b) {
  require_rows(a.value(), b.value(), "l2_loss");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const double n = double(av.rows());
  double total = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    total += d * d;
  }
  return make_node(Tensor::scalar(total / n), {a, b}, [n](Node& self) {
    Node& an = parent(self, 0);
    Node& bn = parent(self, 1);
    const double g = self.grad[0];
    const Tensor& av = an.value();
    const Tensor& bv = bn.value();
    for (std::size_t i = 0; i < av.size(); ++i) {
      const double d = 2.0 * (av[i] - bv[i]) / n * g;
      if (an.requires_grad) an.ensure_grad()[i] += d;
      if (bn.requires_grad) bn.ensure_grad()[i] -= d;
    }
  });
}

Var l2_norm_loss(const Var& a, const Var& b) {
  require_rows(a.value(), b.value(), "l2_norm_loss");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  Tensor norms({rows});
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      const double d = av.at(r, j) - bv.at(r, j);
      s += d * d;
    }
    norms[r] = std::sqrt(s);
    total += norms[r];
  }
  const double n = double(rows);
  return make_node(Tensor::scalar(total / n), {a, b}, [n, norms = std::move(norms)](Node& self) {
    Node& an = parent(self, 0);
    Node& bn = parent(self, 1);
    const double g = self.grad[0];
    const Tensor& av = an.value();
    const Tensor& bv = bn.value();
    for (std::size_t r = 0; r < av.rows(); ++r) {
      // Subgradient 0 at coincident rows.
      if (norms[r] == 0.0) continue;
      const double k = g / (n * norms[r]);
      for (std::size_t j = 0; j < av.cols(); ++j) {
        const double d = k * (av.at(r, j) - bv.at(r, j));
        if (an.requires_grad) an.ensure_grad().at(r, j) += d;
        if (bn.requires_grad) bn.ensure_grad().at(r, j) -= d;
      }
    }
  });
}

Var l1_loss(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "l1_loss");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.size() == 0) throw ShapeError("l1_loss: empty input");
  const double n = double(av.size());
  double total = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) total += std::abs(av[i] - bv[i]);
  return make_node(Tensor::scalar(total / n), {a, b}, [n](Node& self) {
    Node& an = parent(self, 0);
    Node& bn = parent(self, 1);
    const double g = self.grad[0] / n;
    const Tensor& av = an.value();
    const Tensor& bv = bn.value();
    for (std::size_t i = 0; i < av.size(); ++i) {
      const double diff = av[i] - bv[i];
      const double s = diff > 0.0 ? g : (diff < 0.0 ? -g : 0.0);
      if (an.requires_grad) an.ensure_grad()[i] += s;
      if (bn.requires_grad) bn.ensure_grad()[i] -= s;
    }
  });
}

Var bce_with_logit(const Var& logits, double target) {
  const Tensor& z = logits.value();
  if (z.size() == 0) throw ShapeError("bce_with_logit: empty input");
  const double n = double(z.size());
  double total = 0.0;
  for (double v : z.data()) total += std::max(v, 0.0) - v * target + std::log1p(std::exp(-std::abs(v)));
  return make_node(Tensor::scalar(total / n), {logits}, [n, target](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    const double g = self.grad[0] / n;
    auto in = p.value().data();
    auto out = p.ensure_grad().data();
    for (std::size_t i = 0; i < in.size(); ++i) {
      const double sig = in[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-in[i]))
                                      : std::exp(in[i]) / (1.0 + std::exp(in[i]));
      out[i] += g * (sig - target);
    }
  });
}

}  // namespace bodylift::ad
