#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "bodylift/tensor.hpp"

namespace bodylift::ad {

enum class Mode { Train, Eval };

/// A trainable tensor that outlives any single graph. Graphs reference the
/// value in place and accumulate into `grad` during backward.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad = Tensor(value.shape()); }
};

struct Node {
  Tensor own;
  const Tensor* external = nullptr;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into parents that require grad.
  std::function<void(Node&)> backward_fn;

  const Tensor& value() const noexcept { return external ? *external : own; }
  // A default Tensor has rank-0 shape but no storage, so compare sizes too.
  bool has_grad() const noexcept {
    return grad.shape() == value().shape() && grad.size() == value().size();
  }
  Tensor& ensure_grad();
};

/// Handle to a graph node. Cheap to copy; copies alias the same node.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value(); }
  const Shape& shape() const { return node_->value().shape(); }
  /// Gradient after backward(); zero tensor of matching shape if none flowed here.
  Tensor grad() const;
  bool requires_grad() const { return node_ && node_->requires_grad; }
  double item() const { return value().item(); }

  /// Reverse-mode sweep from this scalar. Seeds d(self)=1 and visits every
  /// reachable node once in reverse topological order.
  void backward() const;

  Node* node() const noexcept { return node_.get(); }
  const std::shared_ptr<Node>& shared() const noexcept { return node_; }
  explicit operator bool() const noexcept { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node> node_;
};

/// Leaf holding a copy of `value`. `requires_grad` leaves collect gradient in Var::grad().
Var leaf(Tensor value, bool requires_grad = false);
inline Var constant(Tensor value) { return leaf(std::move(value), false); }

/// Leaf that reads `p.value` in place. When `trainable`, backward adds into `p.grad`;
/// otherwise the parameter behaves as a constant (frozen/detached use).
Var param(Parameter& p, bool trainable = true);

/// Same value, cut from the graph.
Var detach(const Var& x);

/// Builds an interior node. `backward` receives the node whose grad is final.
Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward);

}  // namespace bodylift::ad
