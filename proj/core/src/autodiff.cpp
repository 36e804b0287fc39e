#include "bodylift/autodiff.hpp"

#include <unordered_set>

#include "bodylift/error.hpp"

namespace bodylift::ad {

Tensor& Node::ensure_grad() {
  if (!has_grad()) grad = Tensor(value().shape());
  return grad;
}

Tensor Var::grad() const {
  if (node_->has_grad()) return node_->grad;
  return Tensor(node_->value().shape());
}

void Var::backward() const {
  if (!node_) throw Error("backward on empty Var");
  if (node_->value().size() != 1) {
    throw ShapeError("backward requires a scalar root, got " + to_string(node_->value().shape()));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  // Grads left on reused nodes by an earlier sweep must not leak into this one.
  for (Node* n : order) n->grad = Tensor();
  node_->ensure_grad();
  node_->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->has_grad()) n->backward_fn(*n);
  }
}

Var leaf(Tensor value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->own = std::move(value);
  n->requires_grad = requires_grad;
  return Var(std::move(n));
}

Var param(Parameter& p, bool trainable) {
  auto n = std::make_shared<Node>();
  n->external = &p.value;
  n->requires_grad = trainable;
  if (trainable) {
    if (p.grad.shape() != p.value.shape()) p.zero_grad();
    Parameter* target = &p;
    n->backward_fn = [target](Node& self) {
      auto g = self.grad.data();
      auto out = target->grad.data();
      for (std::size_t i = 0; i < g.size(); ++i) out[i] += g[i];
    };
  }
  return Var(std::move(n));
}

Var detach(const Var& x) {
  auto n = std::make_shared<Node>();
  n->external = &x.value();
  // Keep the source alive so the external pointer stays valid.
  n->parents.push_back(x.shared());
  n->requires_grad = false;
  return Var(std::move(n));
}

Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->own = std::move(value);
  for (auto& p : parents) {
    n->requires_grad = n->requires_grad || p.requires_grad();
    n->parents.push_back(p.shared());
  }
  if (n->requires_grad) n->backward_fn = std::move(backward);
  return Var(std::move(n));
}

}  // namespace bodylift::ad
