#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tvnet/core/tensor.hpp"

namespace tvnet {

// One node of the dynamically-built computation graph. Ops allocate a node
// per output; `backprop` reads this node's grad and accumulates into the
// parents. Parents are owned via shared_ptr, so a loss variable keeps its
// whole subgraph alive and everything is freed when it goes out of scope.
struct GraphNode {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<GraphNode>> parents;
  std::function<void(GraphNode&)> backprop;

  Tensor& grad_buffer() {
    if (grad.empty()) grad = Tensor::zeros(value.shape());
    return grad;
  }
};

inline void accumulate_grad(GraphNode& node, const Tensor& g) {
  if (!node.requires_grad) return;
  node.grad_buffer().add_(g);
}

class Var {
 public:
  Var() = default;

  static Var leaf(Tensor value, bool requires_grad) {
    Var v;
    v.node_ = std::make_shared<GraphNode>();
    v.node_->value = std::move(value);
    v.node_->requires_grad = requires_grad;
    return v;
  }
  static Var constant(Tensor value) { return leaf(std::move(value), false); }

  static Var from_op(Tensor value, std::vector<Var> inputs,
                     std::function<void(GraphNode&)> backprop) {
    Var v;
    v.node_ = std::make_shared<GraphNode>();
    v.node_->value = std::move(value);
    bool needs = false;
    for (const Var& in : inputs) needs = needs || in.requires_grad();
    v.node_->requires_grad = needs;
    if (needs) {
      v.node_->parents.reserve(inputs.size());
      for (Var& in : inputs) v.node_->parents.push_back(in.node_);
      v.node_->backprop = std::move(backprop);
    }
    return v;
  }

  bool defined() const { return node_ != nullptr; }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  const Tensor& value() const { return node_->value; }
  Tensor& value_mut() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }

  Tensor& grad() { return node_->grad_buffer(); }
  const Tensor& grad_const() const { return node_->grad; }
  void zero_grad() {
    if (node_ && !node_->grad.empty()) node_->grad.fill(0.0);
  }

  GraphNode* node() const { return node_.get(); }
  std::shared_ptr<GraphNode> node_ptr() const { return node_; }

  double item() const {
    check(node_ && node_->value.numel() == 1, "item(): variable is not a scalar");
    return node_->value[0];
  }

  // Reverse pass from a scalar output. Seeds d(out)/d(out) = 1 and walks the
  // graph once in reverse topological order.
  void backward() const {
    check(node_ != nullptr, "backward(): undefined variable");
    check(node_->value.numel() == 1, "backward(): output must be scalar");
    if (!node_->requires_grad) return;
    node_->grad_buffer().fill(1.0);

    std::vector<GraphNode*> order;
    std::unordered_set<GraphNode*> visited;
    std::vector<std::pair<GraphNode*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    visited.insert(node_.get());
    while (!stack.empty()) {
      auto& [n, next] = stack.back();
      if (next < n->parents.size()) {
        GraphNode* p = n->parents[next++].get();
        if (p->requires_grad && visited.insert(p).second) {
          stack.emplace_back(p, 0);
        }
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      GraphNode* n = *it;
      if (n->backprop) n->backprop(*n);
    }
  }

 private:
  std::shared_ptr<GraphNode> node_;
};

}  // namespace tvnet
