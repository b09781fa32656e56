#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "supermask/dense_array.hpp"

namespace supermask {

enum class OpKind {
  leaf,
  matmul,
  linear,
  add,
  elementwise_mul,
  scale,
  scale_constant,
  conv2d,
  relu,
  maxpool2d,
  reshape,
  channel_bias,
  mask_sample,
  softmax_cross_entropy,
  sum,
};

template <typename Scalar>
struct TapeNode {
  DenseArray<Scalar> value;
  DenseArray<Scalar> grad;  // allocated on first accumulation
  bool requires_grad = false;
  OpKind op = OpKind::leaf;
  std::vector<std::shared_ptr<TapeNode>> inputs;
  // Reads this->grad and accumulates into the inputs' grads.
  std::function<void(TapeNode&)> backward_rule;

  DenseArray<Scalar>& grad_buffer() {
    if (grad.empty()) grad = DenseArray<Scalar>::zeros(value.shape());
    return grad;
  }
};

/// Shared handle to a node of the dynamic tape. Copies alias the same node.
template <typename Scalar>
class Var {
 public:
  using Node = TapeNode<Scalar>;

  Var() = default;

  explicit Var(DenseArray<Scalar> value, bool requires_grad = false)
      : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  static Var parameter(DenseArray<Scalar> value) { return Var(std::move(value), true); }
  static Var constant(DenseArray<Scalar> value) { return Var(std::move(value), false); }

  bool defined() const { return static_cast<bool>(node_); }
  const DenseArray<Scalar>& value() const { return node_->value; }
  DenseArray<Scalar>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  Index size() const { return node_->value.size(); }
  OpKind op() const { return node_->op; }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  const DenseArray<Scalar>& grad() const { return node_->grad; }
  DenseArray<Scalar>& grad_buffer() { return node_->grad_buffer(); }
  void zero_grad() { node_->grad = DenseArray<Scalar>(); }

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }

  /// Records an op result. The rule is dropped when no input needs a gradient.
  static Var record(OpKind op, DenseArray<Scalar> value, std::vector<Var> inputs,
                    std::function<void(Node&)> rule) {
    Var out(std::move(value), false);
    out.node_->op = op;
    for (const Var& in : inputs)
      if (in.requires_grad()) out.node_->requires_grad = true;
    if (out.node_->requires_grad) {
      out.node_->inputs.reserve(inputs.size());
      for (const Var& in : inputs) out.node_->inputs.push_back(in.node_);
      out.node_->backward_rule = std::move(rule);
    }
    return out;
  }

 private:
  std::shared_ptr<Node> node_;
};

/// Reverse sweep from a scalar. Leaf gradients accumulate; callers zero them.
template <typename Scalar>
void backward(const Var<Scalar>& loss) {
  using Node = TapeNode<Scalar>;
  if (loss.size() != 1)
    throw ContractError("backward requires a scalar, got shape " + shape_string(loss.shape()));
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order without recursion depth limits.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node(), 0}};
  visited.insert(loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Interior gradients belong to this sweep only.
  for (Node* node : order)
    if (!node->inputs.empty()) node->grad = DenseArray<Scalar>();
  loss.node()->grad_buffer()[0] += Scalar(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_rule && !node->grad.empty()) node->backward_rule(*node);
  }
}

}  // namespace supermask
