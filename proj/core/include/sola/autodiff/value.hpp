#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "sola/autodiff/tensor.hpp"

namespace sola::ad {

struct Node;
using NodePtr = std::shared_ptr<Node>;
using BackwardFn = std::function<void(Node&)>;

/// One entry of the computation record. Interior nodes own a backward rule
/// that reads `grad` and accumulates into `parents`.
struct Node {
  Tensor data;
  Tensor grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<NodePtr> parents;
  BackwardFn backward;

  Tensor& ensure_grad();
};

/// Handle to a node in the reverse-mode computation record. Copies share the
/// node; a Value is valid only on the thread that built it.
class Value {
 public:
  Value() = default;
  explicit Value(Tensor data, bool requires_grad = false);

  static Value constant(Tensor data) { return Value(std::move(data), false); }
  static Value variable(Tensor data) { return Value(std::move(data), true); }
  static Value scalar(double v) { return constant(Tensor::scalar(v)); }

  bool defined() const noexcept { return node_ != nullptr; }
  const Tensor& data() const { return node_->data; }
  /// Direct write access for optimizers and tests; bypasses recording.
  Tensor& mutable_data() { return node_->data; }

  /// Gradient, allocated as zeros on first access.
  const Tensor& grad() const { return node_->ensure_grad(); }
  bool has_grad() const noexcept { return node_ && !node_->grad.empty(); }

  std::size_t rows() const { return node_->data.rows(); }
  std::size_t cols() const { return node_->data.cols(); }
  std::size_t size() const { return node_->data.size(); }
  double item() const;
  double operator()(std::size_t r, std::size_t c) const { return node_->data(r, c); }

  bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
  const char* op_name() const { return node_->op; }

  /// Accumulates d(this)/d(leaf) into every reachable leaf that requires a
  /// gradient. Interior gradients are reset on each call, so repeated calls
  /// add up only at the leaves.
  void backward() const;

  void zero_grad() const;

  const NodePtr& node() const noexcept { return node_; }
  static Value from_node(NodePtr n) {
    Value v;
    v.node_ = std::move(n);
    return v;
  }

 private:
  NodePtr node_;
};

/// Builds the result node of an op. The backward rule is dropped when no
/// parent needs a gradient.
Value make_result(Tensor data, const char* op, std::vector<Value> parents, BackwardFn fn);

/// Nodes reachable from `root` that require gradients, parents first.
std::vector<Node*> topological_order(const Node& root);

}  // namespace sola::ad
