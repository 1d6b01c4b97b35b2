#include "sola/autodiff/value.hpp"

#include <unordered_set>
#include <utility>

#include "sola/error.hpp"

namespace sola::ad {

Tensor& Node::ensure_grad() {
  if (grad.empty() && !data.empty()) grad = Tensor(data.rows(), data.cols());
  return grad;
}

Value::Value(Tensor data, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

double Value::item() const {
  if (size() != 1) {
    throw ContractError("item() on non-scalar " + node_->data.shape_string());
  }
  return node_->data[0];
}

std::vector<Node*> topological_order(const Node& root) {
  std::vector<Node*> order;
  std::unordered_set<const Node*> visited;
  // Explicit stack of (node, next-parent-index) to avoid deep recursion.
  std::vector<std::pair<Node*, std::size_t>> stack;
  auto* start = const_cast<Node*>(&root);
  if (!start->requires_grad) return order;
  stack.emplace_back(start, 0);
  visited.insert(start);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

void Value::backward() const {
  if (!node_) throw ContractError("backward() on an undefined Value");
  if (size() != 1) {
    throw ContractError("backward() requires a scalar root, got " +
                        node_->data.shape_string());
  }
  std::vector<Node*> order = topological_order(*node_);
  if (order.empty()) return;
  for (Node* n : order) {
    if (n->backward) {
      n->grad = Tensor(n->data.rows(), n->data.cols());
    }
  }
  node_->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) n->backward(*n);
  }
}

void Value::zero_grad() const {
  if (node_ && !node_->grad.empty()) node_->grad.fill(0.0);
}

Value make_result(Tensor data, const char* op, std::vector<Value> parents, BackwardFn fn) {
  Value out(std::move(data), false);
  const NodePtr& node = out.node();
  node->op = op;
  bool needs = false;
  for (const Value& p : parents) needs = needs || p.requires_grad();
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (Value& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(fn);
  }
  return out;
}

}  // namespace sola::ad
