// SPDX-License-Identifier: Apache-2.0

#include "scenechat/nn/tensor.hpp"

#include <unordered_set>

#include "scenechat/core/error.hpp"

namespace scenechat::nn {

Var Var::constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var Var::parameter(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

Var make_node(Matrix value, std::vector<Var> parents, std::function<void(Node&)> fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool any = false;
  for (const auto& p : parents) any = any || (p.defined() && p.requires_grad());
  if (any) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.shared());
    node->backward = std::move(fn);
  }
  return Var(std::move(node));
}

void backward(const Var& root) {
  if (!root.defined() || root.rows() != 1 || root.cols() != 1) {
    throw InvalidInput("backward() needs a defined 1x1 root");
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node(), 0}};
  seen.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent && parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->grad_buffer()(0, 0) += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && node->grad.size() != 0) node->backward(*node);
  }
  // Interior gradients are single-use; drop them so the graph can be reused.
  for (Node* node : order) {
    if (node->backward) node->grad.resize(0, 0);
  }
}

}  // namespace scenechat::nn
