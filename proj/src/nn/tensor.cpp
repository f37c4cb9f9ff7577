// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#include "nn/tensor.hpp"

#include <unordered_set>

#include "common/error.hpp"

namespace groupdet::nn {

std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

bool grad_enabled() { return g_grad_enabled; }
NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var constant(Tensor t) {
  auto n = std::make_shared<Node>();
  n->value = std::move(t);
  return n;
}

Var parameter(Tensor t) {
  auto n = std::make_shared<Node>();
  n->value = std::move(t);
  n->requires_grad = true;
  return n;
}

namespace {

void topo_order(const Var& root, std::vector<Node*>& order) {
  std::unordered_set<Node*> visited;
  // Iterative DFS; graphs get deep enough to make recursion uncomfortable.
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child && child->requires_grad && visited.insert(child).second)
        stack.push_back({child, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
}

}  // namespace

void backward(const Var& root) {
  if (root->value.numel() != 1) throw ShapeMismatch("backward root must be a scalar");
  if (!root->requires_grad) return;
  std::vector<Node*> order;
  topo_order(root, order);
  root->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad.numel() == n->value.numel()) n->backward_fn(*n);
  }
}

void release_graph(const Var& root) {
  std::vector<Node*> order;
  topo_order(root, order);
  for (Node* n : order) {
    if (!n->backward_fn) continue;  // leaves keep their state
    n->backward_fn = nullptr;
    n->inputs.clear();
    n->grad = Tensor();
  }
}

}  // namespace groupdet::nn
