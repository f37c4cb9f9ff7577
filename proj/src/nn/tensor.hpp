// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

namespace groupdet::nn {

// Dense row-major array of doubles.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, double fill = 0.0) : shape(std::move(s)) {
    data.assign(count(shape), fill);
  }

  static std::size_t count(const std::vector<int>& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1},
                           [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
  }

  std::size_t numel() const { return data.size(); }
  int dim(std::size_t i) const { return shape.at(i); }
  bool empty() const { return data.empty(); }

  double* ptr() { return data.data(); }
  const double* ptr() const { return data.data(); }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  // Index helper for 3-D tensors (channels, rows, cols).
  double& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
  }
  double at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
  }

  bool operator==(const Tensor&) const = default;
};

std::string shape_str(const std::vector<int>& shape);

// Graph node. A node records its inputs and a backward closure only when at
// least one input requires a gradient.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  // Allocates the gradient buffer on first use.
  Tensor& grad_buffer() {
    if (grad.data.size() != value.data.size()) grad = Tensor(value.shape);
    return grad;
  }
};

using Var = std::shared_ptr<Node>;

// While a guard is alive on the current thread, ops record no graph edges.
bool grad_enabled();
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

Var constant(Tensor t);
Var parameter(Tensor t);

// Seeds d(root)/d(root) = 1 (root must hold a single value) and runs the
// recorded closures in reverse topological order. Gradients accumulate into
// every reachable node that requires one.
void backward(const Var& root);

// Drops recorded graph edges below `root` so intermediate buffers are freed.
void release_graph(const Var& root);

}  // namespace groupdet::nn
