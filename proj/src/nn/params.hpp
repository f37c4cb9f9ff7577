// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nn/tensor.hpp"

namespace groupdet::nn {

enum class Init { kZeros, kHeNormal, kNormal001, kNormal0001 };

// Named trainable tensors. Each tensor is initialized from a generator seeded
// by (model seed, name), so adding or removing modules never perturbs the
// initial values of the others.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  const Var& create(const std::string& name, std::vector<int> shape, Init init);
  const Var& get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  const std::map<std::string, Var>& all() const { return params_; }
  std::size_t parameter_count() const;

  void zero_grad();

 private:
  std::uint64_t seed_;
  std::map<std::string, Var> params_;
};

}  // namespace groupdet::nn
