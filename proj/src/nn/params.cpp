// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#include "nn/params.hpp"

#include <cmath>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace groupdet::nn {

const Var& ParamStore::create(const std::string& name, std::vector<int> shape, Init init) {
  if (params_.count(name)) throw Error(ErrorKind::kInternal, "duplicate parameter " + name);
  Tensor t(std::move(shape));
  Rng rng(splitmix64(seed_) ^ fnv1a64(name));
  switch (init) {
    case Init::kZeros:
      break;
    case Init::kHeNormal: {
      // fan_in = product of all dims but the first
      std::size_t fan_in = 1;
      for (std::size_t i = 1; i < t.shape.size(); ++i) fan_in *= t.shape[i];
      const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
      for (double& v : t.data) v = rng.normal(0.0, std);
      break;
    }
    case Init::kNormal001:
      for (double& v : t.data) v = rng.normal(0.0, 0.01);
      break;
    case Init::kNormal0001:
      for (double& v : t.data) v = rng.normal(0.0, 0.001);
      break;
  }
  return params_[name] = parameter(std::move(t));
}

const Var& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error(ErrorKind::kInternal, "no parameter " + name);
  return it->second;
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [k, v] : params_) n += v->value.numel();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [k, v] : params_) v->grad = Tensor();
}

}  // namespace groupdet::nn
