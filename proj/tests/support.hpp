// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "common/rng.hpp"

#ifndef GROUPDET_FIXTURES
#error "GROUPDET_FIXTURES must point at tests/fixtures"
#endif

namespace groupdet::testing {

inline std::filesystem::path fixtures() { return GROUPDET_FIXTURES; }

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Fresh, empty scratch directory under the build tree.
inline std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("groupdet_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace groupdet::testing
