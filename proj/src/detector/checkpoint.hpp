// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "detector/model.hpp"

namespace groupdet::detector {

// Single-file weight container: "GDCK", format version, the config echo as
// JSON, then named tensors. Integers and doubles are little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  DetectorConfig config;
  std::map<std::string, nn::Tensor> tensors;
};

void save_checkpoint(const Detector& detector, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Copies tensors into the detector. Throws WeightMismatch when a name is
// missing, unexpected, or has a different shape.
void apply_weights(Detector& detector, const std::map<std::string, nn::Tensor>& tensors);

// Rebuilds the detector from the stored config and loads its weights.
std::unique_ptr<Detector> load_detector(const std::filesystem::path& path);

}  // namespace groupdet::detector
