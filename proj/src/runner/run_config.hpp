// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "detector/config.hpp"
#include "slicer/slicer.hpp"
#include "synth/synth.hpp"

namespace groupdet::runner {

// Relative paths in the data and io sections resolve against io.output.
struct DataSection {
  std::string drafts = "corpus/drafts";
  std::string images = "corpus/images";
  std::string dataset = "dataset";
  slicer::SplitRatios ratios;
  std::uint64_t seed = 0;
  bool require_images = false;
};

struct EvalSection {
  std::string split = "test";
  std::string checkpoint = "train/model.gdck";
  double render_min_score = 0.3;
};

struct IoSection {
  std::string output = "runs/default";
  std::string image;       // predict/render input
  std::string texts;       // optional text records for predict
  std::string detections;  // predict output, render input
  std::string render;      // render output
};

struct RunConfig {
  DataSection data;
  synth::SynthSpec synth;
  detector::DetectorConfig model;
  EvalSection eval;
  IoSection io;

  std::filesystem::path resolve(const std::string& p) const;
};

nlohmann::json to_json(const RunConfig& c);
// Strict: unknown keys and ill-typed values throw ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j);

// Applies one `section.key=value` override; the value is read as JSON when it
// parses, as a plain string otherwise.
void apply_override(nlohmann::json& j, const std::string& assignment);

// File (may be empty for all defaults), then overrides, then GROUPDET_OUT.
RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides,
                          bool use_env = true);

}  // namespace groupdet::runner
