// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "common/detection.hpp"
#include "common/image.hpp"
#include "runner/run_config.hpp"

namespace groupdet::runner {

// Each command writes its outputs under io.output, plus a snapshot of the
// resolved config, and returns a one-line summary.
std::string cmd_synth(const RunConfig& c);
std::string cmd_slice(const RunConfig& c);
std::string cmd_train(const RunConfig& c);
std::string cmd_eval(const RunConfig& c);
std::string cmd_predict(const RunConfig& c);
std::string cmd_render(const RunConfig& c);

// Dispatches by name; throws ConfigError for an unknown command.
std::string run_command(const std::string& name, const RunConfig& c);

nlohmann::json detections_to_json(const std::vector<Detection>& dets);
std::vector<Detection> detections_from_json(const nlohmann::json& j);

std::vector<TextLayerRecord> texts_from_json(const nlohmann::json& j);

// Box outlines with the score printed above each box.
void render_detections(Image& image, const std::vector<Detection>& dets, double min_score);

}  // namespace groupdet::runner
