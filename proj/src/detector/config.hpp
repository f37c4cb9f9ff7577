// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "fusion/fusion.hpp"

namespace groupdet::detector {

enum class BackbonePreset {
  kFull,  // 50-layer bottleneck residual network
  kTiny,  // 9 conv layers, same stride layout
};

struct DetectorConfig {
  BackbonePreset backbone = BackbonePreset::kTiny;
  std::vector<double> anchor_sizes{32, 64, 128, 256, 512};
  std::vector<double> anchor_ratios{0.5, 1.0, 2.0, 4.0, 8.0};  // h / w
  int resize_short = 800;
  int resize_long = 1300;

  fusion::FusionMode fusion = fusion::FusionMode::kNone;
  int text_dim = 16;
  std::string text_encoder = "hashed_ngram";
  std::string text_encoder_path;

  int n_classes = 2;  // background + group
  double rpn_pos_iou = 0.7;
  double rpn_neg_iou = 0.3;
  double roi_pos_iou = 0.5;
  double rpn_nms_iou = 0.7;
  double final_nms_iou = 0.5;
  double score_thresh = 0.05;
  int max_dets = 100;
  int rpn_pre_nms_train = 2000, rpn_post_nms_train = 1000;
  int rpn_pre_nms_test = 1000, rpn_post_nms_test = 1000;
  int rpn_batch = 256;
  double rpn_pos_fraction = 0.5;
  int roi_batch = 512;
  double roi_pos_fraction = 0.25;

  // SGD with momentum, step decay every lr_step_epochs.
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double lr_decay = 0.1;
  int lr_step_epochs = 10;
  int epochs = 72;
  int batch = 2;
  int warmup_iters = 500;
  double warmup_ratio = 0.001;
  double grad_clip = 0.0;  // max global L2 norm, 0 disables
  int max_iters = 0;       // 0: no cap
  double flip_prob = 0.5;
  std::uint64_t seed = 0;

  static constexpr int kLevels = 5;
  static constexpr int kStrides[kLevels] = {4, 8, 16, 32, 64};

  int anchors_per_cell() const { return static_cast<int>(anchor_ratios.size()); }

  // Throws ConfigError.
  void validate() const;
};

std::string backbone_name(BackbonePreset p);
BackbonePreset parse_backbone(const std::string& name);

// Serialized form; from_json rejects unknown keys and fills missing ones with
// defaults.
nlohmann::json to_json(const DetectorConfig& c);
DetectorConfig detector_config_from_json(const nlohmann::json& j);

// Learning rate for a 0-based epoch and global iteration.
double learning_rate(const DetectorConfig& c, int epoch, long long iteration);

}  // namespace groupdet::detector
