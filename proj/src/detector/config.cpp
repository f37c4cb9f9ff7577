// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#include "detector/config.hpp"

#include <cmath>
#include <set>

#include "common/error.hpp"

namespace groupdet::detector {

using nlohmann::json;

std::string backbone_name(BackbonePreset p) { return p == BackbonePreset::kFull ? "full" : "tiny"; }

BackbonePreset parse_backbone(const std::string& name) {
  if (name == "full") return BackbonePreset::kFull;
  if (name == "tiny") return BackbonePreset::kTiny;
  throw ConfigError("unknown backbone_preset '" + name + "'");
}

namespace {

// Visits every serializable field; `v` receives (key, member reference).
template <class Config, class Visitor>
void visit_fields(Config& c, Visitor&& v) {
  v("anchor_sizes", c.anchor_sizes);
  v("anchor_ratios", c.anchor_ratios);
  v("resize_short", c.resize_short);
  v("resize_long", c.resize_long);
  v("text_dim", c.text_dim);
  v("text_encoder", c.text_encoder);
  v("text_encoder_path", c.text_encoder_path);
  v("n_classes", c.n_classes);
  v("rpn_pos_iou", c.rpn_pos_iou);
  v("rpn_neg_iou", c.rpn_neg_iou);
  v("roi_pos_iou", c.roi_pos_iou);
  v("rpn_nms_iou", c.rpn_nms_iou);
  v("final_nms_iou", c.final_nms_iou);
  v("score_thresh", c.score_thresh);
  v("max_dets", c.max_dets);
  v("rpn_pre_nms_train", c.rpn_pre_nms_train);
  v("rpn_post_nms_train", c.rpn_post_nms_train);
  v("rpn_pre_nms_test", c.rpn_pre_nms_test);
  v("rpn_post_nms_test", c.rpn_post_nms_test);
  v("rpn_batch", c.rpn_batch);
  v("rpn_pos_fraction", c.rpn_pos_fraction);
  v("roi_batch", c.roi_batch);
  v("roi_pos_fraction", c.roi_pos_fraction);
  v("lr", c.lr);
  v("momentum", c.momentum);
  v("weight_decay", c.weight_decay);
  v("lr_decay", c.lr_decay);
  v("lr_step_epochs", c.lr_step_epochs);
  v("epochs", c.epochs);
  v("batch", c.batch);
  v("warmup_iters", c.warmup_iters);
  v("warmup_ratio", c.warmup_ratio);
  v("grad_clip", c.grad_clip);
  v("max_iters", c.max_iters);
  v("flip_prob", c.flip_prob);
  v("seed", c.seed);
}

bool in_open_unit(double v) { return v > 0 && v < 1; }

}  // namespace

void DetectorConfig::validate() const {
  if (anchor_sizes.size() != static_cast<std::size_t>(kLevels))
    throw ConfigError("anchor_sizes needs one size per pyramid level (5)");
  for (double s : anchor_sizes)
    if (!(s > 0)) throw ConfigError("anchor sizes must be positive");
  if (anchor_ratios.empty()) throw ConfigError("anchor_ratios must not be empty");
  for (double r : anchor_ratios)
    if (!(r > 0)) throw ConfigError("anchor ratios must be positive");
  if (resize_short <= 0 || resize_long < resize_short)
    throw ConfigError("resize must satisfy 0 < short <= long");
  if (text_dim < 1) throw ConfigError("text_dim must be >= 1");
  if (n_classes != 2) throw ConfigError("only the single 'group' category is supported (n_classes = 2)");
  for (double t : {rpn_pos_iou, rpn_neg_iou, roi_pos_iou, rpn_nms_iou, final_nms_iou, score_thresh})
    if (!in_open_unit(t)) throw ConfigError("thresholds must lie in (0, 1)");
  if (rpn_neg_iou > rpn_pos_iou) throw ConfigError("rpn_neg_iou must not exceed rpn_pos_iou");
  if (max_dets <= 0 || rpn_batch <= 0 || roi_batch <= 0 || batch <= 0 || epochs <= 0)
    throw ConfigError("counts must be positive");
  if (rpn_pre_nms_train <= 0 || rpn_post_nms_train <= 0 || rpn_pre_nms_test <= 0 || rpn_post_nms_test <= 0)
    throw ConfigError("proposal counts must be positive");
  if (!in_open_unit(rpn_pos_fraction) || !in_open_unit(roi_pos_fraction))
    throw ConfigError("positive fractions must lie in (0, 1)");
  if (!(lr > 0) || momentum < 0 || momentum >= 1 || weight_decay < 0 || !(lr_decay > 0) ||
      lr_step_epochs <= 0)
    throw ConfigError("invalid optimizer settings");
  if (warmup_iters < 0 || !(warmup_ratio > 0) || warmup_ratio > 1 || grad_clip < 0 || max_iters < 0)
    throw ConfigError("invalid schedule settings");
  if (flip_prob < 0 || flip_prob > 1) throw ConfigError("flip_prob must lie in [0, 1]");
}

json to_json(const DetectorConfig& c) {
  json j;
  j["backbone_preset"] = backbone_name(c.backbone);
  j["fusion"] = fusion::fusion_mode_name(c.fusion);
  visit_fields(c, [&](const char* key, const auto& member) { j[key] = member; });
  return j;
}

DetectorConfig detector_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("model config must be an object");
  DetectorConfig c;
  std::set<std::string> known{"backbone_preset", "fusion"};
  try {
    if (j.contains("backbone_preset")) c.backbone = parse_backbone(j.at("backbone_preset").get<std::string>());
    if (j.contains("fusion")) c.fusion = fusion::parse_fusion_mode(j.at("fusion").get<std::string>());
    visit_fields(c, [&](const char* key, auto& member) {
      known.insert(key);
      if (j.contains(key)) j.at(key).get_to(member);
    });
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw ConfigError("unknown model config key '" + key + "'");
  c.validate();
  return c;
}

double learning_rate(const DetectorConfig& c, int epoch, long long iteration) {
  double lr = c.lr * std::pow(c.lr_decay, epoch / c.lr_step_epochs);
  if (iteration < c.warmup_iters) {
    const double k = static_cast<double>(iteration) / c.warmup_iters;
    lr *= c.warmup_ratio + (1.0 - c.warmup_ratio) * k;
  }
  return lr;
}

}  // namespace groupdet::detector
