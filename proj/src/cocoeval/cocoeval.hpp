// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include <json.hpp>

#include "common/detection.hpp"
#include "slicer/slicer.hpp"

namespace groupdet::cocoeval {

// COCO box AP. Buckets without ground truth report -1.
struct EvalReport {
  double ap = -1, ap50 = -1, ap75 = -1, ap_s = -1, ap_m = -1, ap_l = -1;
  bool operator==(const EvalReport&) const = default;
};

nlohmann::json to_json(const EvalReport& r);
EvalReport report_from_json(const nlohmann::json& j);

using DetectionsByImage = std::map<std::int64_t, std::vector<Detection>>;

struct AreaRange {
  double lo, hi;  // half-open [lo, hi)
};

inline constexpr AreaRange kAreaAll{0.0, 1e10};
inline constexpr AreaRange kAreaSmall{0.0, 32.0 * 32.0};
inline constexpr AreaRange kAreaMedium{32.0 * 32.0, 96.0 * 96.0};
inline constexpr AreaRange kAreaLarge{96.0 * 96.0, 1e10};

inline constexpr int kMaxDetsPerImage = 100;

// IoU threshold k of the ten 0.50:0.05:0.95 thresholds, as the decimal
// (50 + 5k) / 100.
inline double iou_threshold(int k) { return (50.0 + 5.0 * k) / 100.0; }

// Per-threshold AP for one area range, averaged over categories with ground
// truth; -1 when no category has ground truth in the range.
double average_precision(const slicer::DatasetManifest& gts, const DetectionsByImage& dets,
                         double iou_thresh, AreaRange area);

// Throws UnknownImageId when `dets` names an image absent from `gts`.
EvalReport evaluate(const slicer::DatasetManifest& gts, const DetectionsByImage& dets);

}  // namespace groupdet::cocoeval
