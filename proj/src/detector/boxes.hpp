// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <vector>

#include "common/geometry.hpp"
#include "common/rng.hpp"

namespace groupdet::detector {

struct LevelShape {
  int rows = 0, cols = 0;
};

// Anchors of one pyramid level, ordered cell-major: index (y*cols + x)*A + a.
// At each cell center ((x + 0.5) * stride, (y + 0.5) * stride) anchor a has
// w = size / sqrt(ratio_a), h = size * sqrt(ratio_a).
std::vector<Box> level_anchors(LevelShape shape, int stride, double size,
                               const std::vector<double>& ratios);

std::vector<std::vector<Box>> build_anchors(const std::vector<LevelShape>& shapes,
                                            const std::vector<int>& strides,
                                            const std::vector<double>& sizes,
                                            const std::vector<double>& ratios);

using Deltas = std::array<double, 4>;

// Center/size offsets of `gt` relative to `ref`, divided by `stds`.
Deltas encode_box(const Box& gt, const Box& ref, const Deltas& stds = {1, 1, 1, 1});
// Inverse of encode_box; log-size deltas are clamped to log(1000/16).
Box decode_box(const Deltas& d, const Box& ref, const Deltas& stds = {1, 1, 1, 1});

struct Assignment {
  std::vector<int> labels;       // 1 positive, 0 negative, -1 ignored
  std::vector<int> matched_gt;   // gt index for positives, -1 otherwise
  std::vector<double> max_iou;
};

// Positive when IoU >= pos_iou with some gt, or (match_low_quality) when it
// is a highest-IoU anchor for some gt with positive overlap; negative when
// the maximum IoU is below neg_iou; ignored otherwise.
Assignment assign_targets(const std::vector<Box>& anchors, const std::vector<Box>& gts,
                          double pos_iou, double neg_iou, bool match_low_quality = true);

// Keeps at most `num` labelled entries, of which at most num*pos_fraction are
// positive; the rest are relabelled -1. Selection is uniform under `rng`.
void subsample_labels(std::vector<int>& labels, int num, double pos_fraction, Rng& rng);

// Greedy non-maximum suppression; returns kept indices in visiting order.
// Candidates are visited by descending score, ties by lower index; a box is
// dropped when its IoU with an already kept box exceeds `iou_thresh`.
// A non-zero `max_keep` stops after that many boxes are kept.
std::vector<std::size_t> nms(const std::vector<Box>& boxes, const std::vector<double>& scores,
                             double iou_thresh, std::size_t max_keep = 0);

}  // namespace groupdet::detector
