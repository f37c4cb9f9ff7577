// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#include "detector/boxes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "common/error.hpp"

namespace groupdet::detector {

std::vector<Box> level_anchors(LevelShape shape, int stride, double size,
                               const std::vector<double>& ratios) {
  std::vector<Box> out;
  out.reserve(static_cast<std::size_t>(shape.rows) * shape.cols * ratios.size());
  std::vector<std::pair<double, double>> wh;
  for (double r : ratios) {
    const double s = std::sqrt(r);
    wh.emplace_back(size / s, size * s);
  }
  for (int y = 0; y < shape.rows; ++y)
    for (int x = 0; x < shape.cols; ++x) {
      const double cx = (x + 0.5) * stride, cy = (y + 0.5) * stride;
      for (const auto& [w, h] : wh) out.push_back({cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h});
    }
  return out;
}

std::vector<std::vector<Box>> build_anchors(const std::vector<LevelShape>& shapes,
                                            const std::vector<int>& strides,
                                            const std::vector<double>& sizes,
                                            const std::vector<double>& ratios) {
  if (shapes.size() != strides.size() || shapes.size() != sizes.size())
    throw ShapeMismatch("build_anchors: one stride and one size per level required");
  std::vector<std::vector<Box>> out;
  for (std::size_t l = 0; l < shapes.size(); ++l)
    out.push_back(level_anchors(shapes[l], strides[l], sizes[l], ratios));
  return out;
}

Deltas encode_box(const Box& gt, const Box& ref, const Deltas& stds) {
  const double aw = ref.width(), ah = ref.height();
  const double ax = ref.x0 + 0.5 * aw, ay = ref.y0 + 0.5 * ah;
  const double gw = gt.width(), gh = gt.height();
  const double gx = gt.x0 + 0.5 * gw, gy = gt.y0 + 0.5 * gh;
  return {(gx - ax) / aw / stds[0], (gy - ay) / ah / stds[1], std::log(gw / aw) / stds[2],
          std::log(gh / ah) / stds[3]};
}

Box decode_box(const Deltas& d, const Box& ref, const Deltas& stds) {
  static const double kMaxLog = std::log(1000.0 / 16.0);
  const double aw = ref.width(), ah = ref.height();
  const double ax = ref.x0 + 0.5 * aw, ay = ref.y0 + 0.5 * ah;
  const double dw = std::clamp(d[2] * stds[2], -kMaxLog, kMaxLog);
  const double dh = std::clamp(d[3] * stds[3], -kMaxLog, kMaxLog);
  const double cx = ax + d[0] * stds[0] * aw, cy = ay + d[1] * stds[1] * ah;
  const double w = aw * std::exp(dw), h = ah * std::exp(dh);
  return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

Assignment assign_targets(const std::vector<Box>& anchors, const std::vector<Box>& gts,
                          double pos_iou, double neg_iou, bool match_low_quality) {
  const std::size_t n = anchors.size(), m = gts.size();
  Assignment a;
  a.labels.assign(n, 0);
  a.matched_gt.assign(n, -1);
  a.max_iou.assign(n, 0.0);
  if (m == 0) return a;  // everything is background

  std::vector<double> gt_best(m, 0.0);
  std::vector<double> ious(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    int best = -1;
    double best_iou = -1;
    for (std::size_t j = 0; j < m; ++j) {
      const double v = iou(anchors[i], gts[j]);
      ious[i * m + j] = v;
      if (v > best_iou) {
        best_iou = v;
        best = static_cast<int>(j);
      }
      gt_best[j] = std::max(gt_best[j], v);
    }
    a.max_iou[i] = best_iou;
    if (best_iou >= pos_iou) {
      a.labels[i] = 1;
      a.matched_gt[i] = best;
    } else if (best_iou >= neg_iou) {
      a.labels[i] = -1;
    }
  }
  if (match_low_quality) {
    for (std::size_t j = 0; j < m; ++j) {
      if (gt_best[j] <= 0) continue;
      for (std::size_t i = 0; i < n; ++i)
        if (ious[i * m + j] == gt_best[j]) {
          a.labels[i] = 1;
          a.matched_gt[i] = static_cast<int>(j);
        }
    }
  }
  return a;
}

void subsample_labels(std::vector<int>& labels, int num, double pos_fraction, Rng& rng) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) pos.push_back(i);
    else if (labels[i] == 0) neg.push_back(i);
  }
  const std::size_t max_pos = static_cast<std::size_t>(num * pos_fraction);
  if (pos.size() > max_pos) {
    rng.shuffle(pos);
    for (std::size_t k = max_pos; k < pos.size(); ++k) labels[pos[k]] = -1;
    pos.resize(max_pos);
  }
  const std::size_t max_neg = static_cast<std::size_t>(num) - pos.size();
  if (neg.size() > max_neg) {
    rng.shuffle(neg);
    for (std::size_t k = max_neg; k < neg.size(); ++k) labels[neg[k]] = -1;
  }
}

std::vector<std::size_t> nms(const std::vector<Box>& boxes, const std::vector<double>& scores,
                             double iou_thresh, std::size_t max_keep) {
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<std::size_t> keep;
  std::vector<char> dead(boxes.size(), 0);
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t i = order[oi];
    if (dead[i]) continue;
    keep.push_back(i);
    if (max_keep && keep.size() == max_keep) break;
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      const std::size_t j = order[oj];
      if (!dead[j] && iou(boxes[i], boxes[j]) > iou_thresh) dead[j] = 1;
    }
  }
  return keep;
}

}  // namespace groupdet::detector
