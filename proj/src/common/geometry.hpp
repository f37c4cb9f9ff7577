// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>

namespace groupdet {

// Pixel rectangle, top-left origin, y pointing down.
struct Rect {
  double x = 0, y = 0, w = 0, h = 0;

  double right() const { return x + w; }
  double bottom() const { return y + h; }
  double area() const { return w * h; }
  bool operator==(const Rect&) const = default;
};

// Corner-form box (x_min, y_min, x_max, y_max). Used both for pixel boxes
// and for normalized [0,1] boxes.
struct Box {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return std::max(0.0, x1 - x0) * std::max(0.0, y1 - y0); }
  bool operator==(const Box&) const = default;
};

inline Box to_box(const Rect& r) { return {r.x, r.y, r.x + r.w, r.y + r.h}; }
inline Rect to_rect(const Box& b) { return {b.x0, b.y0, b.x1 - b.x0, b.y1 - b.y0}; }

inline Box box_union(const Box& a, const Box& b) {
  return {std::min(a.x0, b.x0), std::min(a.y0, b.y0), std::max(a.x1, b.x1),
          std::max(a.y1, b.y1)};
}

inline Box box_clip(const Box& b, double width, double height) {
  return {std::clamp(b.x0, 0.0, width), std::clamp(b.y0, 0.0, height),
          std::clamp(b.x1, 0.0, width), std::clamp(b.y1, 0.0, height)};
}

// Positive-area overlap test.
inline bool boxes_intersect(const Box& a, const Box& b) {
  return std::min(a.x1, b.x1) > std::max(a.x0, b.x0) &&
         std::min(a.y1, b.y1) > std::max(a.y0, b.y0);
}

inline bool box_contains(const Box& outer, const Box& inner) {
  return inner.x0 >= outer.x0 && inner.y0 >= outer.y0 && inner.x1 <= outer.x1 &&
         inner.y1 <= outer.y1;
}

// Intersection over union; 0 when the union is empty.
inline double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const double ih = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

}  // namespace groupdet
