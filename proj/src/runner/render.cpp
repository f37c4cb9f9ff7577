// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdio>

#include "runner/commands.hpp"

namespace groupdet::runner {

namespace {

// 3x5 glyphs, one row per 3-bit value, top row first.
constexpr std::uint8_t kDigits[10][5] = {
    {7, 5, 5, 5, 7}, {2, 6, 2, 2, 7}, {7, 1, 7, 4, 7}, {7, 1, 7, 1, 7}, {5, 5, 7, 1, 1},
    {7, 4, 7, 1, 7}, {7, 4, 7, 5, 7}, {7, 1, 1, 1, 1}, {7, 5, 7, 5, 7}, {7, 5, 7, 1, 7},
};
constexpr int kScale = 2;

void draw_glyph(Image& img, char ch, int x, int y, Color color) {
  if (ch == '.') {
    fill_rect(img, x + kScale, y + 4 * kScale, x + 2 * kScale, y + 5 * kScale, color);
    return;
  }
  if (ch < '0' || ch > '9') return;
  const auto& g = kDigits[ch - '0'];
  for (int r = 0; r < 5; ++r)
    for (int col = 0; col < 3; ++col)
      if (g[r] & (4 >> col))
        fill_rect(img, x + col * kScale, y + r * kScale, x + (col + 1) * kScale, y + (r + 1) * kScale, color);
}

}  // namespace

void render_detections(Image& image, const std::vector<Detection>& dets, double min_score) {
  const Color box{230, 40, 40}, ink{255, 255, 255};
  for (const auto& d : dets) {
    if (d.score < min_score) continue;
    const int x0 = static_cast<int>(std::floor(d.bbox.x)), y0 = static_cast<int>(std::floor(d.bbox.y));
    const int x1 = static_cast<int>(std::ceil(d.bbox.right())), y1 = static_cast<int>(std::ceil(d.bbox.bottom()));
    draw_rect_outline(image, x0, y0, x1, y1, box, 2);

    char label[8];
    std::snprintf(label, sizeof label, "%.2f", d.score);
    const int w = 4 * kScale * 4 + kScale, h = 5 * kScale + 2 * kScale;
    const int ty = y0 - h >= 0 ? y0 - h : y0;
    fill_rect(image, x0, ty, x0 + w, ty + h, box);
    int cx = x0 + kScale;
    for (const char* p = label; *p; ++p, cx += 4 * kScale) draw_glyph(image, *p, cx, ty + kScale, ink);
  }
}

}  // namespace groupdet::runner
