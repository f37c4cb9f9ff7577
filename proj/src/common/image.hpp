// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace groupdet {

using Color = std::array<std::uint8_t, 3>;

// 8-bit RGB raster, row-major, interleaved channels.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, Color fill = {0, 0, 0});

  std::uint8_t* at(int x, int y) { return &pixels[(static_cast<std::size_t>(y) * width + x) * 3]; }
  const std::uint8_t* at(int x, int y) const {
    return &pixels[(static_cast<std::size_t>(y) * width + x) * 3];
  }
  bool operator==(const Image&) const = default;
};

Image read_png(const std::filesystem::path& path);
void write_png(const Image& image, const std::filesystem::path& path);

// Copies the sub-rectangle [x, x+w) x [y, y+h); must lie inside the image.
Image crop(const Image& image, int x, int y, int w, int h);

// Paints the integer pixel block covering [x0,x1) x [y0,y1), clipped.
void fill_rect(Image& image, int x0, int y0, int x1, int y1, Color color);
void draw_rect_outline(Image& image, int x0, int y0, int x1, int y1, Color color,
                       int thickness = 2);

}  // namespace groupdet
