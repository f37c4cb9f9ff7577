// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "common/geometry.hpp"
#include "common/image.hpp"

namespace groupdet {

inline constexpr int kGroupCategoryId = 1;
inline constexpr const char* kGroupCategoryName = "group";

// A text layer as seen by the detector: content plus a box normalized by the
// screen size, each coordinate in [0, 1].
struct TextLayerRecord {
  std::string content;
  Box bbox;
  bool operator==(const TextLayerRecord&) const = default;
};

struct GroupLabel {
  Rect bbox;  // pixels
  int category_id = kGroupCategoryId;
  bool operator==(const GroupLabel&) const = default;
};

// One rendered UI screen with its text layers and ground-truth groups.
struct ScreenSample {
  std::string sample_id;
  std::string package_id;
  int width = 0;
  int height = 0;
  Image image;
  std::vector<TextLayerRecord> texts;
  std::vector<GroupLabel> groups;
};

}  // namespace groupdet
