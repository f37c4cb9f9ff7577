// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "common/geometry.hpp"
#include "draft/sample.hpp"

namespace groupdet {

struct Detection {
  Rect bbox;  // x, y, w, h in image pixels
  double score = 0;
  int category_id = kGroupCategoryId;
  bool operator==(const Detection&) const = default;
};

}  // namespace groupdet
