// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Text-derived inputs for the detector.
//
// Text fusion: every text layer i contributes a K x H x W map holding its
// embedding e_i on the pixels its box covers; the maps are averaged into T,
// pushed through a convolution with the stem's geometry and a 1x1 projection
// to the stem width D, and the result T' is added to the stem output C.
//
// Box attention: per pyramid level, a 3-channel map whose channel 0 is the
// fraction of text boxes covering each cell (channel 1 is all zeros, channel
// 2 all ones), projected 3 -> D by a 1x1 convolution and added to the level's
// features before proposal generation.
//
// Both projections start at zero, so a freshly initialized model behaves
// exactly like one without the mechanism.

#include <string>
#include <utility>
#include <vector>

#include "draft/sample.hpp"
#include "nn/params.hpp"
#include "textenc/textenc.hpp"

namespace groupdet::fusion {

enum class FusionMode { kNone, kTextFusion, kBoxAttention, kBoth };

FusionMode parse_fusion_mode(const std::string& name);
std::string fusion_mode_name(FusionMode mode);
inline bool uses_text_fusion(FusionMode m) { return m == FusionMode::kTextFusion || m == FusionMode::kBoth; }
inline bool uses_box_attention(FusionMode m) { return m == FusionMode::kBoxAttention || m == FusionMode::kBoth; }

// Half-open cell range [first, second) covered by the normalized interval
// [lo, hi] on an axis of `cells` cells: floor(lo*cells) .. ceil(hi*cells),
// clamped, and never empty.
std::pair<int, int> cell_span(double lo, double hi, int cells);

// Mean of the per-text maps, shape (K, H, W). Zero when there are no texts.
nn::Tensor build_text_map(const std::vector<TextLayerRecord>& texts,
                          const std::vector<textenc::TextEmbedding>& embeddings, int K, int H, int W);
nn::Tensor build_text_map(const std::vector<TextLayerRecord>& texts,
                          const textenc::TextEncoder& encoder, int H, int W);

// Shape (3, H, W); see the file comment for the channel layout.
nn::Tensor build_box_attention(const std::vector<TextLayerRecord>& texts, int H, int W);

struct StemGeometry {
  int kernel = 7;
  int stride = 2;
  int pad = 3;
  bool max_pool = true;  // 3x3, stride 2, pad 1
};

// Parameters live in the detector's store under "text_fusion.*".
class TextFusion {
 public:
  TextFusion(nn::ParamStore& store, int text_dim, int stem_channels, StemGeometry geometry);

  // T' for a (K, H, W) text map.
  nn::Var project(const nn::Tensor& text_map) const;
  // F = C + T'. Throws ShapeMismatch when T' and C disagree.
  nn::Var forward(const nn::Var& stem_out, const nn::Tensor& text_map) const;

  const nn::Var& proj_weight() const { return proj_w_; }
  const nn::Var& proj_bias() const { return proj_b_; }

 private:
  StemGeometry geom_;
  nn::Var stem_w_, stem_b_, proj_w_, proj_b_;
};

// One 1x1 projection shared by all pyramid levels, "box_attention.*".
class BoxAttention {
 public:
  BoxAttention(nn::ParamStore& store, int channels);

  // M = F + conv1x1(B). Throws ShapeMismatch on spatial disagreement.
  nn::Var forward(const nn::Var& level, const nn::Tensor& attention) const;

  const nn::Var& weight() const { return w_; }
  const nn::Var& bias() const { return b_; }

 private:
  nn::Var w_, b_;
};

}  // namespace groupdet::fusion
