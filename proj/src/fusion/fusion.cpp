// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fusion/fusion.hpp"

#include <algorithm>
#include <tuple>
#include <cmath>

#include "common/error.hpp"
#include "nn/ops.hpp"

namespace groupdet::fusion {

FusionMode parse_fusion_mode(const std::string& name) {
  if (name == "none") return FusionMode::kNone;
  if (name == "text_fusion") return FusionMode::kTextFusion;
  if (name == "box_attention") return FusionMode::kBoxAttention;
  if (name == "both") return FusionMode::kBoth;
  throw ConfigError("unknown fusion mode '" + name + "'");
}

std::string fusion_mode_name(FusionMode mode) {
  switch (mode) {
    case FusionMode::kNone: return "none";
    case FusionMode::kTextFusion: return "text_fusion";
    case FusionMode::kBoxAttention: return "box_attention";
    case FusionMode::kBoth: return "both";
  }
  return "none";
}

std::pair<int, int> cell_span(double lo, double hi, int cells) {
  int first = static_cast<int>(std::floor(lo * cells));
  int last = static_cast<int>(std::ceil(hi * cells));
  first = std::clamp(first, 0, cells - 1);
  last = std::clamp(last, 0, cells);
  if (last <= first) last = first + 1;
  return {first, last};
}

nn::Tensor build_text_map(const std::vector<TextLayerRecord>& texts,
                          const std::vector<textenc::TextEmbedding>& embeddings, int K, int H,
                          int W) {
  if (K < 1 || H < 1 || W < 1) throw ShapeMismatch("text map dimensions must be positive");
  if (embeddings.size() != texts.size()) throw ShapeMismatch("one embedding per text required");
  nn::Tensor map({K, H, W});
  if (texts.empty()) return map;
  const double inv_n = 1.0 / static_cast<double>(texts.size());
  // Canonical accumulation order keeps the floating-point sum independent of
  // the order the texts arrive in.
  std::vector<std::size_t> order(texts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Box& ba = texts[a].bbox;
    const Box& bb = texts[b].bbox;
    return std::tie(ba.x0, ba.y0, ba.x1, ba.y1, texts[a].content, embeddings[a]) <
           std::tie(bb.x0, bb.y0, bb.x1, bb.y1, texts[b].content, embeddings[b]);
  });
  for (std::size_t i : order) {
    const auto& e = embeddings[i];
    if (static_cast<int>(e.size()) != K) throw ShapeMismatch("embedding length != K");
    const auto [r0, r1] = cell_span(texts[i].bbox.y0, texts[i].bbox.y1, H);
    const auto [c0, c1] = cell_span(texts[i].bbox.x0, texts[i].bbox.x1, W);
    for (int k = 0; k < K; ++k) {
      const double v = e[k] * inv_n;
      for (int p = r0; p < r1; ++p)
        for (int q = c0; q < c1; ++q) map.at(k, p, q) += v;
    }
  }
  return map;
}

nn::Tensor build_text_map(const std::vector<TextLayerRecord>& texts,
                          const textenc::TextEncoder& encoder, int H, int W) {
  std::vector<textenc::TextEmbedding> emb;
  emb.reserve(texts.size());
  for (const auto& t : texts) emb.push_back(encoder.encode(t.content));
  return build_text_map(texts, emb, encoder.dim(), H, W);
}

nn::Tensor build_box_attention(const std::vector<TextLayerRecord>& texts, int H, int W) {
  if (H < 1 || W < 1) throw ShapeMismatch("attention map dimensions must be positive");
  nn::Tensor map({3, H, W});
  for (int p = 0; p < H; ++p)
    for (int q = 0; q < W; ++q) map.at(2, p, q) = 1.0;
  if (texts.empty()) return map;
  // Accumulate integer counts first so every cell is exactly count / N.
  std::vector<int> count(static_cast<std::size_t>(H) * W, 0);
  for (const auto& t : texts) {
    const auto [r0, r1] = cell_span(t.bbox.y0, t.bbox.y1, H);
    const auto [c0, c1] = cell_span(t.bbox.x0, t.bbox.x1, W);
    for (int p = r0; p < r1; ++p)
      for (int q = c0; q < c1; ++q) ++count[static_cast<std::size_t>(p) * W + q];
  }
  const double n = static_cast<double>(texts.size());
  for (int p = 0; p < H; ++p)
    for (int q = 0; q < W; ++q) map.at(0, p, q) = count[static_cast<std::size_t>(p) * W + q] / n;
  return map;
}

TextFusion::TextFusion(nn::ParamStore& store, int text_dim, int stem_channels, StemGeometry geometry)
    : geom_(geometry) {
  stem_w_ = store.create("text_fusion.stem.weight", {text_dim, text_dim, geom_.kernel, geom_.kernel},
                         nn::Init::kHeNormal);
  stem_b_ = store.create("text_fusion.stem.bias", {text_dim}, nn::Init::kZeros);
  proj_w_ = store.create("text_fusion.proj.weight", {stem_channels, text_dim, 1, 1}, nn::Init::kZeros);
  proj_b_ = store.create("text_fusion.proj.bias", {stem_channels}, nn::Init::kZeros);
}

nn::Var TextFusion::project(const nn::Tensor& text_map) const {
  nn::Var t = nn::conv2d(nn::constant(text_map), stem_w_, stem_b_, geom_.stride, geom_.pad);
  if (geom_.max_pool) t = nn::max_pool2d(t, 3, 2, 1);
  return nn::conv2d(t, proj_w_, proj_b_, 1, 0);
}

nn::Var TextFusion::forward(const nn::Var& stem_out, const nn::Tensor& text_map) const {
  nn::Var projected = project(text_map);
  if (projected->value.shape != stem_out->value.shape)
    throw ShapeMismatch("text fusion: T' " + nn::shape_str(projected->value.shape) + " vs C " +
                        nn::shape_str(stem_out->value.shape));
  return nn::add(stem_out, projected);
}

BoxAttention::BoxAttention(nn::ParamStore& store, int channels) {
  w_ = store.create("box_attention.weight", {channels, 3, 1, 1}, nn::Init::kZeros);
  b_ = store.create("box_attention.bias", {channels}, nn::Init::kZeros);
}

nn::Var BoxAttention::forward(const nn::Var& level, const nn::Tensor& attention) const {
  if (attention.shape.size() != 3 || attention.dim(0) != 3 ||
      attention.dim(1) != level->value.dim(1) || attention.dim(2) != level->value.dim(2))
    throw ShapeMismatch("box attention: map " + nn::shape_str(attention.shape) + " vs level " +
                        nn::shape_str(level->value.shape));
  return nn::add(level, nn::conv2d(nn::constant(attention), w_, b_, 1, 0));
}

}  // namespace groupdet::fusion
