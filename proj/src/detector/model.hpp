// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "common/detection.hpp"
#include "common/image.hpp"
#include "common/rng.hpp"
#include "detector/boxes.hpp"
#include "detector/config.hpp"
#include "draft/sample.hpp"
#include "fusion/fusion.hpp"
#include "nn/params.hpp"
#include "textenc/textenc.hpp"

namespace groupdet::detector {

// Network input after resizing: normalized (3, H, W) pixels plus the factors
// mapping resized coordinates back to the original image.
struct Preprocessed {
  nn::Tensor pixels;
  double scale_x = 1, scale_y = 1;  // resized / original
  int orig_width = 0, orig_height = 0;
};

// Aspect-preserving target size: the short side goes to `short_side` unless
// that pushes the long side past `long_side`.
std::pair<int, int> resized_size(int width, int height, int short_side, int long_side);

Preprocessed preprocess(const Image& image, int short_side, int long_side, bool flip = false);

// Intermediate tensors of one forward pass, for inspection and tests.
struct ForwardTrace {
  nn::Var stem;                 // C (or F = C + T' under text fusion)
  std::vector<nn::Var> levels;  // P2..P6, after box attention if enabled
  nn::Var rpn_logits;           // (anchors, 2)
  nn::Var rpn_deltas;           // (anchors, 4)
  std::vector<Box> proposals;   // resized-image pixels
  std::vector<Detection> detections;  // original-image pixels
};

struct LossBreakdown {
  double rpn_cls = 0, rpn_reg = 0, roi_cls = 0, roi_reg = 0;
  double total() const { return rpn_cls + rpn_reg + roi_cls + roi_reg; }
};

// Two-stage anchor-based detector: residual backbone, feature pyramid,
// region proposal network, RoI Align box head, and the optional text fusion
// and box attention inputs.
class Detector {
 public:
  explicit Detector(DetectorConfig config);

  const DetectorConfig& config() const { return config_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  const textenc::TextEncoder& encoder() const { return *encoder_; }

  std::vector<Detection> predict(const Image& image, const std::vector<TextLayerRecord>& texts) const;
  ForwardTrace trace(const Image& image, const std::vector<TextLayerRecord>& texts) const;

  // Builds the training graph for one image and returns the scalar loss.
  // `gt` holds group boxes in original-image pixels. Flipping mirrors the
  // image, the texts, and the boxes.
  nn::Var training_loss(const Image& image, const std::vector<TextLayerRecord>& texts,
                        const std::vector<Box>& gt, Rng& rng, bool flip,
                        LossBreakdown* breakdown = nullptr) const;

  // Exposed for tests.
  struct Features {
    nn::Var stem;
    std::vector<nn::Var> levels;
  };
  Features features(const nn::Tensor& pixels, const std::vector<TextLayerRecord>& texts) const;

 private:
  struct Block {
    std::vector<std::string> convs;  // parameter name prefixes
    std::vector<int> strides, pads;
    std::string shortcut;            // projection conv, empty for parameter-free
    int stride = 1, out_channels = 0;
  };

  void build();
  nn::Var conv(const std::string& name, const nn::Var& x, int stride, int pad) const;
  nn::Var run_block(const Block& b, const nn::Var& x) const;
  void rpn_outputs(const std::vector<nn::Var>& levels, nn::Var& logits, nn::Var& deltas,
                   std::vector<LevelShape>& shapes) const;
  std::vector<Box> propose(const nn::Tensor& logits, const nn::Tensor& deltas,
                           const std::vector<std::vector<Box>>& anchors, int pre_nms, int post_nms,
                           int width, int height) const;
  nn::Var roi_features(const std::vector<nn::Var>& levels, const std::vector<Box>& rois,
                       std::vector<std::size_t>& order) const;
  void box_head(const nn::Var& pooled, nn::Var& cls, nn::Var& reg) const;

  DetectorConfig config_;
  nn::ParamStore params_;
  std::shared_ptr<const textenc::TextEncoder> encoder_;
  int stem_channels_ = 0, fpn_channels_ = 0, head_hidden_ = 0;
  std::vector<std::vector<Block>> stages_;
  std::vector<int> stage_channels_;
  std::optional<fusion::TextFusion> text_fusion_;
  std::optional<fusion::BoxAttention> box_attention_;
};

inline constexpr int kRoiOut = 7;
inline constexpr int kRoiSampling = 2;
inline const Deltas kRoiStds{0.1, 0.1, 0.2, 0.2};

}  // namespace groupdet::detector
