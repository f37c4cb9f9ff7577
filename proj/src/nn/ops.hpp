// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "common/geometry.hpp"
#include "nn/tensor.hpp"

namespace groupdet::nn {

// All spatial ops work on single images laid out as (channels, rows, cols).

// weight: (out, in, kh, kw); bias: (out) or null.
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad);
Var relu(const Var& x);
Var add(const Var& a, const Var& b);
Var max_pool2d(const Var& x, int kernel, int stride, int pad);
// Nearest-neighbour resize to (rows, cols): src = floor(dst * in / out).
Var upsample_nearest(const Var& x, int rows, int cols);
// Parameter-free residual shortcut: keeps every `stride`-th pixel and pads
// the channel dimension with zeros up to `channels`.
Var subsample_pad(const Var& x, int stride, int channels);

// Quantization-free region pooling. `rois` are in input-image pixels; they
// are scaled by `spatial_scale` and shifted by half a pixel onto the feature
// grid. Each of the out x out bins averages sampling x sampling bilinear
// samples. Zero-area regions produce zeros. Output: (R, C, out, out).
Var roi_align(const Var& feature, const std::vector<Box>& rois, double spatial_scale, int out,
              int sampling);

// x: (N, in), weight: (out, in), bias: (out).
Var linear(const Var& x, const Var& weight, const Var& bias);
Var reshape(const Var& x, std::vector<int> shape);
// Row-wise concatenation of (N_i, D) matrices.
Var concat_rows(const std::vector<Var>& parts);
// (A*k, H, W) -> (H*W*A, k) with row index (y*W + x)*A + a.
Var to_anchor_rows(const Var& x, int anchors, int k);

// Mean softmax cross-entropy over rows with label >= 0, divided by
// `normalizer` (rows with label < 0 are ignored).
Var softmax_cross_entropy(const Var& logits, const std::vector<int>& labels, double normalizer);
// Sum over rows with weight > 0 of weight * smooth-L1(pred - target), divided
// by `normalizer`. beta = 0 gives plain L1.
Var smooth_l1(const Var& pred, const Tensor& target, const std::vector<double>& weights,
              double beta, double normalizer);
Var sum_scalars(const std::vector<Var>& terms);

// Plain forward helpers shared by inference code and tests.
void softmax_rows(const Tensor& logits, Tensor& probs);

}  // namespace groupdet::nn
