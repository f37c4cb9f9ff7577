// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#include "detector/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "common/error.hpp"
#include "nn/ops.hpp"

namespace groupdet::detector {

using nn::Tensor;
using nn::Var;

std::pair<int, int> resized_size(int width, int height, int short_side, int long_side) {
  const double s = std::min(static_cast<double>(short_side) / std::min(width, height),
                            static_cast<double>(long_side) / std::max(width, height));
  return {std::max(1, static_cast<int>(std::lround(width * s))),
          std::max(1, static_cast<int>(std::lround(height * s)))};
}

Preprocessed preprocess(const Image& image, int short_side, int long_side, bool flip) {
  if (image.width <= 0 || image.height <= 0) throw ShapeMismatch("preprocess: empty image");
  const auto [w, h] = resized_size(image.width, image.height, short_side, long_side);
  Preprocessed out;
  out.orig_width = image.width;
  out.orig_height = image.height;
  out.scale_x = static_cast<double>(w) / image.width;
  out.scale_y = static_cast<double>(h) / image.height;
  out.pixels = Tensor({3, h, w});

  // Half-pixel-centred bilinear resampling.
  const double fx = static_cast<double>(image.width) / w, fy = static_cast<double>(image.height) / h;
  auto px = [&](int x, int y, int c) {
    return static_cast<double>(image.pixels[(static_cast<std::size_t>(y) * image.width + x) * 3 + c]);
  };
  for (int y = 0; y < h; ++y) {
    const double sy = std::max(0.0, (y + 0.5) * fy - 0.5);
    const int y0 = std::min(static_cast<int>(sy), image.height - 1);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double ly = sy - y0;
    for (int x = 0; x < w; ++x) {
      const double sx = std::max(0.0, (x + 0.5) * fx - 0.5);
      const int x0 = std::min(static_cast<int>(sx), image.width - 1);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double lx = sx - x0;
      const int dx = flip ? w - 1 - x : x;
      for (int c = 0; c < 3; ++c) {
        const double v = (1 - ly) * ((1 - lx) * px(x0, y0, c) + lx * px(x1, y0, c)) +
                         ly * ((1 - lx) * px(x0, y1, c) + lx * px(x1, y1, c));
        out.pixels.at(c, y, dx) = (v / 255.0 - 0.5) / 0.25;
      }
    }
  }
  return out;
}

namespace {

std::vector<TextLayerRecord> flip_texts(std::vector<TextLayerRecord> texts) {
  for (auto& t : texts) t.bbox = Box{1.0 - t.bbox.x1, t.bbox.y0, 1.0 - t.bbox.x0, t.bbox.y1};
  return texts;
}

std::vector<double> objectness(const Tensor& logits) {
  Tensor probs;
  nn::softmax_rows(logits, probs);
  std::vector<double> s(probs.dim(0));
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = probs[i * 2 + 1];
  return s;
}

std::vector<std::size_t> top_k(const std::vector<double>& scores, std::size_t begin, std::size_t end,
                               std::size_t k) {
  std::vector<std::size_t> idx(end - begin);
  std::iota(idx.begin(), idx.end(), begin);
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
                    });
  idx.resize(k);
  return idx;
}

Deltas row4(const Tensor& t, std::size_t i) {
  return {t[i * 4], t[i * 4 + 1], t[i * 4 + 2], t[i * 4 + 3]};
}

Box clip_to(const Box& b, int width, int height) {
  return box_clip(b, width, height);
}

}  // namespace

Detector::Detector(DetectorConfig config) : config_(std::move(config)), params_(config_.seed) {
  config_.validate();
  encoder_ = textenc::make_encoder(config_.text_encoder, config_.text_dim, config_.text_encoder_path);
  build();
}

void Detector::build() {
  const bool tiny = config_.backbone == BackbonePreset::kTiny;
  using nn::Init;
  auto conv_param = [&](const std::string& name, int out, int in, int k, Init init) {
    params_.create(name + ".weight", {out, in, k, k}, init);
    params_.create(name + ".bias", {out}, Init::kZeros);
  };

  stem_channels_ = tiny ? 16 : 64;
  conv_param("backbone.stem", stem_channels_, 3, 7, Init::kHeNormal);

  int in_c = stem_channels_;
  stages_.clear();
  stage_channels_.clear();
  if (tiny) {
    // One basic block per stage; the shortcut subsamples and zero-pads.
    const int widths[4] = {16, 32, 64, 128};
    for (int s = 0; s < 4; ++s) {
      Block b;
      b.stride = s == 0 ? 1 : 2;
      b.out_channels = widths[s];
      const std::string p = "backbone.layer" + std::to_string(s + 1) + ".0";
      conv_param(p + ".conv1", widths[s], in_c, 3, Init::kHeNormal);
      conv_param(p + ".conv2", widths[s], widths[s], 3, Init::kHeNormal);
      b.convs = {p + ".conv1", p + ".conv2"};
      b.strides = {b.stride, 1};
      b.pads = {1, 1};
      stages_.push_back({b});
      stage_channels_.push_back(widths[s]);
      in_c = widths[s];
    }
    fpn_channels_ = 32;
    head_hidden_ = 128;
  } else {
    const int depth[4] = {3, 4, 6, 3};
    for (int s = 0; s < 4; ++s) {
      const int mid = 64 << s, out = mid * 4;
      std::vector<Block> stage;
      for (int i = 0; i < depth[s]; ++i) {
        Block b;
        b.stride = (i == 0 && s > 0) ? 2 : 1;
        b.out_channels = out;
        const std::string p = "backbone.layer" + std::to_string(s + 1) + "." + std::to_string(i);
        conv_param(p + ".conv1", mid, in_c, 1, Init::kHeNormal);
        conv_param(p + ".conv2", mid, mid, 3, Init::kHeNormal);
        conv_param(p + ".conv3", out, mid, 1, Init::kZeros);
        b.convs = {p + ".conv1", p + ".conv2", p + ".conv3"};
        b.strides = {1, b.stride, 1};
        b.pads = {0, 1, 0};
        if (i == 0) {
          conv_param(p + ".downsample", out, in_c, 1, Init::kHeNormal);
          b.shortcut = p + ".downsample";
        }
        stage.push_back(b);
        in_c = out;
      }
      stages_.push_back(stage);
      stage_channels_.push_back(out);
    }
    fpn_channels_ = 256;
    head_hidden_ = 1024;
  }

  for (int l = 0; l < 4; ++l) {
    conv_param("fpn.lateral" + std::to_string(l), fpn_channels_, stage_channels_[l], 1, Init::kHeNormal);
    conv_param("fpn.output" + std::to_string(l), fpn_channels_, fpn_channels_, 3, Init::kHeNormal);
  }

  const int A = config_.anchors_per_cell();
  conv_param("rpn.conv", fpn_channels_, fpn_channels_, 3, Init::kNormal001);
  conv_param("rpn.cls", A * 2, fpn_channels_, 1, Init::kNormal001);
  conv_param("rpn.reg", A * 4, fpn_channels_, 1, Init::kNormal001);

  const int pooled = fpn_channels_ * kRoiOut * kRoiOut;
  params_.create("roi.fc1.weight", {head_hidden_, pooled}, Init::kHeNormal);
  params_.create("roi.fc1.bias", {head_hidden_}, Init::kZeros);
  params_.create("roi.fc2.weight", {head_hidden_, head_hidden_}, Init::kHeNormal);
  params_.create("roi.fc2.bias", {head_hidden_}, Init::kZeros);
  params_.create("roi.cls.weight", {config_.n_classes, head_hidden_}, Init::kNormal001);
  params_.create("roi.cls.bias", {config_.n_classes}, Init::kZeros);
  params_.create("roi.reg.weight", {4, head_hidden_}, Init::kNormal0001);
  params_.create("roi.reg.bias", {4}, Init::kZeros);

  // Fusion parameters are created last; their seeds depend on their names
  // only, so enabling fusion leaves every other weight untouched.
  if (fusion::uses_text_fusion(config_.fusion))
    text_fusion_.emplace(params_, encoder_->dim(), stem_channels_, fusion::StemGeometry{});
  if (fusion::uses_box_attention(config_.fusion)) box_attention_.emplace(params_, fpn_channels_);
}

Var Detector::conv(const std::string& name, const Var& x, int stride, int pad) const {
  return nn::conv2d(x, params_.get(name + ".weight"), params_.get(name + ".bias"), stride, pad);
}

Var Detector::run_block(const Block& b, const Var& x) const {
  Var h = x;
  for (std::size_t i = 0; i < b.convs.size(); ++i) {
    h = conv(b.convs[i], h, b.strides[i], b.pads[i]);
    if (i + 1 < b.convs.size()) h = nn::relu(h);
  }
  Var skip;
  if (!b.shortcut.empty()) skip = conv(b.shortcut, x, b.stride, 0);
  else if (b.stride == 1 && x->value.dim(0) == b.out_channels) skip = x;
  else skip = nn::subsample_pad(x, b.stride, b.out_channels);
  return nn::relu(nn::add(h, skip));
}

Detector::Features Detector::features(const Tensor& pixels, const std::vector<TextLayerRecord>& texts) const {
  Features f;
  Var x = nn::relu(conv("backbone.stem", nn::constant(pixels), 2, 3));
  x = nn::max_pool2d(x, 3, 2, 1);
  if (text_fusion_)
    x = text_fusion_->forward(x, fusion::build_text_map(texts, *encoder_, pixels.dim(1), pixels.dim(2)));
  f.stem = x;

  std::vector<Var> c;
  for (const auto& stage : stages_) {
    for (const auto& b : stage) x = run_block(b, x);
    c.push_back(x);
  }

  std::vector<Var> td(4);
  td[3] = conv("fpn.lateral3", c[3], 1, 0);
  for (int l = 2; l >= 0; --l) {
    Var lat = conv("fpn.lateral" + std::to_string(l), c[l], 1, 0);
    td[l] = nn::add(lat, nn::upsample_nearest(td[l + 1], lat->value.dim(1), lat->value.dim(2)));
  }
  for (int l = 0; l < 4; ++l) f.levels.push_back(conv("fpn.output" + std::to_string(l), td[l], 1, 1));
  f.levels.push_back(nn::max_pool2d(f.levels[3], 1, 2, 0));

  if (box_attention_)
    for (auto& level : f.levels)
      level = box_attention_->forward(
          level, fusion::build_box_attention(texts, level->value.dim(1), level->value.dim(2)));
  return f;
}

void Detector::rpn_outputs(const std::vector<Var>& levels, Var& logits, Var& deltas,
                           std::vector<LevelShape>& shapes) const {
  const int A = config_.anchors_per_cell();
  std::vector<Var> cls, reg;
  shapes.clear();
  for (const auto& p : levels) {
    Var h = nn::relu(conv("rpn.conv", p, 1, 1));
    cls.push_back(nn::to_anchor_rows(conv("rpn.cls", h, 1, 0), A, 2));
    reg.push_back(nn::to_anchor_rows(conv("rpn.reg", h, 1, 0), A, 4));
    shapes.push_back({p->value.dim(1), p->value.dim(2)});
  }
  logits = nn::concat_rows(cls);
  deltas = nn::concat_rows(reg);
}

std::vector<Box> Detector::propose(const Tensor& logits, const Tensor& deltas,
                                   const std::vector<std::vector<Box>>& anchors, int pre_nms,
                                   int post_nms, int width, int height) const {
  const auto scores = objectness(logits);
  std::vector<Box> boxes;
  std::vector<double> box_scores;
  std::size_t begin = 0;
  // Per-level top-k and NMS, then a global cut by score.
  for (const auto& level : anchors) {
    const std::size_t end = begin + level.size();
    std::vector<Box> lb;
    std::vector<double> ls;
    for (std::size_t i : top_k(scores, begin, end, static_cast<std::size_t>(pre_nms))) {
      const Box b = clip_to(decode_box(row4(deltas, i), level[i - begin]), width, height);
      if (b.width() <= 0 || b.height() <= 0) continue;
      lb.push_back(b);
      ls.push_back(scores[i]);
    }
    for (std::size_t k : nms(lb, ls, config_.rpn_nms_iou)) {
      boxes.push_back(lb[k]);
      box_scores.push_back(ls[k]);
    }
    begin = end;
  }
  std::vector<Box> out;
  for (std::size_t i : top_k(box_scores, 0, box_scores.size(), static_cast<std::size_t>(post_nms)))
    out.push_back(boxes[i]);
  return out;
}

Var Detector::roi_features(const std::vector<Var>& levels, const std::vector<Box>& rois,
                           std::vector<std::size_t>& order) const {
  std::vector<std::vector<Box>> per_level(4);
  std::vector<std::vector<std::size_t>> idx(4);
  for (std::size_t i = 0; i < rois.size(); ++i) {
    const double scale = std::sqrt(std::max(0.0, rois[i].width() * rois[i].height()));
    int l = static_cast<int>(std::floor(std::log2(scale / 56.0 + 1e-6)));
    l = std::clamp(l, 0, 3);
    per_level[l].push_back(rois[i]);
    idx[l].push_back(i);
  }
  const int flat = fpn_channels_ * kRoiOut * kRoiOut;
  std::vector<Var> parts;
  order.clear();
  for (int l = 0; l < 4; ++l) {
    if (per_level[l].empty()) continue;
    Var pooled = nn::roi_align(levels[l], per_level[l], 1.0 / DetectorConfig::kStrides[l], kRoiOut,
                               kRoiSampling);
    parts.push_back(nn::reshape(pooled, {static_cast<int>(per_level[l].size()), flat}));
    order.insert(order.end(), idx[l].begin(), idx[l].end());
  }
  return nn::concat_rows(parts);
}

void Detector::box_head(const Var& pooled, Var& cls, Var& reg) const {
  Var h = nn::relu(nn::linear(pooled, params_.get("roi.fc1.weight"), params_.get("roi.fc1.bias")));
  h = nn::relu(nn::linear(h, params_.get("roi.fc2.weight"), params_.get("roi.fc2.bias")));
  cls = nn::linear(h, params_.get("roi.cls.weight"), params_.get("roi.cls.bias"));
  reg = nn::linear(h, params_.get("roi.reg.weight"), params_.get("roi.reg.bias"));
}

ForwardTrace Detector::trace(const Image& image, const std::vector<TextLayerRecord>& texts) const {
  nn::NoGradGuard no_grad;
  const Preprocessed pre = preprocess(image, config_.resize_short, config_.resize_long);
  const int W = pre.pixels.dim(2), H = pre.pixels.dim(1);

  ForwardTrace t;
  Features f = features(pre.pixels, texts);
  t.stem = f.stem;
  t.levels = f.levels;
  std::vector<LevelShape> shapes;
  rpn_outputs(f.levels, t.rpn_logits, t.rpn_deltas, shapes);
  const auto anchors = build_anchors(shapes, {std::begin(DetectorConfig::kStrides), std::end(DetectorConfig::kStrides)},
                                     config_.anchor_sizes, config_.anchor_ratios);
  t.proposals = propose(t.rpn_logits->value, t.rpn_deltas->value, anchors, config_.rpn_pre_nms_test,
                        config_.rpn_post_nms_test, W, H);
  if (t.proposals.empty()) return t;

  std::vector<std::size_t> order;
  Var pooled = roi_features(f.levels, t.proposals, order);
  Var cls, reg;
  box_head(pooled, cls, reg);
  Tensor probs;
  nn::softmax_rows(cls->value, probs);

  std::vector<Box> boxes;
  std::vector<double> scores;
  for (std::size_t r = 0; r < order.size(); ++r) {
    const double score = probs[r * config_.n_classes + 1];
    if (!(score > config_.score_thresh)) continue;
    const Box b = clip_to(decode_box(row4(reg->value, r), t.proposals[order[r]], kRoiStds), W, H);
    if (b.width() <= 0 || b.height() <= 0) continue;
    boxes.push_back(b);
    scores.push_back(score);
  }
  const auto keep = nms(boxes, scores, config_.final_nms_iou, static_cast<std::size_t>(config_.max_dets));
  for (std::size_t k : keep) {
    const Box& b = boxes[k];
    const Box o = box_clip(Box{b.x0 / pre.scale_x, b.y0 / pre.scale_y, b.x1 / pre.scale_x, b.y1 / pre.scale_y},
                           pre.orig_width, pre.orig_height);
    t.detections.push_back(Detection{to_rect(o), scores[k], kGroupCategoryId});
  }
  return t;
}

std::vector<Detection> Detector::predict(const Image& image, const std::vector<TextLayerRecord>& texts) const {
  return trace(image, texts).detections;
}

Var Detector::training_loss(const Image& image, const std::vector<TextLayerRecord>& texts_in,
                            const std::vector<Box>& gt_in, Rng& rng, bool flip,
                            LossBreakdown* breakdown) const {
  const Preprocessed pre = preprocess(image, config_.resize_short, config_.resize_long, flip);
  const int W = pre.pixels.dim(2), H = pre.pixels.dim(1);
  const auto texts = flip ? flip_texts(texts_in) : texts_in;
  std::vector<Box> gts;
  for (const Box& g : gt_in) {
    Box b{g.x0 * pre.scale_x, g.y0 * pre.scale_y, g.x1 * pre.scale_x, g.y1 * pre.scale_y};
    if (flip) b = Box{W - b.x1, b.y0, W - b.x0, b.y1};
    if (b.width() > 0 && b.height() > 0) gts.push_back(b);
  }

  Features f = features(pre.pixels, texts);
  Var logits, deltas;
  std::vector<LevelShape> shapes;
  rpn_outputs(f.levels, logits, deltas, shapes);
  const auto anchors = build_anchors(shapes, {std::begin(DetectorConfig::kStrides), std::end(DetectorConfig::kStrides)},
                                     config_.anchor_sizes, config_.anchor_ratios);
  std::vector<Box> flat;
  for (const auto& l : anchors) flat.insert(flat.end(), l.begin(), l.end());

  // RPN targets.
  Assignment a = assign_targets(flat, gts, config_.rpn_pos_iou, config_.rpn_neg_iou, true);
  subsample_labels(a.labels, config_.rpn_batch, config_.rpn_pos_fraction, rng);
  const double rpn_norm =
      std::max<double>(1.0, std::count_if(a.labels.begin(), a.labels.end(), [](int v) { return v >= 0; }));
  Tensor rpn_targets({static_cast<int>(flat.size()), 4});
  std::vector<double> rpn_w(flat.size(), 0.0);
  for (std::size_t i = 0; i < flat.size(); ++i) {
    if (a.labels[i] != 1) continue;
    const Deltas d = encode_box(gts[a.matched_gt[i]], flat[i]);
    for (int k = 0; k < 4; ++k) rpn_targets[i * 4 + k] = d[k];
    rpn_w[i] = 1.0;
  }
  Var rpn_cls = nn::softmax_cross_entropy(logits, a.labels, rpn_norm);
  Var rpn_reg = nn::smooth_l1(deltas, rpn_targets, rpn_w, 1.0 / 9.0, rpn_norm);

  // Second stage on sampled proposals plus the ground truth itself.
  std::vector<Box> proposals = propose(logits->value, deltas->value, anchors, config_.rpn_pre_nms_train,
                                       config_.rpn_post_nms_train, W, H);
  proposals.insert(proposals.end(), gts.begin(), gts.end());
  Assignment ra = assign_targets(proposals, gts, config_.roi_pos_iou, config_.roi_pos_iou, false);
  subsample_labels(ra.labels, config_.roi_batch, config_.roi_pos_fraction, rng);
  std::vector<Box> rois;
  std::vector<int> roi_labels;
  std::vector<int> roi_gt;
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    if (ra.labels[i] < 0) continue;
    rois.push_back(proposals[i]);
    roi_labels.push_back(ra.labels[i]);
    roi_gt.push_back(ra.matched_gt[i]);
  }

  std::vector<Var> terms{rpn_cls, rpn_reg};
  double roi_cls_v = 0, roi_reg_v = 0;
  if (!rois.empty()) {
    std::vector<std::size_t> order;
    Var pooled = roi_features(f.levels, rois, order);
    Var cls, reg;
    box_head(pooled, cls, reg);
    const std::size_t R = order.size();
    std::vector<int> labels(R);
    Tensor targets({static_cast<int>(R), 4});
    std::vector<double> w(R, 0.0);
    for (std::size_t r = 0; r < R; ++r) {
      const std::size_t i = order[r];
      labels[r] = roi_labels[i];
      if (roi_labels[i] != 1) continue;
      const Deltas d = encode_box(gts[roi_gt[i]], rois[i], kRoiStds);
      for (int k = 0; k < 4; ++k) targets[r * 4 + k] = d[k];
      w[r] = 1.0;
    }
    Var roi_cls = nn::softmax_cross_entropy(cls, labels, static_cast<double>(R));
    Var roi_reg = nn::smooth_l1(reg, targets, w, 1.0, static_cast<double>(R));
    roi_cls_v = roi_cls->value[0];
    roi_reg_v = roi_reg->value[0];
    terms.push_back(roi_cls);
    terms.push_back(roi_reg);
  }
  if (breakdown) *breakdown = LossBreakdown{rpn_cls->value[0], rpn_reg->value[0], roi_cls_v, roi_reg_v};
  return nn::sum_scalars(terms);
}

}  // namespace groupdet::detector
