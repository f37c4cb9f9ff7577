// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <fstream>

#include "common/error.hpp"
#include "detector/boxes.hpp"
#include "detector/checkpoint.hpp"
#include "detector/config.hpp"
#include "detector/model.hpp"
#include "detector/train.hpp"
#include "support.hpp"
#include "synth/synth.hpp"

using namespace groupdet;
using namespace groupdet::detector;

namespace {

DetectorConfig small_config(fusion::FusionMode mode = fusion::FusionMode::kNone) {
  DetectorConfig c;
  c.resize_short = 64;
  c.resize_long = 96;
  c.rpn_pre_nms_train = c.rpn_pre_nms_test = 200;
  c.rpn_post_nms_train = c.rpn_post_nms_test = 50;
  c.roi_batch = 64;
  c.rpn_batch = 64;
  c.fusion = mode;
  c.seed = 11;
  return c;
}

const synth::SynthCorpus& corpus() {
  static const synth::SynthCorpus c = [] {
    synth::SynthSpec s;
    s.seed = 8;
    s.n_screens = 3;
    s.size_max = 300;
    return synth::generate_corpus(s);
  }();
  return c;
}

std::vector<Box> gt_boxes(const ScreenSample& s) {
  std::vector<Box> out;
  for (const auto& g : s.groups) out.push_back(to_box(g.bbox));
  return out;
}

void check_close(const nn::Tensor& a, const nn::Tensor& b, double tol) {
  REQUIRE(a.shape == b.shape);
  double worst = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  CHECK(worst <= tol);
}

}  // namespace

TEST_CASE("anchor geometry") {
  const auto one = level_anchors({1, 1}, 32, 32, {1.0});
  REQUIRE(one.size() == 1);
  CHECK(one[0] == Box{0, 0, 32, 32});

  const auto tall = level_anchors({1, 1}, 32, 32, {4.0});
  const double w = tall[0].width(), h = tall[0].height();
  CHECK(w == doctest::Approx(16));
  CHECK(h == doctest::Approx(64));
  CHECK(h / w == doctest::Approx(4));
  CHECK(w * h == doctest::Approx(1024));
  CHECK((tall[0].x0 + tall[0].x1) / 2 == doctest::Approx(16));

  const std::vector<double> ratios{0.5, 1.0, 2.0, 4.0, 8.0};
  CHECK(level_anchors({2, 2}, 8, 32, ratios).size() == 20);

  const std::vector<LevelShape> shapes{{16, 12}, {8, 6}, {4, 3}, {2, 2}, {1, 1}};
  const auto all = build_anchors(shapes, {4, 8, 16, 32, 64}, {32, 64, 128, 256, 512}, ratios);
  REQUIRE(all.size() == 5);
  std::size_t total = 0, closed = 0;
  for (std::size_t l = 0; l < 5; ++l) {
    CHECK(all[l].size() == 5u * shapes[l].rows * shapes[l].cols);
    total += all[l].size();
    closed += 5u * shapes[l].rows * shapes[l].cols;
    for (const auto& a : all[l]) {
      const double size = 32.0 * (1 << l);
      CHECK(a.width() * a.height() == doctest::Approx(size * size));
    }
  }
  CHECK(total == closed);
  // Cell-major order: anchor a of cell (y, x) sits at (y * cols + x) * A + a.
  const auto& p3 = all[1];
  const Box b = p3[(2 * 6 + 3) * 5 + 1];
  CHECK((b.x0 + b.x1) / 2 == doctest::Approx(3.5 * 8));
  CHECK((b.y0 + b.y1) / 2 == doctest::Approx(2.5 * 8));
}

TEST_CASE("iou examples and symmetry") {
  CHECK(iou({0, 0, 2, 2}, {1, 0, 3, 2}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(iou({0, 0, 2, 2}, {0, 0, 2, 2}) == 1.0);
  CHECK(iou({0, 0, 1, 1}, {2, 2, 3, 3}) == 0.0);
  CHECK(iou({1, 1, 1, 1}, {1, 1, 1, 1}) == 0.0);
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    const Box a{rng.uniform(0, 50), rng.uniform(0, 50), rng.uniform(50, 100), rng.uniform(50, 100)};
    const Box b{rng.uniform(0, 50), rng.uniform(0, 50), rng.uniform(50, 100), rng.uniform(50, 100)};
    CHECK(iou(a, b) == iou(b, a));
    CHECK(iou(a, a) == doctest::Approx(1.0));
    CHECK(iou(a, b) >= 0.0);
    CHECK(iou(a, b) <= 1.0);
  }
}

TEST_CASE("anchor assignment rules") {
  const Box gt{0, 0, 10, 10};
  SUBCASE("exact match is positive with zero targets") {
    const auto a = assign_targets({gt, {50, 50, 60, 60}}, {gt}, 0.7, 0.3);
    CHECK(a.labels == std::vector<int>{1, 0});
    CHECK(a.matched_gt[0] == 0);
    for (double d : encode_box(gt, gt)) CHECK(d == 0.0);
  }
  SUBCASE("best anchor of a gt is positive below the threshold") {
    const auto a = assign_targets({{0, 0, 10, 4}, {50, 50, 60, 60}}, {gt}, 0.7, 0.3);
    CHECK(a.max_iou[0] == doctest::Approx(0.4));
    CHECK(a.labels[0] == 1);
    CHECK(a.labels[1] == 0);
    const auto strict = assign_targets({{0, 0, 10, 4}}, {gt}, 0.7, 0.3, false);
    CHECK(strict.labels[0] == -1);
  }
  SUBCASE("middle band is ignored") {
    const auto a = assign_targets({{0, 0, 10, 5}, {0, 0, 10, 6}, {50, 50, 60, 60}}, {gt}, 0.7, 0.3);
    CHECK(a.max_iou[0] == doctest::Approx(0.5));
    CHECK(a.labels == std::vector<int>{-1, 1, 0});
  }
  SUBCASE("no gt makes everything negative") {
    const auto a = assign_targets({gt, {5, 5, 9, 9}}, {}, 0.7, 0.3);
    CHECK(a.labels == std::vector<int>{0, 0});
  }
}

TEST_CASE("subsampling respects the budget") {
  Rng rng(6);
  std::vector<int> labels(1000, 0);
  for (int i = 0; i < 300; ++i) labels[i * 3] = 1;
  for (int i = 0; i < 100; ++i) labels[i * 7 + 1] = -1;
  subsample_labels(labels, 256, 0.25, rng);
  CHECK(std::count(labels.begin(), labels.end(), 1) == 64);
  CHECK(std::count(labels.begin(), labels.end(), 0) == 192);
  std::vector<int> few{1, 0, 0, -1};
  subsample_labels(few, 256, 0.5, rng);
  CHECK(few == std::vector<int>{1, 0, 0, -1});
}

TEST_CASE("box encoding round trips") {
  Rng rng(7);
  const Deltas stds{0.1, 0.1, 0.2, 0.2};
  for (int i = 0; i < 1000; ++i) {
    const double ax = rng.uniform(0, 500), ay = rng.uniform(0, 500);
    const Box anchor{ax, ay, ax + rng.uniform(16, 300), ay + rng.uniform(16, 300)};
    const double gx = rng.uniform(0, 500), gy = rng.uniform(0, 500);
    const Box gt{gx, gy, gx + rng.uniform(16, 300), gy + rng.uniform(16, 300)};
    for (const auto& s : {Deltas{1, 1, 1, 1}, stds}) {
      const Box back = decode_box(encode_box(gt, anchor, s), anchor, s);
      CHECK(std::abs(back.x0 - gt.x0) <= 1e-5);
      CHECK(std::abs(back.y0 - gt.y0) <= 1e-5);
      CHECK(std::abs(back.x1 - gt.x1) <= 1e-5);
      CHECK(std::abs(back.y1 - gt.y1) <= 1e-5);
    }
  }
  // Standard offsets: tx = (gx - ax) / aw, tw = log(gw / aw).
  const auto d = encode_box({10, 20, 30, 60}, {0, 0, 10, 20});
  CHECK(d[0] == doctest::Approx(1.5));
  CHECK(d[1] == doctest::Approx(1.5));
  CHECK(d[2] == doctest::Approx(std::log(2.0)));
  CHECK(d[3] == doctest::Approx(std::log(2.0)));
}

TEST_CASE("nms examples") {
  CHECK(nms({{0, 0, 4, 4}}, {0.3}, 0.5) == std::vector<std::size_t>{0});
  CHECK(nms({{0, 0, 4, 4}, {0, 0, 4, 4}}, {0.9, 0.8}, 0.5) == std::vector<std::size_t>{0});
  // IoU of the first two is 75 / 125 = 0.6.
  const std::vector<Box> three{{0, 0, 10, 10}, {2.5, 0, 12.5, 10}, {50, 50, 60, 60}};
  CHECK(iou(three[0], three[1]) == doctest::Approx(0.6));
  CHECK(nms(three, {0.9, 0.8, 0.7}, 0.5) == std::vector<std::size_t>{0, 2});
  CHECK(nms(three, {0.9, 0.8, 0.7}, 0.6) == std::vector<std::size_t>{0, 1, 2});
  // Equal scores: the lower index wins.
  CHECK(nms({{0, 0, 4, 4}, {0, 0, 4, 4}}, {0.5, 0.5}, 0.5) == std::vector<std::size_t>{0});
  CHECK(nms(three, {0.1, 0.2, 0.3}, 0.5) == std::vector<std::size_t>{2, 1});
  CHECK(nms(three, {0.9, 0.8, 0.7}, 0.6, 2) == std::vector<std::size_t>{0, 1});
}

TEST_CASE("learning rate decays tenfold every ten epochs") {
  DetectorConfig c;
  const long long late = 1'000'000;
  CHECK(learning_rate(c, 0, late) == doctest::Approx(0.01));
  CHECK(learning_rate(c, 9, late) == doctest::Approx(0.01));
  CHECK(learning_rate(c, 10, late) == doctest::Approx(0.001));
  CHECK(learning_rate(c, 20, late) == doctest::Approx(0.0001));
  CHECK(learning_rate(c, 0, 0) == doctest::Approx(0.01 * c.warmup_ratio));
  CHECK(learning_rate(c, 0, c.warmup_iters / 2) < 0.01);
  CHECK(learning_rate(c, 0, c.warmup_iters) == doctest::Approx(0.01));
}

TEST_CASE("resizing preserves aspect and inverts within a pixel") {
  CHECK(resized_size(1080, 1920, 800, 1300) == std::pair{731, 1300});
  CHECK(resized_size(600, 800, 800, 1300) == std::pair{800, 1067});
  Rng rng(9);
  for (int i = 0; i < 300; ++i) {
    const int w = static_cast<int>(rng.uniform_int(50, 3000)), h = static_cast<int>(rng.uniform_int(50, 3000));
    const auto [rw, rh] = resized_size(w, h, 800, 1300);
    CHECK(std::min(rw, rh) <= 800);
    CHECK(std::max(rw, rh) <= 1300);
    CHECK((std::min(rw, rh) == 800 || std::max(rw, rh) == 1300));
    // Both sides come from one scale factor, each rounded to the nearest pixel.
    const double s = std::min(800.0 / std::min(w, h), 1300.0 / std::max(w, h));
    CHECK(std::abs(rw - w * s) <= 0.5 + 1e-9);
    CHECK(std::abs(rh - h * s) <= 0.5 + 1e-9);
    // Detections are mapped back with the per-axis factors the resize used.
    const double sx = double(rw) / w, sy = double(rh) / h;
    const Box gt{rng.uniform(0, w / 2.0), rng.uniform(0, h / 2.0), rng.uniform(w / 2.0, w), rng.uniform(h / 2.0, h)};
    const Box r{gt.x0 * sx, gt.y0 * sy, gt.x1 * sx, gt.y1 * sy};
    CHECK(std::abs(r.x0 / sx - gt.x0) <= 1.0);
    CHECK(std::abs(r.y1 / sy - gt.y1) <= 1.0);
    CHECK(std::abs(r.x1 / sx - gt.x1) <= 1.0);
  }
  Image img(40, 20, {255, 0, 128});
  const auto p = preprocess(img, 30, 100);
  CHECK(p.pixels.shape == std::vector<int>{3, 30, 60});
  CHECK(p.scale_x == doctest::Approx(1.5));
  CHECK(p.pixels.at(0, 5, 5) == doctest::Approx((1.0 - 0.5) / 0.25));
  CHECK(p.pixels.at(1, 5, 5) == doctest::Approx(-2.0));
  Image ramp(4, 1);
  for (int x = 0; x < 4; ++x) ramp.at(x, 0)[0] = static_cast<std::uint8_t>(x * 80);
  const auto flipped = preprocess(ramp, 1, 4, true);
  const auto plain = preprocess(ramp, 1, 4, false);
  for (int x = 0; x < 4; ++x) CHECK(flipped.pixels.at(0, 0, x) == plain.pixels.at(0, 0, 3 - x));
}

TEST_CASE("config validation and strict parsing") {
  DetectorConfig c;
  CHECK_NOTHROW(c.validate());
  auto broken = [](auto f) {
    DetectorConfig d;
    f(d);
    return d;
  };
  CHECK_THROWS_AS(broken([](auto& d) { d.anchor_sizes = {32, 64}; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](auto& d) { d.anchor_ratios = {1.0, -2.0}; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](auto& d) { d.rpn_pos_iou = 1.0; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](auto& d) { d.rpn_neg_iou = 0.8; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](auto& d) { d.n_classes = 3; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](auto& d) { d.resize_long = 100; }).validate(), ConfigError);

  const auto j = to_json(c);
  const auto back = detector_config_from_json(j);
  CHECK(to_json(back) == j);
  auto extra = j;
  extra["anchor_size"] = 3;
  CHECK_THROWS_AS(detector_config_from_json(extra), ConfigError);
  CHECK_THROWS_AS(detector_config_from_json(nlohmann::json{{"fusion", "late"}}), ConfigError);
  CHECK_THROWS_AS(detector_config_from_json(nlohmann::json{{"backbone", "vgg"}}), ConfigError);
  CHECK(detector_config_from_json(nlohmann::json{{"fusion", "text_fusion"}}).fusion ==
        fusion::FusionMode::kTextFusion);
  CHECK(detector_config_from_json(nlohmann::json::object()).epochs == 72);
}

TEST_CASE("forward pass shapes and determinism") {
  const auto& s = corpus().screens[0].sample;
  const Detector a(small_config()), b(small_config());
  for (const auto& [name, var] : a.params().all()) CHECK(var->value == b.params().get(name)->value);
  const auto t1 = a.trace(s.image, s.texts);
  const auto t2 = a.trace(s.image, s.texts);
  REQUIRE(t1.levels.size() == 5);
  CHECK(t1.stem->value.dim(0) == 16);
  for (std::size_t l = 0; l + 1 < 5; ++l) {
    CHECK(t1.levels[l]->value.dim(0) == 32);
    CHECK(t1.levels[l + 1]->value.dim(1) == (t1.levels[l]->value.dim(1) + 1) / 2);
  }
  std::size_t cells = 0;
  for (const auto& l : t1.levels) cells += static_cast<std::size_t>(l->value.dim(1)) * l->value.dim(2);
  CHECK(t1.rpn_logits->value.shape == std::vector<int>{static_cast<int>(cells * 5), 2});
  CHECK(t1.rpn_deltas->value.dim(0) == static_cast<int>(cells * 5));
  CHECK(t1.proposals.size() <= 50);
  CHECK(t1.detections == t2.detections);
  CHECK(b.predict(s.image, s.texts) == t1.detections);
  for (const auto& d : t1.detections) {
    CHECK(d.score >= 0.0);
    CHECK(d.score <= 1.0);
    CHECK(d.bbox.x >= 0);
    CHECK(d.bbox.y >= 0);
    CHECK(d.bbox.right() <= s.width + 1e-9);
    CHECK(d.bbox.bottom() <= s.height + 1e-9);
  }
  CHECK(t1.detections.size() <= 100);
}

TEST_CASE("fresh fusion modules leave every tensor unchanged") {
  const auto& s = corpus().screens[1].sample;
  const Detector base(small_config());
  const auto ref = base.trace(s.image, s.texts);
  for (auto mode : {fusion::FusionMode::kTextFusion, fusion::FusionMode::kBoxAttention, fusion::FusionMode::kBoth}) {
    const Detector fused(small_config(mode));
    CHECK(fused.params().all().size() > base.params().all().size());
    const auto t = fused.trace(s.image, s.texts);
    check_close(t.stem->value, ref.stem->value, 1e-6);
    for (std::size_t l = 0; l < 5; ++l) check_close(t.levels[l]->value, ref.levels[l]->value, 1e-6);
    check_close(t.rpn_logits->value, ref.rpn_logits->value, 1e-6);
    check_close(t.rpn_deltas->value, ref.rpn_deltas->value, 1e-6);
    CHECK(t.proposals == ref.proposals);
    CHECK(t.detections == ref.detections);
  }
}

TEST_CASE("full backbone builds the ResNet-50 layout") {
  DetectorConfig c = small_config();
  c.backbone = BackbonePreset::kFull;
  const Detector d(c);
  const auto& p = d.params();
  // 1 stem + 16 blocks x 3 convs + 4 projections = 53 backbone convs.
  int convs = 0;
  for (const auto& [name, v] : p.all())
    if (name.rfind("backbone.", 0) == 0 && v->value.shape.size() == 4) ++convs;
  CHECK(convs == 53);
  CHECK(p.get("fpn.lateral3.weight")->value.shape == std::vector<int>{256, 2048, 1, 1});
  CHECK(p.get("roi.fc1.weight")->value.shape == std::vector<int>{1024, 256 * 49});
}

TEST_CASE("training loss is finite and differentiable") {
  const auto& s = corpus().screens[0].sample;
  const Detector d(small_config());
  Rng rng(1);
  LossBreakdown parts;
  const auto loss = d.training_loss(s.image, s.texts, gt_boxes(s), rng, false, &parts);
  CHECK(std::isfinite(loss->value[0]));
  CHECK(loss->value[0] == doctest::Approx(parts.total()));
  CHECK(parts.rpn_cls > 0);
  CHECK(parts.roi_cls > 0);
  nn::backward(loss);
  double norm = 0;
  for (const auto& [name, v] : d.params().all())
    for (double g : v->grad.data) norm += g * g;
  CHECK(std::isfinite(norm));
  CHECK(norm > 0);
  // A screen without groups still trains the classifiers.
  Rng rng2(1);
  LossBreakdown empty;
  d.training_loss(s.image, s.texts, {}, rng2, true, &empty);
  CHECK(empty.rpn_reg == 0.0);
  CHECK(empty.roi_reg == 0.0);
  CHECK(empty.rpn_cls > 0);
}

TEST_CASE("checkpoints round trip and reject mismatches") {
  const auto dir = testing::scratch("checkpoint");
  const auto& s = corpus().screens[2].sample;
  Detector d(small_config(fusion::FusionMode::kTextFusion));
  for (auto& v : d.params().get("text_fusion.proj.weight")->value.data) v = 0.01;
  save_checkpoint(d, dir / "a.gdck");
  const auto loaded = load_detector(dir / "a.gdck");
  CHECK(to_json(loaded->config()) == to_json(d.config()));
  for (const auto& [name, v] : d.params().all()) CHECK(loaded->params().get(name)->value == v->value);
  CHECK(loaded->predict(s.image, s.texts) == d.predict(s.image, s.texts));

  auto ck = read_checkpoint(dir / "a.gdck");
  Detector plain(small_config());
  CHECK_THROWS_AS(apply_weights(plain, ck.tensors), WeightMismatch);
  Detector other(small_config(fusion::FusionMode::kTextFusion));
  auto missing = ck.tensors;
  missing.erase("rpn.cls.weight");
  CHECK_THROWS_AS(apply_weights(other, missing), WeightMismatch);
  auto reshaped = ck.tensors;
  reshaped["rpn.cls.bias"] = nn::Tensor({3});
  CHECK_THROWS_AS(apply_weights(other, reshaped), WeightMismatch);
  CHECK_NOTHROW(apply_weights(other, ck.tensors));

  const std::string bytes = testing::slurp(dir / "a.gdck");
  std::ofstream(dir / "bad.gdck", std::ios::binary) << "XXXX" << bytes.substr(4);
  CHECK_THROWS_AS(read_checkpoint(dir / "bad.gdck"), IOError);
  std::ofstream(dir / "short.gdck", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  CHECK_THROWS_AS(read_checkpoint(dir / "short.gdck"), IOError);
  CHECK_THROWS_AS(read_checkpoint(dir / "none.gdck"), IOError);
}

TEST_CASE("training is seeded and logs every epoch") {
  const auto data = in_memory_dataset(corpus().samples());
  const std::vector<LabeledImage> train_set(data.images.begin(), data.images.begin() + 2);
  auto run = [&](const std::filesystem::path& dir) {
    DetectorConfig c = small_config();
    c.epochs = 2;
    c.warmup_iters = 2;
    Detector d(c);
    TrainOptions o;
    o.checkpoint = dir / "best.gdck";
    o.metric_log = dir / "metrics.ndjson";
    return train(d, train_set, data.manifest, data.images, o);
  };
  const auto dir1 = testing::scratch("train1"), dir2 = testing::scratch("train2");
  const auto r1 = run(dir1), r2 = run(dir2);
  REQUIRE(r1.epochs.size() == 2);
  CHECK(r1.iterations == 2);  // 2 images, batch 2
  CHECK(r1.epochs[0].loss == r2.epochs[0].loss);
  CHECK(r1.image_losses == r2.image_losses);
  CHECK(std::isfinite(r1.epochs[1].loss));
  CHECK(r1.best_epoch >= 0);
  CHECK(std::filesystem::exists(dir1 / "best.gdck"));
  std::ifstream log(dir1 / "metrics.ndjson");
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    const auto j = nlohmann::json::parse(line);
    for (const char* k : {"epoch", "loss", "ap", "ap50", "ap75", "lr", "iterations"}) CHECK(j.contains(k));
    ++lines;
  }
  CHECK(lines == 2);
}

TEST_CASE("exploding updates raise divergence") {
  const auto data = in_memory_dataset(corpus().samples());
  DetectorConfig c = small_config();
  c.lr = 1e12;
  c.warmup_iters = 0;
  c.epochs = 6;
  c.batch = 1;
  Detector d(c);
  const auto dir = testing::scratch("diverge");
  TrainOptions o;
  o.checkpoint = dir / "best.gdck";
  CHECK_THROWS_AS(train(d, data.images, data.manifest, data.images, o), DivergenceDetected);
  CHECK(std::filesystem::exists(dir / "best.gdck"));
  // The stored weights are the last finite ones.
  const auto ck = read_checkpoint(dir / "best.gdck");
  for (const auto& [name, t] : ck.tensors)
    for (double v : t.data) REQUIRE(std::isfinite(v));
}
