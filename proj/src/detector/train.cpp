// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#include "detector/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "common/error.hpp"
#include "detector/checkpoint.hpp"

namespace groupdet::detector {

std::vector<LabeledImage> load_images(const slicer::DatasetManifest& manifest,
                                      const std::filesystem::path& image_dir) {
  std::vector<LabeledImage> out;
  out.reserve(manifest.images.size());
  for (const auto& im : manifest.images) {
    const auto path = image_dir / im.file_name;
    if (!std::filesystem::exists(path)) throw MissingImage(path.string());
    LabeledImage li;
    li.image_id = im.id;
    li.image = read_png(path);
    if (li.image.width != im.width || li.image.height != im.height)
      throw ImageMismatch(im.file_name + " is " + std::to_string(li.image.width) + "x" +
                          std::to_string(li.image.height) + ", manifest says " + std::to_string(im.width) +
                          "x" + std::to_string(im.height));
    if (auto it = manifest.texts.find(im.id); it != manifest.texts.end()) li.texts = it->second;
    for (const auto* a : manifest.annotations_for(im.id))
      li.groups.push_back(Box{a->bbox[0], a->bbox[1], a->bbox[0] + a->bbox[2], a->bbox[1] + a->bbox[3]});
    out.push_back(std::move(li));
  }
  return out;
}

InMemoryDataset in_memory_dataset(const std::vector<ScreenSample>& samples) {
  InMemoryDataset ds;
  ds.manifest.categories.push_back({});
  std::int64_t ann_id = 1;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const std::int64_t id = static_cast<std::int64_t>(i) + 1;
    ds.manifest.images.push_back({id, s.sample_id + ".png", s.width, s.height});
    ds.manifest.texts[id] = s.texts;
    LabeledImage li{id, s.image, s.texts, {}};
    for (const auto& g : s.groups) {
      ds.manifest.annotations.push_back(
          {ann_id++, id, g.category_id, {g.bbox.x, g.bbox.y, g.bbox.w, g.bbox.h}, g.bbox.area(), 0});
      li.groups.push_back(to_box(g.bbox));
    }
    ds.images.push_back(std::move(li));
  }
  return ds;
}

cocoeval::DetectionsByImage predict_all(const Detector& detector, const std::vector<LabeledImage>& images) {
  cocoeval::DetectionsByImage out;
  for (const auto& li : images) out[li.image_id] = detector.predict(li.image, li.texts);
  return out;
}

nlohmann::json to_json(const EpochRecord& r) {
  nlohmann::json j = {{"epoch", r.epoch},
                      {"iterations", r.iterations},
                      {"loss", r.loss},
                      {"lr", r.lr},
                      {"rpn_cls", r.parts.rpn_cls},
                      {"rpn_reg", r.parts.rpn_reg},
                      {"roi_cls", r.parts.roi_cls},
                      {"roi_reg", r.parts.roi_reg},
                      {"seconds", r.seconds}};
  const auto ev = cocoeval::to_json(r.val);
  j["ap"] = ev["AP"];
  j["ap50"] = ev["AP50"];
  j["ap75"] = ev["AP75"];
  j["aps"] = ev["APs"];
  j["apm"] = ev["APm"];
  j["apl"] = ev["APl"];
  return j;
}

namespace {

class Sgd {
 public:
  Sgd(nn::ParamStore& store, const DetectorConfig& c) : store_(store), c_(c) {
    for (const auto& [name, var] : store_.all()) velocity_.emplace(name, nn::Tensor(var->value.shape));
  }

  void step(double lr, double grad_scale) {
    double scale = grad_scale;
    if (c_.grad_clip > 0) {
      double sq = 0;
      for (const auto& [name, var] : store_.all())
        for (double g : var->grad.data) sq += g * g * grad_scale * grad_scale;
      const double norm = std::sqrt(sq);
      if (norm > c_.grad_clip) scale *= c_.grad_clip / norm;
    }
    for (const auto& [name, var] : store_.all()) {
      if (var->grad.numel() != var->value.numel()) continue;  // untouched this step
      auto& v = velocity_.at(name);
      for (std::size_t i = 0; i < v.numel(); ++i) {
        const double g = var->grad[i] * scale + c_.weight_decay * var->value[i];
        v[i] = c_.momentum * v[i] + g;
        var->value[i] -= lr * v[i];
      }
    }
  }

 private:
  nn::ParamStore& store_;
  const DetectorConfig& c_;
  std::map<std::string, nn::Tensor> velocity_;
};

bool grads_finite(const nn::ParamStore& store) {
  for (const auto& [name, var] : store.all())
    for (double v : var->grad.data)
      if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace

TrainResult train(Detector& detector, const std::vector<LabeledImage>& train_set,
                  const slicer::DatasetManifest& val_manifest, const std::vector<LabeledImage>& val_set,
                  const TrainOptions& options) {
  const DetectorConfig& c = detector.config();
  if (train_set.empty()) throw ConfigError("training set is empty");
  if (val_set.empty()) throw ConfigError("validation set is empty");

  std::ofstream log;
  if (!options.metric_log.empty()) {
    if (options.metric_log.has_parent_path()) std::filesystem::create_directories(options.metric_log.parent_path());
    log.open(options.metric_log, std::ios::trunc);
    if (!log) throw IOError("cannot write " + options.metric_log.string());
  }

  Rng rng(splitmix64(c.seed ^ 0x747261696eull));
  Sgd sgd(detector.params(), c);
  TrainResult result;
  bool saved = false;
  auto save = [&] {
    if (options.checkpoint.empty()) return;
    save_checkpoint(detector, options.checkpoint);
    saved = true;
  };

  std::vector<std::size_t> order(train_set.size());
  for (int epoch = 0; epoch < c.epochs; ++epoch) {
    if (c.max_iters > 0 && result.iterations >= c.max_iters) break;
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);

    EpochRecord rec;
    rec.epoch = epoch;
    std::vector<double> losses;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(c.batch)) {
      if (c.max_iters > 0 && result.iterations >= c.max_iters) break;
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(c.batch));
      detector.params().zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        const auto& li = train_set[order[k]];
        const bool flip = rng.bernoulli(c.flip_prob);
        LossBreakdown parts;
        nn::Var loss = detector.training_loss(li.image, li.texts, li.groups, rng, flip, &parts);
        const double value = loss->value[0];
        if (!std::isfinite(value)) {
          if (!saved) save();
          throw DivergenceDetected("non-finite loss at epoch " + std::to_string(epoch) + ", iteration " +
                                   std::to_string(result.iterations));
        }
        nn::backward(loss);
        losses.push_back(value);
        rec.parts.rpn_cls += parts.rpn_cls;
        rec.parts.rpn_reg += parts.rpn_reg;
        rec.parts.roi_cls += parts.roi_cls;
        rec.parts.roi_reg += parts.roi_reg;
      }
      if (!grads_finite(detector.params())) {
        if (!saved) save();
        throw DivergenceDetected("non-finite gradient at iteration " + std::to_string(result.iterations));
      }
      rec.lr = learning_rate(c, epoch, result.iterations);
      sgd.step(rec.lr, 1.0 / static_cast<double>(end - start));
      ++result.iterations;
    }
    if (losses.empty()) break;

    const double n = static_cast<double>(losses.size());
    rec.loss = std::accumulate(losses.begin(), losses.end(), 0.0) / n;
    rec.parts = LossBreakdown{rec.parts.rpn_cls / n, rec.parts.rpn_reg / n, rec.parts.roi_cls / n,
                              rec.parts.roi_reg / n};
    rec.iterations = result.iterations;
    rec.val = cocoeval::evaluate(val_manifest, predict_all(detector, val_set));
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (rec.val.ap > result.best_ap || result.best_epoch < 0) {
      result.best_ap = rec.val.ap;
      result.best_epoch = epoch;
      save();
    }
    if (log) log << to_json(rec).dump() << "\n" << std::flush;
    if (options.on_epoch) options.on_epoch(rec);
    result.epochs.push_back(rec);
    result.image_losses.push_back(std::move(losses));
  }
  return result;
}

}  // namespace groupdet::detector
