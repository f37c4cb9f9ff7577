// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cocoeval/cocoeval.hpp"
#include "detector/model.hpp"
#include "slicer/slicer.hpp"

namespace groupdet::detector {

// One image with its inputs and ground truth, ready for the detector.
struct LabeledImage {
  std::int64_t image_id = 0;
  Image image;
  std::vector<TextLayerRecord> texts;
  std::vector<Box> groups;  // pixels
};

// Reads every image of `manifest` from `image_dir`. Throws MissingImage or
// ImageMismatch.
std::vector<LabeledImage> load_images(const slicer::DatasetManifest& manifest,
                                      const std::filesystem::path& image_dir);

struct InMemoryDataset {
  slicer::DatasetManifest manifest;
  std::vector<LabeledImage> images;
};

// Wraps screens as a dataset without touching disk; image ids count from 1.
InMemoryDataset in_memory_dataset(const std::vector<ScreenSample>& samples);

cocoeval::DetectionsByImage predict_all(const Detector& detector, const std::vector<LabeledImage>& images);

struct EpochRecord {
  int epoch = 0;
  long long iterations = 0;  // cumulative
  double loss = 0;           // mean over the epoch's images
  double lr = 0;             // at the epoch's last step
  LossBreakdown parts;       // means
  cocoeval::EvalReport val;
  double seconds = 0;
};

nlohmann::json to_json(const EpochRecord& r);

struct TrainOptions {
  std::filesystem::path checkpoint;  // best-AP weights; empty disables
  std::filesystem::path metric_log;  // newline-delimited JSON; empty disables
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochRecord> epochs;
  std::vector<std::vector<double>> image_losses;  // per epoch
  long long iterations = 0;
  int best_epoch = -1;
  double best_ap = -1;
};

// SGD with momentum and L2 weight decay added to the gradient, step
// learning-rate decay with linear warmup. The data order,
// flips, and sampling all derive from config.seed. A non-finite loss throws
// DivergenceDetected; the checkpoint file then holds the last good weights.
TrainResult train(Detector& detector, const std::vector<LabeledImage>& train_set,
                  const slicer::DatasetManifest& val_manifest, const std::vector<LabeledImage>& val_set,
                  const TrainOptions& options = {});

}  // namespace groupdet::detector
