// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "common/geometry.hpp"
#include "draft/sample.hpp"

namespace groupdet::slicer {

// Square crop window placed along the long axis of a screen.
struct Window {
  int offset = 0;
  int side = 0;
  bool operator==(const Window&) const = default;
  auto operator<=>(const Window&) const = default;
};

struct WindowPlan {
  std::vector<Window> windows;   // sorted by offset, no duplicates
  bool vertical = true;          // long axis is y (height >= width)
  std::vector<std::size_t> skipped;  // indices of boxes longer than the side
};

// Base windows every floor(side/2) pixels plus one flush with the far edge,
// then a rescue window for every coverable box that no window contains.
// Every box whose long-axis extent is <= side ends up fully inside at least
// one window; longer boxes are listed in `skipped`.
WindowPlan compute_windows(int height, int width, const std::vector<Rect>& boxes);

struct SliceSample {
  std::string parent_id;
  std::string package_id;
  Window window;
  bool vertical = true;
  Image image;
  std::vector<GroupLabel> groups;      // slice-local pixels
  std::vector<TextLayerRecord> texts;  // normalized by the slice side

  // Offset of the window's top-left corner in parent pixels.
  int origin_x() const { return vertical ? 0 : window.offset; }
  int origin_y() const { return vertical ? window.offset : 0; }
  std::string slice_id() const { return parent_id + "_" + std::to_string(window.offset); }
};

struct SliceReport {
  std::vector<SliceSample> slices;
  std::vector<GroupLabel> skipped;  // groups no square window can hold
};

// Crops one slice per window; keeps groups and texts that lie entirely inside
// the window, translated into window coordinates. Pixels are never resized.
SliceReport slice_sample(const ScreenSample& sample);

struct SplitRatios {
  double train = 0.8, val = 0.1, test = 0.1;
};

// Package-closed assignment: the sorted distinct package ids are shuffled
// with `seed` and cut into three runs sized by largest remainder (each split
// receives at least one package). Returns 0/1/2 per package id.
std::map<std::string, int> assign_packages(const std::vector<std::string>& package_ids,
                                           SplitRatios ratios, std::uint64_t seed);

struct CorpusSplit {
  std::vector<ScreenSample> train, val, test;
};

CorpusSplit split_corpus(std::vector<ScreenSample> samples, SplitRatios ratios,
                         std::uint64_t seed);

// COCO-style dataset description with a text sidecar.
struct ImageEntry {
  std::int64_t id = 0;
  std::string file_name;
  int width = 0, height = 0;
  bool operator==(const ImageEntry&) const = default;
};

struct AnnotationEntry {
  std::int64_t id = 0;
  std::int64_t image_id = 0;
  int category_id = kGroupCategoryId;
  std::array<double, 4> bbox{};  // x, y, w, h in pixels
  double area = 0;
  int iscrowd = 0;
  bool operator==(const AnnotationEntry&) const = default;
};

struct CategoryEntry {
  int id = kGroupCategoryId;
  std::string name = kGroupCategoryName;
  bool operator==(const CategoryEntry&) const = default;
};

struct DatasetManifest {
  std::vector<ImageEntry> images;
  std::vector<AnnotationEntry> annotations;
  std::vector<CategoryEntry> categories;
  std::map<std::int64_t, std::vector<TextLayerRecord>> texts;

  bool operator==(const DatasetManifest&) const = default;

  const ImageEntry* find_image(std::int64_t id) const;
  std::vector<const AnnotationEntry*> annotations_for(std::int64_t image_id) const;
};

// Checks referential integrity (unique ids, annotation image ids exist,
// area = w*h, normalized texts). Throws SchemaError.
void validate_manifest(const DatasetManifest& manifest);

// Writes `annotations.json` and `texts.json` into `directory`.
void write_coco(const DatasetManifest& manifest, const std::filesystem::path& directory);
DatasetManifest read_coco(const std::filesystem::path& directory);

struct DatasetStats {
  std::size_t images = 0, groups = 0, texts = 0;
};

// Writes the slice PNGs (`<parent_id>_<offset>.png`) and the COCO files for
// `slices` into `directory`; image and annotation ids count up from 1.
DatasetManifest write_slice_dataset(const std::vector<SliceSample>& slices,
                                    const std::filesystem::path& directory);

DatasetStats stats_of(const DatasetManifest& manifest);

}  // namespace groupdet::slicer
