// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Design-draft ingestion. Drafts arrive as JSON documents:
//
//   {"package_id": str,
//    "artboards": [{"id": str, "name": str, "width": int, "height": int,
//                   "image_ref": str, "layers": [LAYER...]}]}
//   LAYER = {"id": str, "kind": "text"|"shape"|"bitmap"|"group",
//            "name": str, "frame": [x, y, w, h],
//            "content": str?, "children": [LAYER...]?}
//
// Layer frames in the document are relative to the parent layer (or the
// artboard for top-level layers). Parsing resolves them to absolute artboard
// coordinates. Containers whose name contains "#group#" mark ground-truth
// groups.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "common/geometry.hpp"
#include "draft/sample.hpp"

namespace groupdet::draft {

enum class LayerKind { kText, kShape, kBitmap, kGroup };

struct Layer {
  std::string id;
  LayerKind kind = LayerKind::kShape;
  std::string name;
  Rect frame;  // absolute, artboard coordinates
  Rect local;  // as written in the document, parent-relative
  std::optional<std::string> text_content;
  std::vector<Layer> children;

  bool operator==(const Layer&) const = default;
};

struct Artboard {
  std::string id;
  std::string name;
  int width = 0;
  int height = 0;
  std::string image_ref;
  std::vector<Layer> layers;

  bool operator==(const Artboard&) const = default;
};

struct DesignDraft {
  std::string package_id;
  std::vector<Artboard> artboards;

  bool operator==(const DesignDraft&) const = default;
};

inline constexpr std::string_view kGroupMarker = "#group#";

// Throws SchemaError or EmptyDraft.
DesignDraft parse_draft(std::string_view document);
DesignDraft load_draft(const std::filesystem::path& path);

// Writes the parent-relative form accepted by parse_draft.
std::string serialize_draft(const DesignDraft& draft, int indent = -1);

struct ExtractOptions {
  // Directory that image_ref paths are resolved against.
  std::filesystem::path image_root;
  // Artboards without an image are skipped unless this is set, in which case
  // MissingImage is thrown.
  bool require_images = false;
};

struct ExtractResult {
  std::vector<ScreenSample> samples;
  std::vector<std::string> warnings;
};

// One ScreenSample per artboard whose bitmap is present. Throws
// ImageMismatch when a bitmap does not match the artboard size.
ExtractResult extract_screen_samples(const DesignDraft& draft, const ExtractOptions& options);

// Normalized, clamped text records for every text layer that overlaps the
// artboard. Layers lying wholly outside are dropped.
std::vector<TextLayerRecord> collect_text_records(const Artboard& artboard);

// One label per "#group#" layer: the union of its leaf descendants' frames,
// clipped to the artboard. Containers with no leaves (or whose union lies
// outside the artboard) are skipped and reported through `warnings`.
std::vector<GroupLabel> collect_group_labels(const Artboard& artboard,
                                             std::vector<std::string>* warnings = nullptr);

}  // namespace groupdet::draft
