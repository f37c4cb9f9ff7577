// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#include "draft/draft.hpp"

#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "common/error.hpp"

namespace groupdet::draft {

using nlohmann::json;

namespace {

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(where + ": missing field '" + key + "'");
  return *it;
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_string()) throw SchemaError(where + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

int require_positive_int(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_number_integer() || v.get<long long>() <= 0 || v.get<long long>() > (1 << 20))
    throw SchemaError(where + ": field '" + key + "' must be a positive integer");
  return v.get<int>();
}

LayerKind parse_kind(const std::string& s, const std::string& where) {
  if (s == "text") return LayerKind::kText;
  if (s == "shape") return LayerKind::kShape;
  if (s == "bitmap") return LayerKind::kBitmap;
  if (s == "group") return LayerKind::kGroup;
  throw SchemaError(where + ": unknown layer kind '" + s + "'");
}

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kText: return "text";
    case LayerKind::kShape: return "shape";
    case LayerKind::kBitmap: return "bitmap";
    case LayerKind::kGroup: return "group";
  }
  return "shape";
}

Rect parse_frame(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 4)
    throw SchemaError(where + ": frame must be [x, y, w, h]");
  for (const auto& e : v)
    if (!e.is_number()) throw SchemaError(where + ": frame entries must be numbers");
  Rect r{v[0].get<double>(), v[1].get<double>(), v[2].get<double>(), v[3].get<double>()};
  if (!(r.w >= 0) || !(r.h >= 0)) throw SchemaError(where + ": negative frame size");
  return r;
}

Layer parse_layer(const json& j, double origin_x, double origin_y, const std::string& where) {
  if (!j.is_object()) throw SchemaError(where + ": layer must be an object");
  Layer layer;
  layer.id = require_string(j, "id", where);
  const std::string at = where + "/" + layer.id;
  layer.kind = parse_kind(require_string(j, "kind", at), at);
  layer.name = require_string(j, "name", at);
  layer.local = parse_frame(require(j, "frame", at), at);
  layer.frame = layer.local;
  layer.frame.x += origin_x;
  layer.frame.y += origin_y;

  auto content = j.find("content");
  if (layer.kind == LayerKind::kText) {
    if (content == j.end() || !content->is_string())
      throw SchemaError(at + ": text layer requires string 'content'");
    layer.text_content = content->get<std::string>();
  } else if (content != j.end() && !content->is_null()) {
    throw SchemaError(at + ": only text layers carry 'content'");
  }

  auto children = j.find("children");
  if (children != j.end() && !children->is_null()) {
    if (!children->is_array()) throw SchemaError(at + ": 'children' must be an array");
    if (!children->empty() && layer.kind != LayerKind::kGroup)
      throw SchemaError(at + ": only group layers may have children");
    for (const auto& c : *children)
      layer.children.push_back(parse_layer(c, layer.frame.x, layer.frame.y, at));
  }
  return layer;
}

json layer_to_json(const Layer& layer) {
  json j;
  j["id"] = layer.id;
  j["kind"] = kind_name(layer.kind);
  j["name"] = layer.name;
  j["frame"] = {layer.local.x, layer.local.y, layer.local.w, layer.local.h};
  if (layer.text_content) j["content"] = *layer.text_content;
  if (layer.kind == LayerKind::kGroup) {
    json kids = json::array();
    for (const auto& c : layer.children) kids.push_back(layer_to_json(c));
    j["children"] = std::move(kids);
  }
  return j;
}

void for_each_layer(const std::vector<Layer>& layers, const std::function<void(const Layer&)>& fn) {
  for (const auto& l : layers) {
    fn(l);
    for_each_layer(l.children, fn);
  }
}

}  // namespace

DesignDraft parse_draft(std::string_view document) {
  json root;
  try {
    root = json::parse(document);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw SchemaError("draft root must be an object");

  DesignDraft draft;
  draft.package_id = require_string(root, "package_id", "draft");
  const json& boards = require(root, "artboards", "draft");
  if (!boards.is_array()) throw SchemaError("draft: 'artboards' must be an array");
  if (boards.empty()) throw EmptyDraft("package '" + draft.package_id + "' has no artboards");

  std::set<std::string> seen;
  for (const auto& b : boards) {
    if (!b.is_object()) throw SchemaError("artboard must be an object");
    Artboard ab;
    ab.id = require_string(b, "id", "artboard");
    const std::string where = "artboard " + ab.id;
    if (!seen.insert(ab.id).second) throw SchemaError(where + ": duplicate artboard id");
    ab.name = require_string(b, "name", where);
    ab.width = require_positive_int(b, "width", where);
    ab.height = require_positive_int(b, "height", where);
    ab.image_ref = require_string(b, "image_ref", where);
    const json& layers = require(b, "layers", where);
    if (!layers.is_array()) throw SchemaError(where + ": 'layers' must be an array");
    for (const auto& l : layers) ab.layers.push_back(parse_layer(l, 0.0, 0.0, where));
    draft.artboards.push_back(std::move(ab));
  }
  return draft;
}

DesignDraft load_draft(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOError("cannot open draft " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_draft(buf.str());
}

std::string serialize_draft(const DesignDraft& draft, int indent) {
  json root;
  root["package_id"] = draft.package_id;
  root["artboards"] = json::array();
  for (const auto& ab : draft.artboards) {
    json b;
    b["id"] = ab.id;
    b["name"] = ab.name;
    b["width"] = ab.width;
    b["height"] = ab.height;
    b["image_ref"] = ab.image_ref;
    b["layers"] = json::array();
    for (const auto& l : ab.layers) b["layers"].push_back(layer_to_json(l));
    root["artboards"].push_back(std::move(b));
  }
  return root.dump(indent);
}

std::vector<TextLayerRecord> collect_text_records(const Artboard& artboard) {
  const double W = artboard.width, H = artboard.height;
  std::vector<TextLayerRecord> out;
  for_each_layer(artboard.layers, [&](const Layer& l) {
    if (l.kind != LayerKind::kText) return;
    const Rect& f = l.frame;
    if (!(f.x < W && f.right() > 0 && f.y < H && f.bottom() > 0)) return;
    const Box clipped = box_clip(to_box(f), W, H);
    out.push_back({*l.text_content, {clipped.x0 / W, clipped.y0 / H, clipped.x1 / W, clipped.y1 / H}});
  });
  return out;
}

namespace {

bool leaf_union(const Layer& layer, Box& acc, bool& any) {
  for (const auto& c : layer.children) {
    if (c.kind == LayerKind::kGroup) {
      leaf_union(c, acc, any);
      continue;
    }
    const Box b = to_box(c.frame);
    acc = any ? box_union(acc, b) : b;
    any = true;
  }
  return any;
}

}  // namespace

std::vector<GroupLabel> collect_group_labels(const Artboard& artboard,
                                             std::vector<std::string>* warnings) {
  std::vector<GroupLabel> out;
  for_each_layer(artboard.layers, [&](const Layer& l) {
    if (l.name.find(kGroupMarker) == std::string::npos) return;
    Box u;
    bool any = false;
    if (!leaf_union(l, u, any)) {
      if (warnings)
        warnings->push_back("artboard " + artboard.id + ": group layer " + l.id +
                            " has no descendants, skipped");
      return;
    }
    const Box clipped = box_clip(u, artboard.width, artboard.height);
    if (clipped.area() <= 0) {
      if (warnings)
        warnings->push_back("artboard " + artboard.id + ": group layer " + l.id +
                            " lies outside the artboard, skipped");
      return;
    }
    out.push_back({to_rect(clipped), kGroupCategoryId});
  });
  return out;
}

ExtractResult extract_screen_samples(const DesignDraft& draft, const ExtractOptions& options) {
  ExtractResult result;
  for (const auto& ab : draft.artboards) {
    const auto path = options.image_root / ab.image_ref;
    if (!std::filesystem::is_regular_file(path)) {
      if (options.require_images)
        throw MissingImage("artboard " + ab.id + ": " + path.string());
      result.warnings.push_back("artboard " + ab.id + ": missing image " + path.string() +
                                ", skipped");
      continue;
    }
    ScreenSample s;
    s.image = read_png(path);
    if (s.image.width != ab.width || s.image.height != ab.height)
      throw ImageMismatch("artboard " + ab.id + " is " + std::to_string(ab.width) + "x" +
                          std::to_string(ab.height) + " but image is " +
                          std::to_string(s.image.width) + "x" + std::to_string(s.image.height));
    s.sample_id = draft.package_id + "__" + ab.id;
    s.package_id = draft.package_id;
    s.width = ab.width;
    s.height = ab.height;
    s.texts = collect_text_records(ab);
    s.groups = collect_group_labels(ab, &result.warnings);
    result.samples.push_back(std::move(s));
  }
  return result;
}

}  // namespace groupdet::draft
