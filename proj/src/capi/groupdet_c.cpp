// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#include "groupdet/groupdet.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "cocoeval/cocoeval.hpp"
#include "common/error.hpp"
#include "detector/checkpoint.hpp"
#include "runner/commands.hpp"

struct gd_detector {
  std::unique_ptr<groupdet::detector::Detector> model;
};

namespace {

thread_local std::string g_last_error;

gd_status status_of(groupdet::ErrorKind kind) {
  switch (kind) {
    case groupdet::ErrorKind::kConfig: return GD_ERR_CONFIG;
    case groupdet::ErrorKind::kData: return GD_ERR_DATA;
    case groupdet::ErrorKind::kIO: return GD_ERR_IO;
    case groupdet::ErrorKind::kShape: return GD_ERR_SHAPE;
    case groupdet::ErrorKind::kDivergence: return GD_ERR_DIVERGENCE;
    case groupdet::ErrorKind::kInternal: break;
  }
  return GD_ERR_INTERNAL;
}

template <typename F>
gd_status guarded(F&& f) {
  g_last_error.clear();
  try {
    f();
    return GD_OK;
  } catch (const groupdet::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = std::string("JSON: ") + e.what();
    return GD_ERR_DATA;
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return GD_ERR_IO;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return GD_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return GD_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return GD_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::vector<std::string> collect(const char* const* overrides, size_t n) {
  std::vector<std::string> out;
  for (size_t i = 0; i < n; ++i) {
    if (!overrides[i]) throw groupdet::ConfigError("null override");
    out.emplace_back(overrides[i]);
  }
  return out;
}

gd_status bad_argument(const char* what) {
  g_last_error = std::string("invalid argument: ") + what;
  return GD_ERR_ARGUMENT;
}

}  // namespace

extern "C" {

const char* gd_version(void) { return "0.1.0"; }

const char* gd_last_error(void) { return g_last_error.c_str(); }

const char* gd_status_name(gd_status status) {
  switch (status) {
    case GD_OK: return "ok";
    case GD_ERR_INTERNAL: return "internal error";
    case GD_ERR_CONFIG: return "config error";
    case GD_ERR_DATA: return "data error";
    case GD_ERR_DIVERGENCE: return "divergence";
    case GD_ERR_IO: return "I/O error";
    case GD_ERR_SHAPE: return "shape mismatch";
    case GD_ERR_ARGUMENT: return "invalid argument";
  }
  return "unknown";
}

void gd_string_free(char* s) { std::free(s); }

gd_status gd_run_command(const char* command, const char* config_path, const char* const* overrides,
                         size_t n_overrides, char** summary) {
  if (!command || !summary || (n_overrides && !overrides)) return bad_argument("gd_run_command");
  *summary = nullptr;
  return guarded([&] {
    const auto cfg = groupdet::runner::load_run_config(config_path ? config_path : "",
                                                       collect(overrides, n_overrides));
    *summary = dup_string(groupdet::runner::run_command(command, cfg));
  });
}

gd_status gd_resolve_config(const char* config_path, const char* const* overrides, size_t n_overrides,
                            char** config_json) {
  if (!config_json || (n_overrides && !overrides)) return bad_argument("gd_resolve_config");
  *config_json = nullptr;
  return guarded([&] {
    const auto cfg = groupdet::runner::load_run_config(config_path ? config_path : "",
                                                       collect(overrides, n_overrides));
    *config_json = dup_string(groupdet::runner::to_json(cfg).dump(2));
  });
}

gd_status gd_detector_load(const char* checkpoint_path, gd_detector** out) {
  if (!checkpoint_path || !out) return bad_argument("gd_detector_load");
  *out = nullptr;
  return guarded([&] {
    auto d = std::make_unique<gd_detector>();
    d->model = groupdet::detector::load_detector(checkpoint_path);
    *out = d.release();
  });
}

void gd_detector_free(gd_detector* detector) { delete detector; }

gd_status gd_detector_predict(const gd_detector* detector, const char* png_path, const char* texts_json,
                              char** detections_json) {
  if (!detector || !png_path || !detections_json) return bad_argument("gd_detector_predict");
  *detections_json = nullptr;
  return guarded([&] {
    const auto image = groupdet::read_png(png_path);
    std::vector<groupdet::TextLayerRecord> texts;
    if (texts_json) texts = groupdet::runner::texts_from_json(nlohmann::json::parse(texts_json));
    const auto dets = detector->model->predict(image, texts);
    *detections_json = dup_string(groupdet::runner::detections_to_json(dets).dump());
  });
}

gd_status gd_evaluate(const char* dataset_dir, const char* detections_json, char** report_json) {
  if (!dataset_dir || !detections_json || !report_json) return bad_argument("gd_evaluate");
  *report_json = nullptr;
  return guarded([&] {
    const auto manifest = groupdet::slicer::read_coco(dataset_dir);
    const auto j = nlohmann::json::parse(detections_json);
    if (!j.is_array()) throw groupdet::SchemaError("detections must be an array");
    groupdet::cocoeval::DetectionsByImage dets;
    for (const auto& e : j) {
      const auto one = groupdet::runner::detections_from_json(nlohmann::json::array({e}));
      dets[e.at("image_id").get<std::int64_t>()].push_back(one.front());
    }
    *report_json = dup_string(groupdet::cocoeval::to_json(groupdet::cocoeval::evaluate(manifest, dets)).dump());
  });
}

}  // extern "C"
