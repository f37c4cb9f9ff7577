/* Copyright 2026 The groupdet Authors.
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the groupdet library. Every call returns a gd_status; on
 * failure gd_last_error() describes the problem for the calling thread.
 * Strings handed out by the library are released with gd_string_free.
 */
#ifndef GROUPDET_GROUPDET_H_
#define GROUPDET_GROUPDET_H_

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define GD_API __declspec(dllexport)
#else
#define GD_API __attribute__((visibility("default")))
#endif

typedef enum gd_status {
  GD_OK = 0,
  GD_ERR_INTERNAL = 1,
  GD_ERR_CONFIG = 2,
  GD_ERR_DATA = 3,
  GD_ERR_DIVERGENCE = 4,
  GD_ERR_IO = 5,
  GD_ERR_SHAPE = 6,
  GD_ERR_ARGUMENT = 7
} gd_status;

typedef struct gd_detector gd_detector;

GD_API const char* gd_version(void);
GD_API const char* gd_last_error(void);
GD_API const char* gd_status_name(gd_status status);
GD_API void gd_string_free(char* s);

/* Runs one pipeline command (synth, slice, train, eval, predict, render).
 * config_path may be NULL for defaults; overrides are "section.key=value".
 * On success *summary receives the command's summary line. */
GD_API gd_status gd_run_command(const char* command, const char* config_path,
                                const char* const* overrides, size_t n_overrides,
                                char** summary);

/* Prints the resolved configuration as JSON. */
GD_API gd_status gd_resolve_config(const char* config_path, const char* const* overrides,
                                   size_t n_overrides, char** config_json);

GD_API gd_status gd_detector_load(const char* checkpoint_path, gd_detector** out);
GD_API void gd_detector_free(gd_detector* detector);

/* texts_json: NULL or [{"content": str, "bbox": [x0, y0, x1, y1]}] with
 * coordinates normalized to the image. *detections_json receives
 * [{"bbox": [x, y, w, h], "score": s, "category_id": 1}]. Safe to call from
 * several threads on one detector. */
GD_API gd_status gd_detector_predict(const gd_detector* detector, const char* png_path,
                                     const char* texts_json, char** detections_json);

/* COCO evaluation of detections ([{"image_id", "bbox", "score", ...}]) against
 * a dataset directory holding annotations.json and texts.json. */
GD_API gd_status gd_evaluate(const char* dataset_dir, const char* detections_json,
                             char** report_json);

#ifdef __cplusplus
}
#endif

#endif /* GROUPDET_GROUPDET_H_ */
