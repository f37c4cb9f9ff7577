// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace groupdet {

// Broad failure classes; the C API and the CLI map these onto status and
// exit codes.
enum class ErrorKind {
  kConfig,      // bad config or invalid generator spec
  kData,        // malformed input documents, images, datasets
  kIO,          // filesystem failures
  kShape,       // tensor or weight shape disagreement
  kDivergence,  // training produced non-finite loss
  kInternal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define GROUPDET_DEFINE_ERROR(Name, Kind)                          \
  class Name : public Error {                                      \
   public:                                                         \
    explicit Name(const std::string& what)                         \
        : Error(ErrorKind::Kind, std::string(#Name ": ") + what) {} \
  };

GROUPDET_DEFINE_ERROR(SchemaError, kData)
GROUPDET_DEFINE_ERROR(EmptyDraft, kData)
GROUPDET_DEFINE_ERROR(ImageMismatch, kData)
GROUPDET_DEFINE_ERROR(MissingImage, kData)
GROUPDET_DEFINE_ERROR(UnknownImageId, kData)
GROUPDET_DEFINE_ERROR(FewerPackagesThanSplits, kData)
GROUPDET_DEFINE_ERROR(IOError, kIO)
GROUPDET_DEFINE_ERROR(InvalidSpec, kConfig)
GROUPDET_DEFINE_ERROR(ConfigError, kConfig)
GROUPDET_DEFINE_ERROR(ShapeMismatch, kShape)
GROUPDET_DEFINE_ERROR(WeightMismatch, kShape)
GROUPDET_DEFINE_ERROR(DivergenceDetected, kDivergence)

#undef GROUPDET_DEFINE_ERROR

}  // namespace groupdet
