// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace groupdet::textenc {

inline constexpr int kDefaultDim = 16;

// Fixed-length text embedding, L2 norm <= 1.
using TextEmbedding = std::vector<double>;

class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual int dim() const = 0;
  virtual TextEmbedding encode(std::string_view content) const = 0;
};

// Character 1-3-gram counts hashed into a fixed number of buckets, projected
// to `dim` values with a seeded pseudo-random matrix, then L2-normalized.
// The empty string (and any input with no n-grams) maps to the zero vector.
class HashedNgramEncoder final : public TextEncoder {
 public:
  static constexpr int kBuckets = 4096;
  static constexpr std::uint64_t kProjectionSeed = 0x67726f7570646574ULL;

  explicit HashedNgramEncoder(int dim = kDefaultDim, std::uint64_t seed = kProjectionSeed);
  int dim() const override { return dim_; }
  TextEmbedding encode(std::string_view content) const override;

 private:
  double projection(std::size_t bucket, int k) const;

  int dim_;
  std::uint64_t seed_;
};

// Lookup table of precomputed embeddings, e.g. exported from a pretrained
// sentence encoder. File format: {"dim": K, "embeddings": {"text": [..K..]}}.
// Rows are rescaled to unit norm when longer; unknown strings map to zero.
class TableEncoder final : public TextEncoder {
 public:
  explicit TableEncoder(const std::filesystem::path& path);
  int dim() const override { return dim_; }
  TextEmbedding encode(std::string_view content) const override;

 private:
  int dim_ = 0;
  std::map<std::string, TextEmbedding, std::less<>> table_;
};

// kind: "hashed_ngram" or "external" (which reads `table_path`).
std::shared_ptr<const TextEncoder> make_encoder(const std::string& kind, int dim,
                                                const std::string& table_path = {});

}  // namespace groupdet::textenc
