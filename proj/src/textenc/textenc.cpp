// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#include "textenc/textenc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace groupdet::textenc {

namespace {

void normalize(TextEmbedding& v) {
  double sq = 0;
  for (double x : v) sq += x * x;
  if (sq <= 0) return;
  const double inv = 1.0 / std::sqrt(sq);
  for (double& x : v) x *= inv;
}

}  // namespace

HashedNgramEncoder::HashedNgramEncoder(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim <= 0) throw ConfigError("text embedding dimension must be positive");
}

double HashedNgramEncoder::projection(std::size_t bucket, int k) const {
  const std::uint64_t h =
      splitmix64(seed_ ^ splitmix64(static_cast<std::uint64_t>(bucket) * 1315423911ULL + k));
  return static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0;  // uniform in [-1, 1)
}

TextEmbedding HashedNgramEncoder::encode(std::string_view content) const {
  TextEmbedding out(dim_, 0.0);
  std::unordered_map<std::size_t, int> counts;
  for (std::size_t n = 1; n <= 3; ++n)
    for (std::size_t i = 0; i + n <= content.size(); ++i)
      ++counts[fnv1a64(content.substr(i, n), 0xcbf29ce484222325ULL ^ n) % kBuckets];
  // Sum in bucket order so the result does not depend on hash-map iteration.
  std::vector<std::pair<std::size_t, int>> sorted(counts.begin(), counts.end());
  std::sort(sorted.begin(), sorted.end());
  for (const auto& [bucket, count] : sorted)
    for (int k = 0; k < dim_; ++k) out[k] += count * projection(bucket, k);
  normalize(out);
  return out;
}

TableEncoder::TableEncoder(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open embedding table " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    dim_ = j.at("dim").get<int>();
    if (dim_ <= 0) throw SchemaError("embedding table dim must be positive");
    for (const auto& [text, values] : j.at("embeddings").items()) {
      auto v = values.get<TextEmbedding>();
      if (static_cast<int>(v.size()) != dim_)
        throw SchemaError("embedding for '" + text + "' has wrong length");
      double sq = 0;
      for (double x : v) {
        if (!std::isfinite(x)) throw SchemaError("non-finite embedding for '" + text + "'");
        sq += x * x;
      }
      if (sq > 1.0) normalize(v);
      table_.emplace(text, std::move(v));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

TextEmbedding TableEncoder::encode(std::string_view content) const {
  auto it = table_.find(content);
  if (it == table_.end()) return TextEmbedding(dim_, 0.0);
  return it->second;
}

std::shared_ptr<const TextEncoder> make_encoder(const std::string& kind, int dim,
                                                const std::string& table_path) {
  if (kind == "hashed_ngram") return std::make_shared<HashedNgramEncoder>(dim);
  if (kind == "external") {
    auto enc = std::make_shared<TableEncoder>(table_path);
    if (enc->dim() != dim)
      throw ConfigError("embedding table dim " + std::to_string(enc->dim()) +
                        " does not match K=" + std::to_string(dim));
    return enc;
  }
  throw ConfigError("unknown text_encoder '" + kind + "'");
}

}  // namespace groupdet::textenc
