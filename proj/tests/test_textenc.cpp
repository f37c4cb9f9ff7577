// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "support.hpp"
#include "textenc/textenc.hpp"

using namespace groupdet;
using namespace groupdet::textenc;

namespace {

double dot(const TextEmbedding& a, const TextEmbedding& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Straight-line restatement of the encoder: n-gram bag, dense projection
// matrix, then unit length.
TextEmbedding oracle(const std::string& s, int dim) {
  const std::uint64_t seed = HashedNgramEncoder::kProjectionSeed;
  std::vector<double> bag(HashedNgramEncoder::kBuckets, 0.0);
  for (std::size_t n = 1; n <= 3; ++n)
    for (std::size_t i = 0; i + n <= s.size(); ++i)
      bag[fnv1a64(s.substr(i, n), 0xcbf29ce484222325ULL ^ n) % HashedNgramEncoder::kBuckets] += 1;
  TextEmbedding v(dim, 0.0);
  for (int b = 0; b < HashedNgramEncoder::kBuckets; ++b) {
    if (bag[b] == 0) continue;
    for (int k = 0; k < dim; ++k) {
      const auto h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(b) * 1315423911ULL + k));
      v[k] += bag[b] * (static_cast<double>(h >> 11) / 4503599627370496.0 - 1.0);
    }
  }
  const double n = std::sqrt(dot(v, v));
  if (n > 0)
    for (double& x : v) x /= n;
  return v;
}

}  // namespace

TEST_CASE("empty string encodes to the zero vector") {
  const HashedNgramEncoder enc;
  const auto v = enc.encode("");
  CHECK(v.size() == 16);
  for (double x : v) CHECK(x == 0.0);
}

TEST_CASE("encoding is deterministic across instances") {
  const HashedNgramEncoder a, b;
  CHECK(a.encode("price") == b.encode("price"));
  CHECK(a.encode("price") == a.encode("price"));
}

TEST_CASE("encoder matches the n-gram projection oracle") {
  const HashedNgramEncoder enc;
  for (const std::string s : {"view it", "schedule", "price", "a", "menu bar", "zz"}) {
    const auto got = enc.encode(s);
    const auto want = oracle(s, 16);
    for (int k = 0; k < 16; ++k) CHECK(got[k] == doctest::Approx(want[k]).epsilon(1e-12));
  }
}

TEST_CASE("view it is unit length and differs from schedule") {
  const HashedNgramEncoder enc;
  const auto a = enc.encode("view it");
  const auto b = enc.encode("schedule");
  CHECK(std::abs(dot(a, a) - 1.0) <= 1e-6);
  const auto want_a = oracle("view it", 16), want_b = oracle("schedule", 16);
  double diff = 0;
  for (int k = 0; k < 16; ++k) diff = std::max(diff, std::abs(want_a[k] - want_b[k]));
  CHECK(diff > 1e-3);
  CHECK(a != b);
  CHECK(dot(a, b) < 1.0 - 1e-3);
}

TEST_CASE("norm is zero or at most one over random strings") {
  Rng rng(21);
  for (int dim : {1, 4, 16, 33}) {
    const HashedNgramEncoder enc(dim);
    for (int t = 0; t < 200; ++t) {
      std::string s(static_cast<std::size_t>(rng.uniform_int(0, 20)), ' ');
      for (auto& c : s) c = static_cast<char>(rng.uniform_int(32, 126));
      const auto v = enc.encode(s);
      REQUIRE(static_cast<int>(v.size()) == dim);
      const double n = std::sqrt(dot(v, v));
      for (double x : v) CHECK(std::isfinite(x));
      if (s.empty()) CHECK(n == 0.0);
      else CHECK(std::abs(n - 1.0) <= 1e-6);
    }
  }
}

TEST_CASE("changing K keeps determinism") {
  const HashedNgramEncoder a(8), b(8);
  CHECK(a.encode("settings") == b.encode("settings"));
  CHECK(a.encode("settings").size() == 8);
  CHECK_THROWS_AS(HashedNgramEncoder(0), ConfigError);
}

TEST_CASE("table encoder serves fixed vectors") {
  const auto dir = testing::scratch("textenc");
  const auto path = dir / "table.json";
  std::ofstream(path) << R"({"dim": 2, "embeddings": {"price": [0.6, 0.8], "menu": [3, 4]}})";
  const auto enc = make_encoder("external", 2, path.string());
  CHECK(enc->encode("price") == TextEmbedding{0.6, 0.8});
  const auto m = enc->encode("menu");
  CHECK(m[0] == doctest::Approx(0.6));
  CHECK(m[1] == doctest::Approx(0.8));
  CHECK(enc->encode("unknown") == TextEmbedding{0.0, 0.0});
  CHECK_THROWS_AS(make_encoder("external", 3, path.string()), ConfigError);
  CHECK_THROWS_AS(make_encoder("external", 2, (dir / "missing.json").string()), IOError);
  std::ofstream(dir / "bad.json") << R"({"dim": 2, "embeddings": {"x": [1]}})";
  CHECK_THROWS_AS(make_encoder("external", 2, (dir / "bad.json").string()), SchemaError);
  CHECK_THROWS_AS(make_encoder("bert", 16), ConfigError);
  CHECK(make_encoder("hashed_ngram", 16)->encode("price") == HashedNgramEncoder().encode("price"));
}
