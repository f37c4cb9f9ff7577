// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "draft/draft.hpp"
#include "draft/sample.hpp"

namespace groupdet::synth {

enum class Pattern { kIconCaption, kBanner, kListRow };

Pattern parse_pattern(const std::string& name);
std::string pattern_name(Pattern p);

struct SynthSpec {
  std::uint64_t seed = 0;
  int n_screens = 16;
  int size_min = 256;  // per axis, pixels
  int size_max = 512;
  std::set<Pattern> patterns{Pattern::kIconCaption, Pattern::kBanner, Pattern::kListRow};
  // Expected distractor items per 100k square pixels of screen.
  double distractor_density = 3.0;
  int vocab_size = 64;
  // Probability that a text inside a group draws a group-designated token
  // (and that a standalone text draws a distractor token).
  double token_correlation = 0.9;
  int screens_per_package = 1;
};

// Throws InvalidSpec.
void validate(const SynthSpec& spec);

enum class ElementKind { kShape, kBitmap, kText };

struct Element {
  ElementKind kind = ElementKind::kShape;
  Rect rect;
  std::string content;  // text elements only
};

struct SynthGroup {
  Pattern pattern = Pattern::kIconCaption;
  Rect bbox;
  std::vector<Element> elements;
};

struct PlacementRecord {
  int screen = 0;
  bool is_group = false;
  std::string what;  // pattern name or distractor type
  Rect rect;
};

struct SynthScreen {
  ScreenSample sample;
  std::vector<SynthGroup> groups;
  std::vector<Element> distractors;
};

struct SynthCorpus {
  std::vector<SynthScreen> screens;
  std::vector<PlacementRecord> log;
  std::size_t logged_group_count = 0;

  std::vector<ScreenSample> samples() const;
};

// Deterministic in spec.seed; each screen uses its own derived seed.
SynthCorpus generate_corpus(const SynthSpec& spec);

// Words of the seeded vocabulary. Even indices are group-designated tokens.
std::vector<std::string> make_vocabulary(std::uint64_t seed, int size);

// Draft documents for the corpus, one per package, with image_ref pointing to
// `<sample_id>.png`.
std::vector<draft::DesignDraft> to_drafts(const SynthCorpus& corpus);

}  // namespace groupdet::synth
