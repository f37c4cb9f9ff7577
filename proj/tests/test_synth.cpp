// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <map>

#include "common/error.hpp"
#include "draft/draft.hpp"
#include "synth/synth.hpp"

using namespace groupdet;
using namespace groupdet::synth;

namespace {

SynthSpec spec_with(std::uint64_t seed, int n) {
  SynthSpec s;
  s.seed = seed;
  s.n_screens = n;
  return s;
}

bool inside(const Box& outer, const Box& inner, double slack = 1e-9) {
  return inner.x0 >= outer.x0 - slack && inner.y0 >= outer.y0 - slack && inner.x1 <= outer.x1 + slack &&
         inner.y1 <= outer.y1 + slack;
}

}  // namespace

TEST_CASE("same seed gives pixel-identical corpora") {
  const auto a = generate_corpus(spec_with(1, 2));
  const auto b = generate_corpus(spec_with(1, 2));
  REQUIRE(a.screens.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& x = a.screens[i].sample;
    const auto& y = b.screens[i].sample;
    CHECK(x.sample_id == y.sample_id);
    CHECK(x.image == y.image);
    CHECK(x.texts == y.texts);
    CHECK(x.groups == y.groups);
  }
  const auto c = generate_corpus(spec_with(2, 2));
  CHECK_FALSE(c.screens[0].sample.image == a.screens[0].sample.image);
}

TEST_CASE("without distractors every icon caption text belongs to a group") {
  SynthSpec s = spec_with(5, 1);
  s.distractor_density = 0;
  s.patterns = {Pattern::kIconCaption};
  const auto corpus = generate_corpus(s);
  const auto& sample = corpus.screens[0].sample;
  REQUIRE_FALSE(sample.texts.empty());
  for (const auto& t : sample.texts) {
    const Box px{t.bbox.x0 * sample.width, t.bbox.y0 * sample.height, t.bbox.x1 * sample.width,
                 t.bbox.y1 * sample.height};
    bool owned = false;
    for (const auto& g : sample.groups) owned = owned || inside(to_box(g.bbox), px, 1e-6);
    CHECK_MESSAGE(owned, t.content);
  }
}

TEST_CASE("replaying the placement log recovers every group") {
  const auto corpus = generate_corpus(spec_with(3, 16));
  std::map<int, std::vector<Rect>> replay;
  std::size_t total = 0;
  for (const auto& r : corpus.log) {
    if (!r.is_group) continue;
    replay[r.screen].push_back(r.rect);
    ++total;
  }
  std::size_t emitted = 0;
  for (std::size_t i = 0; i < corpus.screens.size(); ++i) {
    const auto& groups = corpus.screens[i].sample.groups;
    emitted += groups.size();
    const auto& logged = replay[static_cast<int>(i)];
    REQUIRE(logged.size() == groups.size());
    for (std::size_t k = 0; k < groups.size(); ++k) CHECK(logged[k] == groups[k].bbox);
  }
  CHECK(total == emitted);
  CHECK(corpus.logged_group_count == emitted);
}

TEST_CASE("generated screens satisfy the layout invariants") {
  const auto corpus = generate_corpus(spec_with(11, 60));
  std::map<Pattern, int> seen;
  for (const auto& screen : corpus.screens) {
    const auto& s = screen.sample;
    CHECK(s.width >= 256);
    CHECK(s.height >= 256);
    CHECK(s.image.width == s.width);
    CHECK(s.image.height == s.height);
    REQUIRE(screen.groups.size() >= 1);
    REQUIRE(screen.groups.size() <= 8);
    REQUIRE(s.groups.size() == screen.groups.size());
    const Box frame{0, 0, double(s.width), double(s.height)};

    std::size_t text_elements = 0;
    for (const auto& g : screen.groups) {
      ++seen[g.pattern];
      const Box gb = to_box(g.bbox);
      CHECK(inside(frame, gb));
      for (const auto& e : g.elements) text_elements += e.kind == ElementKind::kText;
      if (g.pattern == Pattern::kBanner) {
        // The tile background spans the box; everything drawn on it keeps a margin.
        REQUIRE(g.elements.size() >= 4);
        CHECK(to_box(g.elements[0].rect) == gb);
        for (std::size_t k = 1; k < g.elements.size(); ++k) {
          const Box eb = to_box(g.elements[k].rect);
          CHECK(eb.x0 - gb.x0 >= 4);
          CHECK(eb.y0 - gb.y0 >= 4);
          CHECK(gb.x1 - eb.x1 >= 4);
          CHECK(gb.y1 - eb.y1 >= 4);
        }
        const auto lines = g.elements.size() - 2;
        CHECK(lines >= 2);
        CHECK(lines <= 3);
      } else {
        REQUIRE(g.elements.size() == 2);
        CHECK(g.elements[0].kind == ElementKind::kShape);
        CHECK(g.elements[1].kind == ElementKind::kText);
        CHECK(box_union(to_box(g.elements[0].rect), to_box(g.elements[1].rect)) == gb);
      }
    }
    for (std::size_t i = 0; i < screen.groups.size(); ++i)
      for (std::size_t j = i + 1; j < screen.groups.size(); ++j)
        CHECK(iou(to_box(screen.groups[i].bbox), to_box(screen.groups[j].bbox)) <= 0.1);

    for (const auto& d : screen.distractors) {
      text_elements += d.kind == ElementKind::kText;
      CHECK(inside(frame, to_box(d.rect)));
      for (const auto& g : screen.groups) CHECK_FALSE(boxes_intersect(to_box(d.rect), to_box(g.bbox)));
    }
    CHECK(s.texts.size() == text_elements);
    for (const auto& t : s.texts) {
      CHECK(t.bbox.x0 >= 0);
      CHECK(t.bbox.y0 >= 0);
      CHECK(t.bbox.x1 <= 1);
      CHECK(t.bbox.y1 <= 1);
      CHECK(t.bbox.x0 < t.bbox.x1);
      CHECK_FALSE(t.content.empty());
    }
  }
  CHECK(seen[Pattern::kIconCaption] > 0);
  CHECK(seen[Pattern::kBanner] > 0);
  CHECK(seen[Pattern::kListRow] > 0);
}

TEST_CASE("group texts mostly draw group tokens") {
  SynthSpec s = spec_with(9, 80);
  s.patterns = {Pattern::kIconCaption, Pattern::kListRow};
  const auto corpus = generate_corpus(s);
  const auto vocab = make_vocabulary(s.seed, s.vocab_size);
  std::map<std::string, bool> group_token;
  for (std::size_t i = 0; i < vocab.size(); ++i) group_token[vocab[i]] = i % 2 == 0;
  int in_group = 0, in_group_hits = 0, outside = 0, outside_hits = 0;
  for (const auto& screen : corpus.screens) {
    for (const auto& g : screen.groups)
      for (const auto& e : g.elements)
        if (e.kind == ElementKind::kText) {
          ++in_group;
          in_group_hits += group_token.at(e.content);
        }
    for (const auto& d : screen.distractors)
      if (d.kind == ElementKind::kText) {
        ++outside;
        outside_hits += !group_token.at(d.content);
      }
  }
  REQUIRE(in_group > 100);
  REQUIRE(outside > 20);
  CHECK(double(in_group_hits) / in_group > 0.8);
  CHECK(double(outside_hits) / outside > 0.7);
}

TEST_CASE("vocabulary is seeded and duplicate free") {
  const auto a = make_vocabulary(4, 64);
  CHECK(a == make_vocabulary(4, 64));
  CHECK(a.size() == 64);
  CHECK(std::set<std::string>(a.begin(), a.end()).size() == 64);
}

TEST_CASE("drafts reproduce the generated labels") {
  SynthSpec s = spec_with(13, 6);
  s.screens_per_package = 2;
  const auto corpus = generate_corpus(s);
  const auto drafts = to_drafts(corpus);
  REQUIRE(drafts.size() == 3);
  std::size_t k = 0;
  for (const auto& d : drafts) {
    const auto reparsed = draft::parse_draft(draft::serialize_draft(d));
    CHECK(reparsed == d);
    for (const auto& board : d.artboards) {
      const auto& sample = corpus.screens.at(k++).sample;
      CHECK(board.image_ref == sample.sample_id + ".png");
      CHECK(d.package_id == sample.package_id);
      const auto labels = draft::collect_group_labels(board);
      REQUIRE(labels.size() == sample.groups.size());
      for (std::size_t i = 0; i < labels.size(); ++i) CHECK(labels[i].bbox == sample.groups[i].bbox);
      const auto texts = draft::collect_text_records(board);
      REQUIRE(texts.size() == sample.texts.size());
      for (std::size_t i = 0; i < texts.size(); ++i) {
        CHECK(texts[i].content == sample.texts[i].content);
        CHECK(texts[i].bbox.x0 == doctest::Approx(sample.texts[i].bbox.x0).epsilon(1e-12));
        CHECK(texts[i].bbox.y1 == doctest::Approx(sample.texts[i].bbox.y1).epsilon(1e-12));
      }
    }
  }
  CHECK(k == corpus.screens.size());
}

TEST_CASE("invalid specs are rejected") {
  auto bad = [](auto mutate) {
    SynthSpec s;
    mutate(s);
    return s;
  };
  CHECK_THROWS_AS(generate_corpus(bad([](SynthSpec& s) { s.n_screens = 0; })), InvalidSpec);
  CHECK_THROWS_AS(generate_corpus(bad([](SynthSpec& s) { s.size_min = 255; })), InvalidSpec);
  CHECK_THROWS_AS(generate_corpus(bad([](SynthSpec& s) { s.size_max = s.size_min - 1; })), InvalidSpec);
  CHECK_THROWS_AS(generate_corpus(bad([](SynthSpec& s) { s.patterns.clear(); })), InvalidSpec);
  CHECK_THROWS_AS(generate_corpus(bad([](SynthSpec& s) { s.distractor_density = -1; })), InvalidSpec);
  CHECK_THROWS_AS(generate_corpus(bad([](SynthSpec& s) { s.vocab_size = 1; })), InvalidSpec);
  CHECK_THROWS_AS(parse_pattern("carousel"), InvalidSpec);
  CHECK(parse_pattern(pattern_name(Pattern::kListRow)) == Pattern::kListRow);
}
