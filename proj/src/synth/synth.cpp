// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#include "synth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace groupdet::synth {

Pattern parse_pattern(const std::string& name) {
  if (name == "icon_caption") return Pattern::kIconCaption;
  if (name == "banner") return Pattern::kBanner;
  if (name == "list_row") return Pattern::kListRow;
  throw InvalidSpec("unknown pattern '" + name + "'");
}

std::string pattern_name(Pattern p) {
  switch (p) {
    case Pattern::kIconCaption: return "icon_caption";
    case Pattern::kBanner: return "banner";
    case Pattern::kListRow: return "list_row";
  }
  return "icon_caption";
}

void validate(const SynthSpec& spec) {
  if (spec.n_screens <= 0) throw InvalidSpec("n_screens must be positive");
  if (spec.size_min < 256) throw InvalidSpec("size_min must be at least 256");
  if (spec.size_max < spec.size_min) throw InvalidSpec("size_max < size_min");
  if (spec.patterns.empty()) throw InvalidSpec("at least one pattern is required");
  if (!(spec.distractor_density >= 0)) throw InvalidSpec("distractor_density must be >= 0");
  if (spec.vocab_size < 2) throw InvalidSpec("vocab_size must be >= 2");
  if (!(spec.token_correlation >= 0 && spec.token_correlation <= 1))
    throw InvalidSpec("token_correlation must be in [0,1]");
  if (spec.screens_per_package <= 0) throw InvalidSpec("screens_per_package must be positive");
}

std::vector<std::string> make_vocabulary(std::uint64_t seed, int size) {
  static const char* kOnsets[] = {"b", "c", "d", "f", "g", "h", "k", "l", "m", "n",
                                  "p", "r", "s", "t", "v", "w", "z", "sh", "ch", "tr"};
  static const char* kVowels[] = {"a", "e", "i", "o", "u", "ai", "ea", "ou"};
  Rng rng(seed ^ 0x766f636162ULL);
  std::vector<std::string> words;
  std::set<std::string> seen;
  while (static_cast<int>(words.size()) < size) {
    std::string w;
    const int syllables = static_cast<int>(rng.uniform_int(1, 3));
    for (int s = 0; s < syllables; ++s) {
      w += kOnsets[rng.uniform_int(0, 19)];
      w += kVowels[rng.uniform_int(0, 7)];
    }
    if (seen.insert(w).second) words.push_back(w);
  }
  return words;
}

namespace {

constexpr int kMargin = 6;

struct Palette {
  Color background;
  Color text;
};

Color random_color(Rng& rng, int lo, int hi) {
  return {static_cast<std::uint8_t>(rng.uniform_int(lo, hi)),
          static_cast<std::uint8_t>(rng.uniform_int(lo, hi)),
          static_cast<std::uint8_t>(rng.uniform_int(lo, hi))};
}

class ScreenBuilder {
 public:
  ScreenBuilder(const SynthSpec& spec, const std::vector<std::string>& vocab, Rng& rng, int w,
                int h)
      : spec_(spec), vocab_(vocab), rng_(rng), width_(w), height_(h) {}

  std::string draw_token(bool in_group) {
    // Even vocabulary entries are group tokens, odd ones distractor tokens.
    const bool group_token = rng_.bernoulli(spec_.token_correlation) ? in_group : !in_group;
    const int half = static_cast<int>(vocab_.size()) / 2;
    const int idx = 2 * static_cast<int>(rng_.uniform_int(0, half - 1)) + (group_token ? 0 : 1);
    return vocab_[idx];
  }

  // Text line of `content` whose glyph cells are `cell` pixels wide.
  Element text_at(double x, double y, const std::string& content, int glyph_h) {
    const double cell = std::round(glyph_h * 0.6);
    return {ElementKind::kText, {x, y, cell * static_cast<double>(content.size()), double(glyph_h)}, content};
  }

  SynthGroup icon_caption(bool in_group = true) {
    SynthGroup g;
    g.pattern = Pattern::kIconCaption;
    const double s = static_cast<double>(rng_.uniform_int(20, 36));
    const int glyph_h = static_cast<int>(rng_.uniform_int(8, 11));
    const std::string word = draw_token(in_group);
    Element icon{ElementKind::kShape, {0, 0, s, s}, {}};
    Element text;
    if (rng_.bernoulli(0.5)) {
      text = text_at(s + 4, std::round((s - glyph_h) / 2), word, glyph_h);
    } else {
      text = text_at(0, s + 4, word, glyph_h);
      const double shift = std::round((s - text.rect.w) / 2);
      if (shift > 0) text.rect.x = shift;
      else icon.rect.x = -shift;
    }
    g.elements = {icon, text};
    g.bbox = to_rect(box_union(to_box(icon.rect), to_box(text.rect)));
    return g;
  }

  SynthGroup banner() {
    SynthGroup g;
    g.pattern = Pattern::kBanner;
    const double w = static_cast<double>(rng_.uniform_int(110, std::min(220, width_ - 2 * kMargin)));
    const double h = static_cast<double>(rng_.uniform_int(64, 110));
    const double pad = static_cast<double>(rng_.uniform_int(6, 10));
    const double thumb = h - 2 * pad;
    g.bbox = {0, 0, w, h};
    g.elements.push_back({ElementKind::kShape, {0, 0, w, h}, {}});  // tile background
    g.elements.push_back({ElementKind::kBitmap, {pad, pad, thumb, thumb}, {}});
    const int lines = static_cast<int>(rng_.uniform_int(2, 3));
    const double text_x = pad + thumb + 6;
    const double avail = w - text_x - pad;
    double y = pad + 2;
    for (int i = 0; i < lines; ++i) {
      const int glyph_h = i == 0 ? 10 : 8;
      std::string word = draw_token(true);
      const double cell = std::round(glyph_h * 0.6);
      const auto fit = static_cast<std::size_t>(std::max(1.0, std::floor(avail / cell)));
      if (word.size() > fit) word.resize(fit);
      g.elements.push_back(text_at(text_x, y, word, glyph_h));
      y += glyph_h + 6;
    }
    return g;
  }

  std::vector<SynthGroup> list_rows(int max_rows) {
    std::vector<SynthGroup> rows;
    const int n = static_cast<int>(rng_.uniform_int(2, 3));
    const double icon = static_cast<double>(rng_.uniform_int(16, 24));
    double y = 0;
    for (int r = 0; r < std::min(n, max_rows); ++r) {
      SynthGroup g;
      g.pattern = Pattern::kListRow;
      const int glyph_h = 9;
      Element ic{ElementKind::kShape, {0, y, icon, icon}, {}};
      Element tx = text_at(icon + 6, y + std::round((icon - glyph_h) / 2), draw_token(true), glyph_h);
      g.elements = {ic, tx};
      g.bbox = to_rect(box_union(to_box(ic.rect), to_box(tx.rect)));
      rows.push_back(std::move(g));
      y += icon + 10;
    }
    return rows;
  }

  // Places a block of extent (w, h) without touching earlier blocks.
  bool place(double w, double h, double& ox, double& oy) {
    if (w + 2 * kMargin > width_ || h + 2 * kMargin > height_) return false;
    for (int attempt = 0; attempt < 200; ++attempt) {
      ox = static_cast<double>(rng_.uniform_int(kMargin, width_ - kMargin - static_cast<int>(std::ceil(w))));
      oy = static_cast<double>(rng_.uniform_int(kMargin, height_ - kMargin - static_cast<int>(std::ceil(h))));
      const Box cand{ox - kMargin, oy - kMargin, ox + w + kMargin, oy + h + kMargin};
      bool clear = std::none_of(occupied_.begin(), occupied_.end(),
                                [&](const Box& b) { return boxes_intersect(b, cand); });
      if (clear) {
        occupied_.push_back({ox, oy, ox + w, oy + h});
        return true;
      }
    }
    return false;
  }

 private:
  const SynthSpec& spec_;
  const std::vector<std::string>& vocab_;
  Rng& rng_;
  int width_, height_;
  std::vector<Box> occupied_;
};

void translate(SynthGroup& g, double dx, double dy) {
  g.bbox.x += dx;
  g.bbox.y += dy;
  for (auto& e : g.elements) {
    e.rect.x += dx;
    e.rect.y += dy;
  }
}

Rect extent_of(const std::vector<SynthGroup>& groups) {
  Box u = to_box(groups.front().bbox);
  for (const auto& g : groups) u = box_union(u, to_box(g.bbox));
  return to_rect(u);
}

void render_text(Image& img, const Element& e, Color color) {
  const int h = static_cast<int>(e.rect.h);
  const int cell = static_cast<int>(std::round(h * 0.6));
  for (std::size_t i = 0; i < e.content.size(); ++i) {
    const unsigned char c = static_cast<unsigned char>(e.content[i]);
    if (c == ' ') continue;
    const int x0 = static_cast<int>(e.rect.x) + static_cast<int>(i) * cell;
    // Glyph height varies with the character so words have texture.
    const int top = static_cast<int>(e.rect.y) + ((c * 7) % 3);
    fill_rect(img, x0, top, x0 + std::max(1, cell - 1), static_cast<int>(e.rect.y) + h, color);
  }
}

void render_element(Image& img, const Element& e, Rng& rng, const Palette& pal) {
  const int x0 = static_cast<int>(e.rect.x), y0 = static_cast<int>(e.rect.y);
  const int x1 = static_cast<int>(e.rect.right()), y1 = static_cast<int>(e.rect.bottom());
  switch (e.kind) {
    case ElementKind::kText:
      render_text(img, e, pal.text);
      break;
    case ElementKind::kShape: {
      if (x1 - x0 > 60) {  // tile backgrounds stay light and flat
        fill_rect(img, x0, y0, x1, y1, random_color(rng, 170, 240));
        break;
      }
      const Color c = random_color(rng, 40, 220);
      fill_rect(img, x0, y0, x1, y1, c);
      const int inset = std::max(3, (x1 - x0) / 4);
      if (x1 - x0 > 2 * inset && y1 - y0 > 2 * inset)
        fill_rect(img, x0 + inset, y0 + inset, x1 - inset, y1 - inset, random_color(rng, 150, 255));
      break;
    }
    case ElementKind::kBitmap: {
      const Color a = random_color(rng, 30, 200), b = random_color(rng, 60, 255);
      const int mid = (y0 + y1) / 2;
      fill_rect(img, x0, y0, x1, mid, a);
      fill_rect(img, x0, mid, x1, y1, b);
      break;
    }
  }
}

}  // namespace

std::vector<ScreenSample> SynthCorpus::samples() const {
  std::vector<ScreenSample> out;
  out.reserve(screens.size());
  for (const auto& s : screens) out.push_back(s.sample);
  return out;
}

SynthCorpus generate_corpus(const SynthSpec& spec) {
  validate(spec);
  const auto vocab = make_vocabulary(spec.seed, spec.vocab_size);
  const std::vector<Pattern> patterns(spec.patterns.begin(), spec.patterns.end());
  SynthCorpus corpus;

  for (int i = 0; i < spec.n_screens; ++i) {
    Rng rng(splitmix64(spec.seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(i)));
    const int width = static_cast<int>(rng.uniform_int(spec.size_min, spec.size_max));
    const int height = static_cast<int>(rng.uniform_int(spec.size_min, spec.size_max));
    ScreenBuilder builder(spec, vocab, rng, width, height);
    SynthScreen screen;

    const int target = static_cast<int>(rng.uniform_int(1, 8));
    int tries = 0;
    while (static_cast<int>(screen.groups.size()) < target && tries < 4 * target) {
      ++tries;
      const Pattern p = patterns[rng.uniform_int(0, static_cast<std::int64_t>(patterns.size()) - 1)];
      std::vector<SynthGroup> block;
      if (p == Pattern::kIconCaption) block.push_back(builder.icon_caption());
      else if (p == Pattern::kBanner) block.push_back(builder.banner());
      else block = builder.list_rows(target - static_cast<int>(screen.groups.size()));

      const Rect ext = extent_of(block);
      for (auto& g : block) translate(g, -ext.x, -ext.y);
      double ox, oy;
      if (!builder.place(ext.w, ext.h, ox, oy)) continue;
      for (auto& g : block) {
        translate(g, ox, oy);
        corpus.log.push_back({i, true, pattern_name(g.pattern), g.bbox});
        screen.groups.push_back(std::move(g));
      }
    }
    // Guarantee at least one group.
    while (screen.groups.empty()) {
      SynthGroup g = builder.icon_caption();
      double ox, oy;
      if (!builder.place(g.bbox.w, g.bbox.h, ox, oy)) continue;
      translate(g, ox - g.bbox.x, oy - g.bbox.y);
      corpus.log.push_back({i, true, pattern_name(g.pattern), g.bbox});
      screen.groups.push_back(std::move(g));
    }

    const double expected = spec.distractor_density * width * height / 1e5;
    int n_distract = static_cast<int>(std::floor(expected));
    if (rng.bernoulli(expected - n_distract)) ++n_distract;
    for (int d = 0; d < n_distract; ++d) {
      const int type = static_cast<int>(rng.uniform_int(0, 2));
      std::vector<Element> items;
      std::string what;
      if (type == 0) {
        const double s = static_cast<double>(rng.uniform_int(16, 40));
        items.push_back({ElementKind::kShape, {0, 0, s, s}, {}});
        what = "shape";
      } else if (type == 1) {
        items.push_back(builder.text_at(0, 0, builder.draw_token(false), static_cast<int>(rng.uniform_int(8, 11))));
        what = "text";
      } else {
        // Icon next to unrelated text: looks like a group, is not one.
        SynthGroup fake = builder.icon_caption(false);
        translate(fake, -fake.bbox.x, -fake.bbox.y);
        items = fake.elements;
        what = "pair";
      }
      Box u = to_box(items.front().rect);
      for (const auto& e : items) u = box_union(u, to_box(e.rect));
      double ox, oy;
      if (!builder.place(u.width(), u.height(), ox, oy)) continue;
      for (auto& e : items) {
        e.rect.x += ox - u.x0;
        e.rect.y += oy - u.y0;
      }
      corpus.log.push_back({i, false, what, to_rect({ox, oy, ox + u.width(), oy + u.height()})});
      for (auto& e : items) screen.distractors.push_back(std::move(e));
    }

    // Render.
    Palette pal{random_color(rng, 225, 255), random_color(rng, 0, 70)};
    ScreenSample& s = screen.sample;
    char buf[64];
    std::snprintf(buf, sizeof buf, "pkg%04d", i / spec.screens_per_package);
    s.package_id = buf;
    std::snprintf(buf, sizeof buf, "screen%04d", i);
    s.sample_id = s.package_id + "__" + buf;
    s.width = width;
    s.height = height;
    s.image = Image(width, height, pal.background);
    auto emit = [&](const Element& e) {
      render_element(s.image, e, rng, pal);
      if (e.kind == ElementKind::kText) {
        const Box b = box_clip(to_box(e.rect), width, height);
        s.texts.push_back({e.content, {b.x0 / width, b.y0 / height, b.x1 / width, b.y1 / height}});
      }
    };
    for (const auto& g : screen.groups) {
      for (const auto& e : g.elements) emit(e);
      s.groups.push_back({g.bbox, kGroupCategoryId});
    }
    for (const auto& e : screen.distractors) emit(e);
    corpus.logged_group_count += screen.groups.size();
    corpus.screens.push_back(std::move(screen));
  }
  return corpus;
}

namespace {

draft::Layer leaf_layer(const Element& e, const std::string& id, double ox, double oy) {
  draft::Layer l;
  l.id = id;
  l.frame = e.rect;
  l.local = {e.rect.x - ox, e.rect.y - oy, e.rect.w, e.rect.h};
  switch (e.kind) {
    case ElementKind::kText:
      l.kind = draft::LayerKind::kText;
      l.name = e.content;
      l.text_content = e.content;
      break;
    case ElementKind::kBitmap:
      l.kind = draft::LayerKind::kBitmap;
      l.name = "image";
      break;
    case ElementKind::kShape:
      l.kind = draft::LayerKind::kShape;
      l.name = "shape";
      break;
  }
  return l;
}

}  // namespace

std::vector<draft::DesignDraft> to_drafts(const SynthCorpus& corpus) {
  std::map<std::string, draft::DesignDraft> by_package;
  for (const auto& screen : corpus.screens) {
    const ScreenSample& s = screen.sample;
    auto& d = by_package[s.package_id];
    d.package_id = s.package_id;
    draft::Artboard ab;
    ab.id = s.sample_id.substr(s.package_id.size() + 2);
    ab.name = ab.id;
    ab.width = s.width;
    ab.height = s.height;
    ab.image_ref = s.sample_id + ".png";
    int counter = 0;
    for (const auto& g : screen.groups) {
      draft::Layer c;
      c.id = "g" + std::to_string(counter++);
      c.kind = draft::LayerKind::kGroup;
      c.name = pattern_name(g.pattern) + " #group#";
      c.frame = c.local = g.bbox;
      for (const auto& e : g.elements)
        c.children.push_back(leaf_layer(e, "l" + std::to_string(counter++), g.bbox.x, g.bbox.y));
      ab.layers.push_back(std::move(c));
    }
    for (const auto& e : screen.distractors)
      ab.layers.push_back(leaf_layer(e, "l" + std::to_string(counter++), 0, 0));
    d.artboards.push_back(std::move(ab));
  }
  std::vector<draft::DesignDraft> out;
  for (auto& [k, d] : by_package) out.push_back(std::move(d));
  return out;
}

}  // namespace groupdet::synth
