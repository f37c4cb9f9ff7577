// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <fstream>
#include <set>

#include <json.hpp>

#include "common/error.hpp"
#include "draft/draft.hpp"
#include "slicer/slicer.hpp"
#include "support.hpp"

using namespace groupdet;
using namespace groupdet::slicer;

namespace {

std::vector<int> offsets(const WindowPlan& p) {
  std::vector<int> out;
  for (const auto& w : p.windows) out.push_back(w.offset);
  return out;
}

ScreenSample blank_screen(int width, int height, std::string id = "s", std::string package = "p") {
  ScreenSample s;
  s.sample_id = std::move(id);
  s.package_id = std::move(package);
  s.width = width;
  s.height = height;
  s.image.width = width;
  s.image.height = height;
  s.image.pixels.assign(static_cast<std::size_t>(width) * height * 3, 0);
  // A gradient so crops are distinguishable.
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      auto* px = &s.image.pixels[(static_cast<std::size_t>(y) * width + x) * 3];
      px[0] = static_cast<std::uint8_t>(x % 251);
      px[1] = static_cast<std::uint8_t>(y % 251);
      px[2] = static_cast<std::uint8_t>((x + y) % 7);
    }
  return s;
}

bool inside(const Rect& r, const Window& w, bool vertical) {
  const double lo = vertical ? r.y : r.x, hi = vertical ? r.bottom() : r.right();
  return lo >= w.offset && hi <= w.offset + w.side;
}

DatasetManifest small_manifest() {
  DatasetManifest m;
  m.categories.push_back({});
  m.images.push_back({1, "a.png", 100, 100});
  m.images.push_back({2, "b.png", 50, 80});
  m.annotations.push_back({1, 1, 1, {10, 10, 10, 20}, 200, 0});
  m.annotations.push_back({2, 1, 1, {0.5, 1.25, 30.125, 4}, 30.125 * 4, 0});
  m.annotations.push_back({3, 2, 1, {5, 5, 5, 5}, 25, 0});
  m.texts[1] = {{"view it", Box{0.1, 0.1, 0.2, 0.25}}, {"", Box{0, 0, 1, 1}}};
  m.texts[2] = {};
  return m;
}

}  // namespace

TEST_CASE("square input gives one window") {
  const auto p = compute_windows(750, 750, {});
  REQUIRE(p.windows.size() == 1);
  CHECK(p.windows[0] == Window{0, 750});
}

TEST_CASE("tall input: half-side stride plus a flush window") {
  const auto p = compute_windows(2000, 750, {});
  CHECK(offsets(p) == std::vector<int>{0, 375, 750, 1125, 1250});
  CHECK(p.vertical);
  for (const auto& w : p.windows) CHECK(w.side == 750);
}

TEST_CASE("wide input slices along x") {
  const auto p = compute_windows(300, 1000, {});
  CHECK_FALSE(p.vertical);
  CHECK(offsets(p) == std::vector<int>{0, 150, 300, 450, 600, 700});
}

TEST_CASE("a box longer than the side is skipped") {
  const auto p = compute_windows(2000, 750, {Rect{10, 700, 100, 760}});
  CHECK(p.skipped == std::vector<std::size_t>{0});
  CHECK(offsets(p) == std::vector<int>{0, 375, 750, 1125, 1250});
}

TEST_CASE("rescue window for a box no base window holds") {
  // side 100, stride 50: base windows 0, 50, 100; box [40, 130] fits no base window.
  const auto p = compute_windows(200, 100, {Rect{0, 40, 10, 90}});
  CHECK(p.skipped.empty());
  bool covered = false;
  for (const auto& w : p.windows) covered |= inside(Rect{0, 40, 10, 90}, w, true);
  CHECK(covered);
  CHECK(offsets(p) == std::vector<int>{0, 35, 50, 100});
}

TEST_CASE("slicing a tall screen: containment and duplication") {
  auto s = blank_screen(750, 2000);
  s.groups.push_back({Rect{100, 380, 50, 10}});  // inside windows 0 and 375
  s.groups.push_back({Rect{100, 370, 50, 10}});  // starts before 375: window 0 only
  s.texts.push_back({"edge", Box{0.1, 740.0 / 2000, 0.2, 760.0 / 2000}});  // straddles y = 750
  const auto r = slice_sample(s);
  REQUIRE(r.slices.size() == 5);

  const auto& w0 = r.slices[0];
  const auto& w375 = r.slices[1];
  CHECK(w0.window.offset == 0);
  CHECK(w375.window.offset == 375);
  CHECK(w0.groups.size() == 2);
  REQUIRE(w375.groups.size() == 1);
  CHECK(w375.groups[0].bbox == Rect{100, 5, 50, 10});
  CHECK(w0.texts.empty());  // the straddling text is in neither of the first two
  REQUIRE(w375.texts.size() == 1);
  CHECK(w375.texts[0].bbox.y0 == doctest::Approx((740.0 - 375) / 750));
  CHECK(w0.slice_id() == "s_0");
  CHECK(w0.image.width == 750);
  CHECK(w0.image.height == 750);
  CHECK(w375.image.at(3, 0)[1] == 375 % 251);
}

TEST_CASE("square screen slices to itself") {
  auto s = blank_screen(300, 300);
  s.groups.push_back({Rect{10, 20, 30, 40}});
  s.texts.push_back({"a", Box{0.1, 0.2, 0.3, 0.4}});
  const auto r = slice_sample(s);
  REQUIRE(r.slices.size() == 1);
  CHECK(r.slices[0].image == s.image);
  CHECK(r.slices[0].groups == s.groups);
  CHECK(r.slices[0].texts == s.texts);
}

TEST_CASE("translation inverts exactly and slices stay in bounds") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int w = static_cast<int>(rng.uniform_int(20, 120));
    const int h = static_cast<int>(rng.uniform_int(20, 400));
    auto s = blank_screen(w, h);
    const int side = std::min(w, h);
    for (int i = 0; i < 6; ++i) {
      const double bw = rng.uniform_int(1, side), bh = rng.uniform_int(1, side);
      s.groups.push_back({Rect{std::floor(rng.uniform(0, w - bw)), std::floor(rng.uniform(0, h - bh)), bw, bh}});
    }
    const auto r = slice_sample(s);
    for (const auto& sl : r.slices) {
      CHECK(sl.image.width == side);
      CHECK(sl.image.height == side);
      CHECK(sl.window.offset + sl.window.side <= std::max(w, h));
      for (const auto& g : sl.groups) {
        const Rect back{g.bbox.x + sl.origin_x(), g.bbox.y + sl.origin_y(), g.bbox.w, g.bbox.h};
        bool found = false;
        for (const auto& orig : s.groups) found |= orig.bbox == back;
        CHECK(found);
        CHECK(g.bbox.x >= 0);
        CHECK(g.bbox.right() <= side);
        CHECK(g.bbox.y >= 0);
        CHECK(g.bbox.bottom() <= side);
      }
    }
  }
}

TEST_CASE("coverage over random screens") {
  Rng rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const int side = static_cast<int>(rng.uniform_int(16, 200));
    const int len = static_cast<int>(side * rng.uniform(1.0, 6.0));
    const bool tall = rng.bernoulli(0.5);
    const int h = tall ? len : side, w = tall ? side : len;
    std::vector<Rect> boxes;
    const int n = static_cast<int>(rng.uniform_int(0, 20));
    for (int i = 0; i < n; ++i) {
      const double bw = rng.uniform(0.5, w), bh = rng.uniform(0.5, h);
      boxes.push_back(Rect{rng.uniform(0, w - bw), rng.uniform(0, h - bh), bw, bh});
    }
    const auto p = compute_windows(h, w, boxes);
    const std::set<std::size_t> skipped(p.skipped.begin(), p.skipped.end());
    for (std::size_t b = 0; b < boxes.size(); ++b) {
      const double extent = p.vertical ? boxes[b].h : boxes[b].w;
      bool covered = false;
      for (const auto& win : p.windows) covered |= inside(boxes[b], win, p.vertical);
      if (skipped.count(b)) CHECK_FALSE(covered);
      else CHECK(covered);
      if (extent <= side && !skipped.count(b)) CHECK(covered);
    }
    for (std::size_t i = 0; i < p.windows.size(); ++i) {
      CHECK(p.windows[i].offset >= 0);
      CHECK(p.windows[i].offset + p.windows[i].side <= len);
      if (i) CHECK(p.windows[i - 1].offset < p.windows[i].offset);
    }
  }
}

TEST_CASE("package split: counts, determinism, closure") {
  std::vector<std::string> pkgs;
  for (int i = 0; i < 10; ++i) pkgs.push_back("pkg" + std::to_string(i));
  const auto a = assign_packages(pkgs, {0.8, 0.1, 0.1}, 7);
  int counts[3] = {0, 0, 0};
  for (const auto& [p, s] : a) ++counts[s];
  CHECK(counts[0] == 8);
  CHECK(counts[1] == 1);
  CHECK(counts[2] == 1);
  CHECK(assign_packages(pkgs, {0.8, 0.1, 0.1}, 7) == a);

  std::vector<ScreenSample> samples;
  for (int i = 0; i < 30; ++i)
    samples.push_back(blank_screen(4, 4, "s" + std::to_string(i), "pkg" + std::to_string(i % 10)));
  const auto split = split_corpus(samples, {0.8, 0.1, 0.1}, 7);
  CHECK(split.train.size() + split.val.size() + split.test.size() == samples.size());
  std::map<std::string, int> where;
  std::set<std::string> ids;
  const std::vector<ScreenSample>* parts[3] = {&split.train, &split.val, &split.test};
  for (int k = 0; k < 3; ++k)
    for (const auto& s : *parts[k]) {
      CHECK(ids.insert(s.sample_id).second);
      auto [it, fresh] = where.emplace(s.package_id, k);
      CHECK(it->second == k);
      CHECK(a.at(s.package_id) == k);
    }
  CHECK(ids.size() == samples.size());
}

TEST_CASE("split errors") {
  CHECK_THROWS_AS(assign_packages({"a", "b"}, {}, 0), FewerPackagesThanSplits);
  CHECK_THROWS_AS(assign_packages({"a", "b", "c"}, {0.5, 0.5, 0.5}, 0), ConfigError);
  CHECK_THROWS_AS(assign_packages({"a", "b", "c"}, {1.0, 0.0, 0.0}, 0), ConfigError);
  // Duplicates collapse to distinct packages.
  CHECK_THROWS_AS(assign_packages({"a", "a", "b", "b"}, {}, 0), FewerPackagesThanSplits);
}

TEST_CASE("COCO files round-trip") {
  const auto dir = groupdet::testing::scratch("coco_rt");
  const auto m = small_manifest();
  write_coco(m, dir);
  CHECK(read_coco(dir) == m);
  CHECK(std::filesystem::exists(dir / "annotations.json"));
  CHECK(std::filesystem::exists(dir / "texts.json"));

  DatasetManifest empty;
  empty.categories.push_back({});
  empty.images.push_back({1, "x.png", 10, 10});
  const auto dir2 = groupdet::testing::scratch("coco_empty");
  write_coco(empty, dir2);
  CHECK(read_coco(dir2) == empty);
  const auto j = nlohmann::json::parse(groupdet::testing::slurp(dir2 / "annotations.json"));
  CHECK(j["annotations"].is_array());
  CHECK(j["annotations"].empty());
}

TEST_CASE("sliced fixture corpus round-trips through disk") {
  const auto r = draft::extract_screen_samples(draft::load_draft(groupdet::testing::fixtures() / "draft_min.json"),
                                               {groupdet::testing::fixtures(), true});
  std::vector<SliceSample> slices;
  for (const auto& s : r.samples)
    for (auto& sl : slice_sample(s).slices) slices.push_back(std::move(sl));
  const auto dir = groupdet::testing::scratch("coco_fixture");
  const auto m = write_slice_dataset(slices, dir);
  CHECK(read_coco(dir) == m);
  const auto st = stats_of(m);
  CHECK(st.images == slices.size());
  for (const auto& im : m.images) CHECK(std::filesystem::exists(dir / im.file_name));
  for (const auto& a : m.annotations) CHECK(a.area == a.bbox[2] * a.bbox[3]);
  CHECK(m.images.front().file_name == "pkg-min__home_0.png");
}

TEST_CASE("a 10 by 20 box has area 200 and bad manifests are refused") {
  auto m = small_manifest();
  CHECK(m.annotations[0].area == 200);
  validate_manifest(m);

  auto bad_area = m;
  bad_area.annotations[0].area = 199;
  CHECK_THROWS_AS(validate_manifest(bad_area), SchemaError);
  auto bad_ref = m;
  bad_ref.annotations[0].image_id = 42;
  CHECK_THROWS_AS(validate_manifest(bad_ref), SchemaError);
  auto dup = m;
  dup.images[1].id = 1;
  CHECK_THROWS_AS(validate_manifest(dup), SchemaError);
  auto bad_text = m;
  bad_text.texts[1][0].bbox.x1 = 1.5;
  CHECK_THROWS_AS(validate_manifest(bad_text), SchemaError);
}

TEST_CASE("reading malformed COCO files") {
  const auto dir = groupdet::testing::scratch("coco_bad");
  CHECK_THROWS_AS(read_coco(dir), IOError);
  std::ofstream(dir / "annotations.json") << "{\"images\": 3}";
  std::ofstream(dir / "texts.json") << "{}";
  CHECK_THROWS_AS(read_coco(dir), SchemaError);
  std::ofstream(dir / "annotations.json", std::ios::trunc) << "{oops";
  CHECK_THROWS_AS(read_coco(dir), SchemaError);
}
