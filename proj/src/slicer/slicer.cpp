// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#include "slicer/slicer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace groupdet::slicer {

using nlohmann::json;

namespace {

constexpr double kContainEps = 1e-9;

bool window_holds(const Window& w, double a0, double a1) {
  return a0 >= w.offset - kContainEps && a1 <= w.offset + w.side + kContainEps;
}

}  // namespace

WindowPlan compute_windows(int height, int width, const std::vector<Rect>& boxes) {
  if (height <= 0 || width <= 0) throw ShapeMismatch("screen size must be positive");
  WindowPlan plan;
  plan.vertical = height >= width;
  const int side = std::min(height, width);
  const int length = std::max(height, width);
  const int stride = std::max(1, side / 2);

  std::vector<int> offsets;
  for (int off = 0; off + side <= length; off += stride) offsets.push_back(off);
  offsets.push_back(length - side);

  auto covered = [&](double a0, double a1) {
    return std::any_of(offsets.begin(), offsets.end(),
                       [&](int off) { return window_holds({off, side}, a0, a1); });
  };

  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const Rect& r = boxes[i];
    double a0 = plan.vertical ? r.y : r.x;
    double a1 = plan.vertical ? r.bottom() : r.right();
    a0 = std::clamp(a0, 0.0, static_cast<double>(length));
    a1 = std::clamp(a1, 0.0, static_cast<double>(length));
    if (a1 - a0 > side) {
      plan.skipped.push_back(i);
      continue;
    }
    if (covered(a0, a1)) continue;
    // Integer offsets that contain [a0, a1].
    const int lo = std::max(0, static_cast<int>(std::ceil(a1 - side - kContainEps)));
    const int hi = std::min(length - side, static_cast<int>(std::floor(a0 + kContainEps)));
    if (lo > hi) {
      // Sub-pixel placement with extent within one pixel of the side.
      plan.skipped.push_back(i);
      continue;
    }
    const double centered = std::floor(0.5 * (a0 + a1) - 0.5 * side + 0.5);
    offsets.push_back(std::clamp(static_cast<int>(centered), lo, hi));
  }

  std::sort(offsets.begin(), offsets.end());
  offsets.erase(std::unique(offsets.begin(), offsets.end()), offsets.end());
  for (int off : offsets) plan.windows.push_back({off, side});
  return plan;
}

SliceReport slice_sample(const ScreenSample& sample) {
  if (sample.image.width != sample.width || sample.image.height != sample.height)
    throw ImageMismatch(sample.sample_id + ": image does not match declared size");

  std::vector<Rect> boxes;
  boxes.reserve(sample.groups.size());
  for (const auto& g : sample.groups) boxes.push_back(g.bbox);
  const WindowPlan plan = compute_windows(sample.height, sample.width, boxes);

  SliceReport report;
  for (std::size_t i : plan.skipped) report.skipped.push_back(sample.groups[i]);

  const double W = sample.width, H = sample.height;
  for (const Window& w : plan.windows) {
    SliceSample s;
    s.parent_id = sample.sample_id;
    s.package_id = sample.package_id;
    s.window = w;
    s.vertical = plan.vertical;
    const int ox = s.origin_x(), oy = s.origin_y();
    s.image = crop(sample.image, ox, oy, w.side, w.side);

    for (const auto& g : sample.groups) {
      const double a0 = plan.vertical ? g.bbox.y : g.bbox.x;
      const double a1 = plan.vertical ? g.bbox.bottom() : g.bbox.right();
      if (!window_holds(w, a0, a1)) continue;
      GroupLabel local = g;
      local.bbox.x -= ox;
      local.bbox.y -= oy;
      s.groups.push_back(local);
    }

    const double side = w.side;
    for (const auto& t : sample.texts) {
      const Box px{t.bbox.x0 * W, t.bbox.y0 * H, t.bbox.x1 * W, t.bbox.y1 * H};
      const double a0 = plan.vertical ? px.y0 : px.x0;
      const double a1 = plan.vertical ? px.y1 : px.x1;
      if (!window_holds(w, a0, a1)) continue;
      auto norm = [&](double v, int origin) { return std::clamp((v - origin) / side, 0.0, 1.0); };
      s.texts.push_back({t.content, {norm(px.x0, ox), norm(px.y0, oy), norm(px.x1, ox), norm(px.y1, oy)}});
    }
    report.slices.push_back(std::move(s));
  }
  return report;
}

std::map<std::string, int> assign_packages(const std::vector<std::string>& package_ids,
                                           SplitRatios ratios, std::uint64_t seed) {
  const std::array<double, 3> r{ratios.train, ratios.val, ratios.test};
  for (double v : r)
    if (!(v > 0)) throw ConfigError("split ratios must be positive");
  if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-6) throw ConfigError("split ratios must sum to 1");

  std::set<std::string> unique(package_ids.begin(), package_ids.end());
  std::vector<std::string> ids(unique.begin(), unique.end());
  const std::size_t n = ids.size();
  if (n < 3)
    throw FewerPackagesThanSplits(std::to_string(n) + " packages cannot fill 3 splits");

  Rng rng(seed);
  rng.shuffle(ids);

  // Largest-remainder apportionment, ties to the earlier split.
  std::array<std::size_t, 3> count{};
  std::array<double, 3> frac{};
  std::size_t used = 0;
  for (int k = 0; k < 3; ++k) {
    const double exact = r[k] * static_cast<double>(n);
    count[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    frac[k] = exact - static_cast<double>(count[k]);
    used += count[k];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac[a] > frac[b]; });
  for (std::size_t i = 0; used < n; ++i, ++used) ++count[order[i % 3]];
  for (int k = 0; k < 3; ++k) {
    if (count[k] > 0) continue;
    auto donor = std::max_element(count.begin(), count.end()) - count.begin();
    --count[donor];
    ++count[k];
  }

  std::map<std::string, int> out;
  std::size_t i = 0;
  for (int k = 0; k < 3; ++k)
    for (std::size_t c = 0; c < count[k]; ++c) out[ids[i++]] = k;
  return out;
}

CorpusSplit split_corpus(std::vector<ScreenSample> samples, SplitRatios ratios,
                         std::uint64_t seed) {
  std::vector<std::string> pkgs;
  for (const auto& s : samples) pkgs.push_back(s.package_id);
  const auto assignment = assign_packages(pkgs, ratios, seed);
  CorpusSplit split;
  for (auto& s : samples) {
    switch (assignment.at(s.package_id)) {
      case 0: split.train.push_back(std::move(s)); break;
      case 1: split.val.push_back(std::move(s)); break;
      default: split.test.push_back(std::move(s)); break;
    }
  }
  return split;
}

const ImageEntry* DatasetManifest::find_image(std::int64_t id) const {
  for (const auto& im : images)
    if (im.id == id) return &im;
  return nullptr;
}

std::vector<const AnnotationEntry*> DatasetManifest::annotations_for(std::int64_t image_id) const {
  std::vector<const AnnotationEntry*> out;
  for (const auto& a : annotations)
    if (a.image_id == image_id) out.push_back(&a);
  return out;
}

void validate_manifest(const DatasetManifest& m) {
  std::set<std::int64_t> image_ids, ann_ids;
  for (const auto& im : m.images) {
    if (!image_ids.insert(im.id).second)
      throw SchemaError("duplicate image id " + std::to_string(im.id));
    if (im.width <= 0 || im.height <= 0)
      throw SchemaError("image " + std::to_string(im.id) + " has non-positive size");
  }
  for (const auto& a : m.annotations) {
    if (!ann_ids.insert(a.id).second)
      throw SchemaError("duplicate annotation id " + std::to_string(a.id));
    if (!image_ids.count(a.image_id))
      throw SchemaError("annotation " + std::to_string(a.id) + " references unknown image");
    if (a.bbox[2] < 0 || a.bbox[3] < 0)
      throw SchemaError("annotation " + std::to_string(a.id) + " has negative size");
    if (a.area != a.bbox[2] * a.bbox[3])
      throw SchemaError("annotation " + std::to_string(a.id) + " area != w*h");
  }
  for (const auto& [id, texts] : m.texts) {
    if (!image_ids.count(id)) throw SchemaError("texts reference unknown image " + std::to_string(id));
    for (const auto& t : texts) {
      const Box& b = t.bbox;
      if (!(0 <= b.x0 && b.x0 <= b.x1 && b.x1 <= 1 && 0 <= b.y0 && b.y0 <= b.y1 && b.y1 <= 1))
        throw SchemaError("text box out of [0,1] on image " + std::to_string(id));
    }
  }
}

namespace {

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IOError("cannot write " + path.string());
  out << text;
  if (!out) throw IOError("write failed " + path.string());
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

}  // namespace

void write_coco(const DatasetManifest& m, const std::filesystem::path& directory) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw IOError("cannot create " + directory.string() + ": " + ec.message());

  json root;
  root["images"] = json::array();
  for (const auto& im : m.images)
    root["images"].push_back(
        {{"id", im.id}, {"file_name", im.file_name}, {"width", im.width}, {"height", im.height}});
  root["annotations"] = json::array();
  for (const auto& a : m.annotations)
    root["annotations"].push_back({{"id", a.id},
                                   {"image_id", a.image_id},
                                   {"category_id", a.category_id},
                                   {"bbox", a.bbox},
                                   {"area", a.area},
                                   {"iscrowd", a.iscrowd}});
  root["categories"] = json::array();
  for (const auto& c : m.categories) root["categories"].push_back({{"id", c.id}, {"name", c.name}});

  json texts = json::object();
  for (const auto& [id, list] : m.texts) {
    json arr = json::array();
    for (const auto& t : list)
      arr.push_back({{"content", t.content}, {"bbox", {t.bbox.x0, t.bbox.y0, t.bbox.x1, t.bbox.y1}}});
    texts[std::to_string(id)] = std::move(arr);
  }
  write_text_file(directory / "annotations.json", root.dump(1));
  write_text_file(directory / "texts.json", texts.dump(1));
}

DatasetManifest read_coco(const std::filesystem::path& directory) {
  const json root = read_json_file(directory / "annotations.json");
  const auto texts_path = directory / "texts.json";
  DatasetManifest m;
  try {
    for (const auto& im : root.at("images"))
      m.images.push_back({im.at("id").get<std::int64_t>(), im.at("file_name").get<std::string>(),
                          im.at("width").get<int>(), im.at("height").get<int>()});
    for (const auto& a : root.at("annotations")) {
      AnnotationEntry e;
      e.id = a.at("id").get<std::int64_t>();
      e.image_id = a.at("image_id").get<std::int64_t>();
      e.category_id = a.at("category_id").get<int>();
      const auto& bb = a.at("bbox");
      if (!bb.is_array() || bb.size() != 4) throw SchemaError("bbox must have 4 entries");
      for (int k = 0; k < 4; ++k) e.bbox[k] = bb[k].get<double>();
      e.area = a.at("area").get<double>();
      e.iscrowd = a.value("iscrowd", 0);
      m.annotations.push_back(e);
    }
    for (const auto& c : root.at("categories"))
      m.categories.push_back({c.at("id").get<int>(), c.at("name").get<std::string>()});
    if (std::filesystem::exists(texts_path)) {
      const json texts = read_json_file(texts_path);
      for (const auto& [key, list] : texts.items()) {
        std::vector<TextLayerRecord> recs;
        for (const auto& t : list) {
          const auto& bb = t.at("bbox");
          if (!bb.is_array() || bb.size() != 4) throw SchemaError("text bbox must have 4 entries");
          recs.push_back({t.at("content").get<std::string>(),
                          {bb[0].get<double>(), bb[1].get<double>(), bb[2].get<double>(),
                           bb[3].get<double>()}});
        }
        m.texts[std::stoll(key)] = std::move(recs);
      }
    }
  } catch (const json::exception& e) {
    throw SchemaError(directory.string() + ": " + e.what());
  } catch (const std::invalid_argument&) {
    throw SchemaError(directory.string() + ": texts.json keys must be image ids");
  }
  validate_manifest(m);
  return m;
}

DatasetManifest write_slice_dataset(const std::vector<SliceSample>& slices,
                                    const std::filesystem::path& directory) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw IOError("cannot create " + directory.string() + ": " + ec.message());

  DatasetManifest m;
  m.categories.push_back({});
  std::int64_t ann_id = 1;
  for (std::size_t i = 0; i < slices.size(); ++i) {
    const SliceSample& s = slices[i];
    const std::int64_t image_id = static_cast<std::int64_t>(i) + 1;
    const std::string file = s.slice_id() + ".png";
    write_png(s.image, directory / file);
    m.images.push_back({image_id, file, s.window.side, s.window.side});
    for (const auto& g : s.groups)
      m.annotations.push_back({ann_id++, image_id, g.category_id,
                               {g.bbox.x, g.bbox.y, g.bbox.w, g.bbox.h}, g.bbox.w * g.bbox.h, 0});
    m.texts[image_id] = s.texts;
  }
  write_coco(m, directory);
  return m;
}

DatasetStats stats_of(const DatasetManifest& m) {
  DatasetStats s;
  s.images = m.images.size();
  s.groups = m.annotations.size();
  for (const auto& [id, list] : m.texts) s.texts += list.size();
  return s;
}

}  // namespace groupdet::slicer
