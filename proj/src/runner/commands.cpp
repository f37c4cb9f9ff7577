// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#include "runner/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "cocoeval/cocoeval.hpp"
#include "common/error.hpp"
#include "detector/checkpoint.hpp"
#include "detector/train.hpp"
#include "draft/draft.hpp"

namespace groupdet::runner {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IOError("cannot write " + path.string());
  os << text;
  if (!os) throw IOError("failed writing " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IOError("cannot read " + path.string());
  json j = json::parse(is, nullptr, false);
  if (j.is_discarded()) throw SchemaError(path.string() + " is not valid JSON");
  return j;
}

void snapshot(const RunConfig& c, const std::string& command) {
  write_text(fs::path(c.io.output) / (command + ".resolved.json"), to_json(c).dump(2) + "\n");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

fs::path split_dir(const RunConfig& c, const std::string& split) { return c.resolve(c.data.dataset) / split; }

}  // namespace

json detections_to_json(const std::vector<Detection>& dets) {
  json out = json::array();
  for (const auto& d : dets)
    out.push_back({{"bbox", {d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h}}, {"score", d.score}, {"category_id", d.category_id}});
  return out;
}

std::vector<Detection> detections_from_json(const json& j) {
  if (!j.is_array()) throw SchemaError("detections must be a JSON array");
  std::vector<Detection> out;
  try {
    for (const auto& e : j) {
      const auto b = e.at("bbox").get<std::vector<double>>();
      if (b.size() != 4) throw SchemaError("detection bbox needs four numbers");
      out.push_back(Detection{Rect{b[0], b[1], b[2], b[3]}, e.at("score").get<double>(),
                              e.value("category_id", kGroupCategoryId)});
    }
  } catch (const json::exception& ex) {
    throw SchemaError(std::string("detections: ") + ex.what());
  }
  return out;
}

std::vector<TextLayerRecord> texts_from_json(const json& j) {
  if (!j.is_array()) throw SchemaError("texts must be a JSON array");
  std::vector<TextLayerRecord> out;
  try {
    for (const auto& e : j) {
      const auto b = e.at("bbox").get<std::vector<double>>();
      if (b.size() != 4) throw SchemaError("text bbox needs four numbers");
      out.push_back({e.at("content").get<std::string>(), Box{b[0], b[1], b[2], b[3]}});
    }
  } catch (const json::exception& ex) {
    throw SchemaError(std::string("texts: ") + ex.what());
  }
  return out;
}

std::string cmd_synth(const RunConfig& c) {
  const auto corpus = synth::generate_corpus(c.synth);
  snapshot(c, "synth");
  const fs::path images = c.resolve(c.data.images), drafts = c.resolve(c.data.drafts);
  fs::create_directories(images);
  fs::create_directories(drafts);
  std::size_t distractors = 0;
  for (const auto& s : corpus.screens) {
    write_png(s.sample.image, images / (s.sample.sample_id + ".png"));
    distractors += s.distractors.size();
  }
  const auto docs = synth::to_drafts(corpus);
  for (const auto& d : docs) write_text(drafts / (d.package_id + ".json"), draft::serialize_draft(d, 2) + "\n");

  json log = json::array();
  for (const auto& r : corpus.log)
    log.push_back({{"screen", r.screen},
                   {"group", r.is_group},
                   {"what", r.what},
                   {"rect", {r.rect.x, r.rect.y, r.rect.w, r.rect.h}}});
  write_text(drafts.parent_path() / "placement_log.json", log.dump() + "\n");

  return "screens=" + std::to_string(corpus.screens.size()) + " groups=" +
         std::to_string(corpus.logged_group_count) + " distractors=" + std::to_string(distractors) +
         " packages=" + std::to_string(docs.size());
}

std::string cmd_slice(const RunConfig& c) {
  const fs::path drafts = c.resolve(c.data.drafts);
  if (!fs::is_directory(drafts)) throw IOError("draft directory " + drafts.string() + " does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(drafts))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IOError("no draft documents in " + drafts.string());
  snapshot(c, "slice");

  draft::ExtractOptions opts{c.resolve(c.data.images), c.data.require_images};
  std::vector<ScreenSample> samples;
  json warnings = json::array();
  for (const auto& f : files) {
    auto r = draft::extract_screen_samples(draft::load_draft(f), opts);
    for (auto& w : r.warnings) warnings.push_back(f.filename().string() + ": " + w);
    for (auto& s : r.samples) samples.push_back(std::move(s));
  }

  auto split = slicer::split_corpus(std::move(samples), c.data.ratios, c.data.seed);
  std::size_t skipped = 0;
  slicer::DatasetStats total;
  json per_split = json::object();
  std::map<std::string, std::set<std::string>> packages;
  const std::pair<const char*, const std::vector<ScreenSample>*> parts[] = {
      {"train", &split.train}, {"val", &split.val}, {"test", &split.test}};
  for (const auto& [name, list] : parts) {
    std::vector<slicer::SliceSample> slices;
    for (const auto& s : *list) {
      packages[name].insert(s.package_id);
      auto report = slicer::slice_sample(s);
      skipped += report.skipped.size();
      for (auto& sl : report.slices) slices.push_back(std::move(sl));
    }
    const auto manifest = slicer::write_slice_dataset(slices, split_dir(c, name));
    const auto st = slicer::stats_of(manifest);
    total.images += st.images;
    total.groups += st.groups;
    total.texts += st.texts;
    per_split[name] = {{"images", st.images}, {"groups", st.groups}, {"texts", st.texts},
                       {"packages", packages[name].size()}};
  }
  // Package closure: no package may appear in two splits.
  std::size_t shared = 0;
  for (const auto& p : packages["train"]) shared += packages["val"].count(p) + packages["test"].count(p);
  for (const auto& p : packages["val"]) shared += packages["test"].count(p);
  if (shared) throw Error(ErrorKind::kInternal, "package split leaked " + std::to_string(shared) + " packages");

  write_text(c.resolve(c.data.dataset) / "slice_report.json",
             json{{"splits", per_split}, {"skipped", skipped}, {"warnings", warnings}}.dump(2) + "\n");
  return "images=" + std::to_string(total.images) + " groups=" + std::to_string(total.groups) +
         " texts=" + std::to_string(total.texts) + " skipped=" + std::to_string(skipped) +
         " packages=" + std::to_string(packages["train"].size()) + "/" + std::to_string(packages["val"].size()) +
         "/" + std::to_string(packages["test"].size()) + " shared_packages=0";
}

std::string cmd_train(const RunConfig& c) {
  const auto train_m = slicer::read_coco(split_dir(c, "train"));
  const auto val_m = slicer::read_coco(split_dir(c, "val"));
  const auto train_i = detector::load_images(train_m, split_dir(c, "train"));
  const auto val_i = detector::load_images(val_m, split_dir(c, "val"));
  snapshot(c, "train");
  detector::Detector model(c.model);
  detector::TrainOptions opts;
  opts.checkpoint = c.resolve("train/model.gdck");
  opts.metric_log = c.resolve("train/metrics.ndjson");
  const auto r = detector::train(model, train_i, val_m, val_i, opts);
  const auto& last = r.epochs.back();
  return "epochs=" + std::to_string(r.epochs.size()) + " iterations=" + std::to_string(r.iterations) +
         " final_loss=" + fmt(last.loss) + " best_epoch=" + std::to_string(r.best_epoch) +
         " best_val_ap=" + fmt(r.best_ap) + " checkpoint=" + opts.checkpoint.string();
}

std::string cmd_eval(const RunConfig& c) {
  const auto model = detector::load_detector(c.resolve(c.eval.checkpoint));
  const fs::path dir = split_dir(c, c.eval.split);
  const auto manifest = slicer::read_coco(dir);
  const auto images = detector::load_images(manifest, dir);
  snapshot(c, "eval");
  const auto dets = detector::predict_all(*model, images);
  const auto report = cocoeval::evaluate(manifest, dets);

  json results = json::array();
  for (const auto& [id, list] : dets)
    for (const auto& d : list)
      results.push_back({{"image_id", id},
                         {"bbox", {d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h}},
                         {"score", d.score},
                         {"category_id", d.category_id}});
  write_text(c.resolve("eval/" + c.eval.split + "_detections.json"), results.dump() + "\n");
  write_text(c.resolve("eval/" + c.eval.split + "_report.json"), cocoeval::to_json(report).dump(2) + "\n");
  return "split=" + c.eval.split + " AP=" + fmt(report.ap) + " AP50=" + fmt(report.ap50) +
         " AP75=" + fmt(report.ap75) + " APs=" + fmt(report.ap_s) + " APm=" + fmt(report.ap_m) +
         " APl=" + fmt(report.ap_l);
}

std::string cmd_predict(const RunConfig& c) {
  if (c.io.image.empty()) throw ConfigError("predict needs io.image");
  const auto model = detector::load_detector(c.resolve(c.eval.checkpoint));
  const Image image = read_png(c.resolve(c.io.image));
  std::vector<TextLayerRecord> texts;
  if (!c.io.texts.empty()) texts = texts_from_json(read_json(c.resolve(c.io.texts)));
  snapshot(c, "predict");
  const auto out = detections_to_json(model->predict(image, texts)).dump();
  write_text(c.resolve(c.io.detections.empty() ? "predict/detections.json" : c.io.detections), out + "\n");
  return out;
}

std::string cmd_render(const RunConfig& c) {
  if (c.io.image.empty()) throw ConfigError("render needs io.image");
  Image image = read_png(c.resolve(c.io.image));
  const auto dets = detections_from_json(
      read_json(c.resolve(c.io.detections.empty() ? "predict/detections.json" : c.io.detections)));
  snapshot(c, "render");
  render_detections(image, dets, c.eval.render_min_score);
  const fs::path out = c.resolve(
      c.io.render.empty() ? "render/" + fs::path(c.io.image).stem().string() + "_groups.png" : c.io.render);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_png(image, out);
  const auto shown = std::count_if(dets.begin(), dets.end(), [&](const Detection& d) {
    return d.score >= c.eval.render_min_score;
  });
  return "rendered=" + std::to_string(shown) + " path=" + out.string();
}

std::string run_command(const std::string& name, const RunConfig& c) {
  if (name == "synth") return cmd_synth(c);
  if (name == "slice") return cmd_slice(c);
  if (name == "train") return cmd_train(c);
  if (name == "eval") return cmd_eval(c);
  if (name == "predict") return cmd_predict(c);
  if (name == "render") return cmd_render(c);
  throw ConfigError("unknown command '" + name + "'");
}

}  // namespace groupdet::runner
