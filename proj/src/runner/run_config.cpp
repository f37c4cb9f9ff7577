// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#include "runner/run_config.hpp"

#include <cstdlib>
#include <fstream>

#include "common/error.hpp"

namespace groupdet::runner {

using nlohmann::json;

std::filesystem::path RunConfig::resolve(const std::string& p) const {
  std::filesystem::path path(p);
  if (path.is_absolute()) return path;
  return std::filesystem::path(io.output) / path;
}

namespace {

json synth_to_json(const synth::SynthSpec& s) {
  json patterns = json::array();
  for (auto p : s.patterns) patterns.push_back(synth::pattern_name(p));
  return {{"seed", s.seed},
          {"n_screens", s.n_screens},
          {"size_min", s.size_min},
          {"size_max", s.size_max},
          {"patterns", patterns},
          {"distractor_density", s.distractor_density},
          {"vocab_size", s.vocab_size},
          {"token_correlation", s.token_correlation},
          {"screens_per_package", s.screens_per_package}};
}

// Overlays `src` onto `dst`, refusing keys that `dst` does not define.
void merge_strict(json& dst, const json& src, const std::string& where) {
  if (!src.is_object()) throw ConfigError(where.empty() ? "config must be an object" : where + " must be an object");
  for (const auto& [key, value] : src.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!dst.contains(key)) throw ConfigError("unknown config key '" + path + "'");
    if (dst[key].is_object()) merge_strict(dst[key], value, path);
    else dst[key] = value;
  }
}

template <typename T>
T field(const json& j, const char* section, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("bad value for ") + section + "." + key);
  }
}

}  // namespace

json to_json(const RunConfig& c) {
  return {{"data",
           {{"drafts", c.data.drafts},
            {"images", c.data.images},
            {"dataset", c.data.dataset},
            {"ratios", {c.data.ratios.train, c.data.ratios.val, c.data.ratios.test}},
            {"seed", c.data.seed},
            {"require_images", c.data.require_images}}},
          {"synth", synth_to_json(c.synth)},
          {"model", detector::to_json(c.model)},
          {"eval",
           {{"split", c.eval.split},
            {"checkpoint", c.eval.checkpoint},
            {"render_min_score", c.eval.render_min_score}}},
          {"io",
           {{"output", c.io.output},
            {"image", c.io.image},
            {"texts", c.io.texts},
            {"detections", c.io.detections},
            {"render", c.io.render}}}};
}

RunConfig run_config_from_json(const json& in) {
  json j = to_json(RunConfig{});
  merge_strict(j, in, "");

  RunConfig c;
  const json& d = j["data"];
  c.data.drafts = field<std::string>(d, "data", "drafts");
  c.data.images = field<std::string>(d, "data", "images");
  c.data.dataset = field<std::string>(d, "data", "dataset");
  const auto ratios = field<std::vector<double>>(d, "data", "ratios");
  if (ratios.size() != 3) throw ConfigError("data.ratios needs three entries (train, val, test)");
  c.data.ratios = {ratios[0], ratios[1], ratios[2]};
  c.data.seed = field<std::uint64_t>(d, "data", "seed");
  c.data.require_images = field<bool>(d, "data", "require_images");

  const json& s = j["synth"];
  c.synth.seed = field<std::uint64_t>(s, "synth", "seed");
  c.synth.n_screens = field<int>(s, "synth", "n_screens");
  c.synth.size_min = field<int>(s, "synth", "size_min");
  c.synth.size_max = field<int>(s, "synth", "size_max");
  c.synth.patterns.clear();
  for (const auto& name : field<std::vector<std::string>>(s, "synth", "patterns")) {
    try {
      c.synth.patterns.insert(synth::parse_pattern(name));
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
  c.synth.distractor_density = field<double>(s, "synth", "distractor_density");
  c.synth.vocab_size = field<int>(s, "synth", "vocab_size");
  c.synth.token_correlation = field<double>(s, "synth", "token_correlation");
  c.synth.screens_per_package = field<int>(s, "synth", "screens_per_package");

  c.model = detector::detector_config_from_json(j["model"]);

  const json& e = j["eval"];
  c.eval.split = field<std::string>(e, "eval", "split");
  if (c.eval.split != "train" && c.eval.split != "val" && c.eval.split != "test")
    throw ConfigError("eval.split must be train, val or test");
  c.eval.checkpoint = field<std::string>(e, "eval", "checkpoint");
  c.eval.render_min_score = field<double>(e, "eval", "render_min_score");

  const json& io = j["io"];
  c.io.output = field<std::string>(io, "io", "output");
  c.io.image = field<std::string>(io, "io", "image");
  c.io.texts = field<std::string>(io, "io", "texts");
  c.io.detections = field<std::string>(io, "io", "detections");
  c.io.render = field<std::string>(io, "io", "render");
  if (c.io.output.empty()) throw ConfigError("io.output must not be empty");
  return c;
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (dot == std::string::npos) {
      json value = json::parse(raw, nullptr, false);
      if (value.is_discarded()) value = raw;
      (*node)[part] = value;
      return;
    }
    json& next = (*node)[part];
    if (next.is_null()) next = json::object();
    if (!next.is_object()) throw ConfigError("override '" + key + "' descends into a non-object");
    node = &next;
    start = dot + 1;
  }
}

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides,
                          bool use_env) {
  json j = json::object();
  if (!path.empty()) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config " + path.string());
    j = json::parse(is, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config " + path.string() + " is not valid JSON");
  }
  for (const auto& o : overrides) apply_override(j, o);
  if (use_env)
    if (const char* out = std::getenv("GROUPDET_OUT"); out && *out) j["io"]["output"] = out;
  return run_config_from_json(j);
}

}  // namespace groupdet::runner
