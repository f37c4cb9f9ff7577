// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#include "detector/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "common/error.hpp"

namespace groupdet::detector {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

namespace {

constexpr char kMagic[4] = {'G', 'D', 'C', 'K'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is, const std::filesystem::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw IOError("truncated checkpoint " + path.string());
  return v;
}

std::string get_string(std::istream& is, std::size_t n, const std::filesystem::path& path) {
  if (n > (1u << 30)) throw IOError("corrupt checkpoint " + path.string());
  std::string s(n, '\0');
  if (!is.read(s.data(), static_cast<std::streamsize>(n))) throw IOError("truncated checkpoint " + path.string());
  return s;
}

}  // namespace

void save_checkpoint(const Detector& detector, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // Write beside the target and rename, so a crash never leaves half a file.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IOError("cannot write " + tmp.string());
    os.write(kMagic, 4);
    put<std::uint32_t>(os, kCheckpointVersion);
    const std::string cfg = to_json(detector.config()).dump();
    put<std::uint64_t>(os, cfg.size());
    os.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
    const auto& all = detector.params().all();
    put<std::uint32_t>(os, static_cast<std::uint32_t>(all.size()));
    for (const auto& [name, var] : all) {
      put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      const auto& t = var->value;
      put<std::uint32_t>(os, static_cast<std::uint32_t>(t.shape.size()));
      for (int d : t.shape) put<std::int32_t>(os, d);
      os.write(reinterpret_cast<const char*>(t.ptr()), static_cast<std::streamsize>(t.numel() * sizeof(double)));
    }
    if (!os) throw IOError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IOError("cannot open checkpoint " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw IOError("not a checkpoint: " + path.string());
  const auto version = get<std::uint32_t>(is, path);
  if (version != kCheckpointVersion)
    throw IOError("unsupported checkpoint version " + std::to_string(version));

  Checkpoint ck;
  const auto cfg_len = get<std::uint64_t>(is, path);
  try {
    ck.config = detector_config_from_json(nlohmann::json::parse(get_string(is, cfg_len, path)));
  } catch (const nlohmann::json::exception& e) {
    throw IOError("corrupt checkpoint config: " + std::string(e.what()));
  }
  const auto count = get<std::uint32_t>(is, path);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = get_string(is, get<std::uint32_t>(is, path), path);
    const auto rank = get<std::uint32_t>(is, path);
    if (rank > 8) throw IOError("corrupt checkpoint tensor " + name);
    std::vector<int> shape(rank);
    for (auto& d : shape) {
      d = get<std::int32_t>(is, path);
      if (d < 0) throw IOError("corrupt checkpoint tensor " + name);
    }
    nn::Tensor t(shape);
    if (!is.read(reinterpret_cast<char*>(t.ptr()), static_cast<std::streamsize>(t.numel() * sizeof(double))))
      throw IOError("truncated checkpoint " + path.string());
    ck.tensors.emplace(std::move(name), std::move(t));
  }
  return ck;
}

void apply_weights(Detector& detector, const std::map<std::string, nn::Tensor>& tensors) {
  const auto& all = detector.params().all();
  for (const auto& [name, t] : tensors)
    if (!all.count(name)) throw WeightMismatch("unexpected tensor " + name);
  for (const auto& [name, var] : all) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw WeightMismatch("missing tensor " + name);
    if (it->second.shape != var->value.shape)
      throw WeightMismatch(name + ": expected " + nn::shape_str(var->value.shape) + ", got " +
                           nn::shape_str(it->second.shape));
  }
  for (const auto& [name, var] : all) var->value = tensors.at(name);
}

std::unique_ptr<Detector> load_detector(const std::filesystem::path& path) {
  Checkpoint ck = read_checkpoint(path);
  auto d = std::make_unique<Detector>(ck.config);
  apply_weights(*d, ck.tensors);
  return d;
}

}  // namespace groupdet::detector
