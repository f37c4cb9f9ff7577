// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Talks to the library only through the C API.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "groupdet/groupdet.h"

namespace {

// Exit codes: 0 ok, 2 config, 3 data (and I/O or weight problems), 4 divergence.
int exit_code(gd_status s) {
  switch (s) {
    case GD_OK: return 0;
    case GD_ERR_CONFIG:
    case GD_ERR_ARGUMENT: return 2;
    case GD_ERR_DATA:
    case GD_ERR_IO:
    case GD_ERR_SHAPE: return 3;
    case GD_ERR_DIVERGENCE: return 4;
    case GD_ERR_INTERNAL: break;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"groupdet: UI group detection pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(gd_version()));

  std::string config;
  std::vector<std::string> sets;
  bool print_config = false;
  const char* commands[][2] = {
      {"synth", "generate a synthetic draft corpus"},
      {"slice", "ingest drafts, slice screens, split and write COCO datasets"},
      {"train", "train the detector"},
      {"eval", "evaluate a checkpoint on a dataset split"},
      {"predict", "detect groups on one image"},
      {"render", "draw detections onto an image"},
  };
  for (auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "run config JSON")->check(CLI::ExistingFile);
    sub->add_option("--set", sets, "override, e.g. model.epochs=3")->allow_extra_args(false);
    sub->add_flag("--print-config", print_config, "print the resolved config before running");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  std::vector<const char*> overrides;
  for (const auto& s : sets) overrides.push_back(s.c_str());
  const char* cfg = config.empty() ? nullptr : config.c_str();
  const std::string command = app.get_subcommands().front()->get_name();

  char* out = nullptr;
  if (print_config) {
    const gd_status s = gd_resolve_config(cfg, overrides.data(), overrides.size(), &out);
    if (s != GD_OK) {
      std::fprintf(stderr, "groupdet %s: %s: %s\n", command.c_str(), gd_status_name(s), gd_last_error());
      return exit_code(s);
    }
    std::fprintf(stderr, "%s\n", out);
    gd_string_free(out);
    out = nullptr;
  }

  const gd_status s = gd_run_command(command.c_str(), cfg, overrides.data(), overrides.size(), &out);
  if (s != GD_OK) {
    std::fprintf(stderr, "groupdet %s: %s: %s\n", command.c_str(), gd_status_name(s), gd_last_error());
    return exit_code(s);
  }
  std::printf("%s\n", out);
  gd_string_free(out);
  return 0;
}
