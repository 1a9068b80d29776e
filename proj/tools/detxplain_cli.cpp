/*
 * Copyright 2026 The detxplain Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// detxplain command-line tool: gen-data, explain, benchmark, render.

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "detxplain/detxplain.h"

namespace {

int Report(dx_status status) {
  if (status != DX_OK) {
    std::fprintf(stderr, "detxplain: %s\n", dx_last_error());
  }
  return dx_exit_code(status);
}

// Options shared by explain and benchmark. Flags override --config values.
struct RunFlags {
  std::string config;
  std::string dataset;
  std::string detector;
  std::string detector_config;
  std::string methods;
  std::string metrics;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::vector<std::string> settings;

  void Register(CLI::App* cmd, bool with_metrics) {
    cmd->add_option("--config", config, "key = value run configuration file");
    cmd->add_option("--dataset", dataset, "dataset directory");
    cmd->add_option("--detector", detector, "synthetic or minicnn");
    cmd->add_option("--detector-config", detector_config,
                    "detector key = value file");
    cmd->add_option("--methods", methods,
                    "comma list: kde,dm,lime,gradcam,gradcampp,lrp,rise,adasise,drise");
    if (with_metrics) {
      cmd->add_option("--metrics", metrics, "comma list: ebpg,iou,bbox,drop,increase");
    }
    cmd->add_option("--out", out, "output directory");
    cmd->add_option("--seed", seed, "master seed");
    cmd->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--set", settings, "extra key=value setting (repeatable)")
        ->check([](const std::string& kv) {
          return kv.find('=') == std::string::npos ? "expected key=value" : "";
        });
  }

  dx_status Build(dx_run_config** cfg) const {
    dx_status st = config.empty() ? dx_run_config_create(cfg)
                                  : dx_run_config_load(config.c_str(), cfg);
    if (st != DX_OK) return st;
    auto set = [&](const char* key, const std::string& value) {
      if (st == DX_OK && !value.empty()) st = dx_run_config_set(*cfg, key, value.c_str());
    };
    set("dataset", dataset);
    set("detector", detector);
    set("detector_config", detector_config);
    set("methods", methods);
    set("metrics", metrics);
    set("out", out);
    if (seed) set("seed", std::to_string(*seed));
    if (workers) set("workers", std::to_string(*workers));
    for (const auto& kv : settings) {
      const auto eq = kv.find('=');
      set(kv.substr(0, eq).c_str(), kv.substr(eq + 1));
    }
    return st;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Saliency explanations for a two-stage nodule detector"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  int count = 50;
  int size = 128;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  gen->add_option("--count", count, "number of scenes")->check(CLI::PositiveNumber);
  gen->add_option("--size", size, "image height and width in pixels");
  gen->add_option("--seed", gen_seed, "master seed");
  gen->add_option("--out", gen_out, "output directory")->required();

  auto* explain = app.add_subcommand("explain", "explain one image");
  RunFlags explain_flags;
  std::string image_id;
  explain->add_option("image_id", image_id, "dataset image id")->required();
  explain_flags.Register(explain, false);

  auto* bench = app.add_subcommand("benchmark", "evaluate methods over a dataset");
  RunFlags bench_flags;
  bench_flags.Register(bench, true);

  auto* render = app.add_subcommand("render", "overlay a saliency file on its image");
  std::string render_dataset;
  std::string render_id;
  std::string render_sal;
  std::string render_out;
  render->add_option("image_id", render_id, "dataset image id")->required();
  render->add_option("sal", render_sal, "SAL1 saliency file")->required();
  render->add_option("--dataset", render_dataset, "dataset directory")->required();
  render->add_option("--out", render_out, "output PNG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (*gen) {
    return Report(dx_cmd_gen_data(count, size, size, gen_seed, gen_out.c_str()));
  }
  if (*render) {
    return Report(dx_cmd_render(render_dataset.c_str(), render_id.c_str(),
                                render_sal.c_str(), render_out.c_str()));
  }
  const bool is_explain = static_cast<bool>(*explain);
  const RunFlags& flags = is_explain ? explain_flags : bench_flags;
  dx_run_config* cfg = nullptr;
  dx_status st = flags.Build(&cfg);
  char* text = nullptr;
  if (st == DX_OK) {
    st = is_explain ? dx_cmd_explain(cfg, image_id.c_str(), &text)
                    : dx_cmd_benchmark(cfg, &text);
  }
  if (st == DX_OK && text != nullptr) std::fputs(text, stdout);
  dx_string_free(text);
  dx_run_config_destroy(cfg);
  return Report(st);
}
