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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"

#include "detxplain/detectors.hpp"
#include "detxplain/harness.hpp"
#include "detxplain/io.hpp"

namespace fs = std::filesystem;
using namespace detxplain;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "dx_cli_test";

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct RunResult {
  int code;
  std::string output;
};

RunResult Cli(const std::string& args) {
  const fs::path log = kRoot / "cli.log";
  const std::string cmd = std::string(DETXPLAIN_CLI_PATH) + " " + args + " > " +
                          log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, Slurp(log)};
}

// Seed-42 dataset of 50 images, generated once per test run.
const fs::path& Data() {
  static const fs::path dir = [] {
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
    const fs::path d = kRoot / "data";
    REQUIRE(Cli("gen-data --count 50 --size 128 --seed 42 --out " + d.string()).code == 0);
    return d;
  }();
  return dir;
}

nlohmann::json Annotations() { return nlohmann::json::parse(Slurp(Data() / "annotations.json")); }

std::string FirstWithBoxes(std::size_t n) {
  const auto ann = Annotations();
  for (const auto& e : ann["images"]) {
    if (e["boxes"].size() == n) return e["id"];
  }
  FAIL("no image with the requested nodule count");
  return {};
}

bool HasPartialDir(const fs::path& out) {
  for (const auto& e : fs::directory_iterator(out.parent_path())) {
    if (e.path().filename().string().rfind(out.filename().string() + ".partial", 0) == 0) {
      return true;
    }
  }
  return false;
}

}  // namespace

TEST_CASE("gen-data writes 50 images with 0 and 2 nodule scenes, reproducibly") {
  const auto ann = Annotations();
  REQUIRE(ann["images"].size() == 50);
  bool zero = false, two = false;
  for (const auto& e : ann["images"]) {
    CHECK(fs::exists(Data() / e["file"].get<std::string>()));
    CHECK(e["width"] == 128);
    CHECK(e["height"] == 128);
    zero = zero || e["boxes"].empty();
    two = two || e["boxes"].size() == 2;
  }
  CHECK(zero);
  CHECK(two);
  int pngs = 0;
  for (const auto& f : fs::directory_iterator(Data() / "images")) pngs += f.path().extension() == ".png";
  CHECK(pngs == 50);

  const fs::path again = kRoot / "data2";
  REQUIRE(Cli("gen-data --count 50 --size 128 --seed 42 --out " + again.string()).code == 0);
  CHECK(Slurp(again / "annotations.json") == Slurp(Data() / "annotations.json"));
  for (const auto& e : ann["images"]) {
    const std::string f = e["file"];
    CHECK(Slurp(again / f) == Slurp(Data() / f));
  }
}

TEST_CASE("explain on a negative image: statistic outputs and no-detection status") {
  const std::string id = FirstWithBoxes(0);
  const fs::path out = kRoot / "neg";
  const auto r = Cli("explain " + id + " --dataset " + Data().string() +
                     " --methods kde,dm,rise,gradcam --out " + out.string());
  REQUIRE(r.code == 0);
  for (const char* m : {"kde", "dm"}) {
    CHECK(fs::exists(out / (id + "_" + m + ".sal")));
    CHECK(fs::exists(out / (id + "_" + m + ".png")));
  }
  CHECK_FALSE(fs::exists(out / (id + "_rise.sal")));
  const auto doc = nlohmann::json::parse(Slurp(out / (id + ".json")));
  CHECK(doc["detections"].empty());
  for (const auto& m : doc["methods"]) {
    const std::string name = m["method"];
    if (name == "kde" || name == "dm") {
      CHECK(m["status"] == "ok");
      CHECK(m["negative_case"]["no_detection"] == true);
      CHECK(m["negative_case"].contains("kde_mass"));
      CHECK(m["negative_case"].contains("dm_mass"));
    } else {
      CHECK(m["status"] == "no detection");
    }
  }
}

TEST_CASE("explain with D-RISE writes one map per detection and is deterministic") {
  const MiniCnn net;
  const Dataset ds = LoadDataset(Data());
  std::string id;
  std::size_t n = 0;
  for (const auto& e : ds.entries) {
    n = net.Detect(ds.LoadImage(e)).size();
    if (n >= 2) {
      id = e.id;
      break;
    }
  }
  REQUIRE(n >= 2);
  const std::string args = "explain " + id + " --dataset " + Data().string() +
                           " --methods drise,kde,lrp --seed 5 --set drise.n_masks=60 --out ";
  REQUIRE(Cli(args + (kRoot / "ex1").string()).code == 0);
  REQUIRE(Cli(args + (kRoot / "ex2").string()).code == 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string f = id + "_drise_" + std::to_string(i) + ".sal";
    REQUIRE(fs::exists(kRoot / "ex1" / f));
    CHECK(Slurp(kRoot / "ex1" / f) == Slurp(kRoot / "ex2" / f));
  }
  CHECK_FALSE(fs::exists(kRoot / "ex1" / (id + "_drise_" + std::to_string(n) + ".sal")));
  for (const char* m : {"kde", "lrp"}) {
    const std::string f = id + "_" + m + ".sal";
    CHECK(Slurp(kRoot / "ex1" / f) == Slurp(kRoot / "ex2" / f));
  }
  const auto doc = nlohmann::json::parse(Slurp(kRoot / "ex1" / (id + ".json")));
  for (const auto& m : doc["methods"]) {
    if (m["method"] == "kde") {
      CHECK(m["pckde"]["score"].get<double>() > 0.0);
      CHECK(m["pckde"]["score"].get<double>() <= 1.0);
      CHECK(m["pckde"]["consistent"] == (m["pckde"]["score"].get<double>() > 0.5));
      CHECK(m["pckde"]["detected_center"].size() == 2);
      CHECK(m["pckde"]["argmax"].size() == 2);
    }
    if (m["method"] == "drise") CHECK(m["target_boxes"].size() == n);
  }
}

TEST_CASE("configuration errors exit 2 before any output") {
  const fs::path out = kRoot / "bad_cfg";
  auto r = Cli("benchmark --dataset " + Data().string() + " --methods dm,nosuch --out " + out.string());
  CHECK(r.code == 2);
  CHECK(r.output.find("nosuch") != std::string::npos);
  CHECK_FALSE(fs::exists(out));
  r = Cli("benchmark --dataset " + Data().string() +
          " --detector synthetic --methods dm,gradcam,adasise --out " + out.string());
  CHECK(r.code == 2);
  CHECK(r.output.find("gradcam") != std::string::npos);
  CHECK(r.output.find("adasise") != std::string::npos);
  CHECK_FALSE(fs::exists(out));
  CHECK(Cli("benchmark --dataset " + Data().string() + " --methods dm --set rise.n_masks=0 --out " +
            out.string()).code == 2);
  CHECK(Cli("benchmark --dataset " + Data().string() + " --methods dm --set nokey=1 --out " +
            out.string()).code == 2);
  CHECK(Cli("benchmark --dataset " + Data().string() + " --methods dm --set novalue --out " +
            out.string()).code == 2);
  CHECK(Cli("explain --dataset " + Data().string()).code == 2);
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("data errors exit 3 and leave no partial output") {
  const fs::path broken = kRoot / "broken";
  fs::create_directories(broken / "images");
  fs::copy_file(Data() / "annotations.json", broken / "annotations.json",
                fs::copy_options::overwrite_existing);
  for (int i = 0; i < 3; ++i) {
    const std::string f = "images/img_000" + std::to_string(i) + ".png";
    fs::copy_file(Data() / f, broken / f, fs::copy_options::overwrite_existing);
  }
  const fs::path out = kRoot / "broken_out";
  const auto r = Cli("benchmark --dataset " + broken.string() + " --methods dm --out " + out.string());
  CHECK(r.code == 3);
  CHECK(r.output.find("img_0003") != std::string::npos);
  CHECK_FALSE(fs::exists(out));
  CHECK_FALSE(HasPartialDir(out));
  CHECK(Cli("explain img_0000 --dataset " + (kRoot / "missing").string() + " --methods dm --out " +
            out.string()).code == 3);
  CHECK(Cli("explain nosuchid --dataset " + Data().string() + " --methods dm --out " +
            out.string()).code == 3);
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("exit code mapping") {
  CHECK(ExitCodeFor(ErrorCode::kConfig) == 2);
  CHECK(ExitCodeFor(ErrorCode::kInvalidArgument) == 2);
  CHECK(ExitCodeFor(ErrorCode::kData) == 3);
  CHECK(ExitCodeFor(ErrorCode::kIo) == 3);
  CHECK(ExitCodeFor(ErrorCode::kNumeric) == 4);
  CHECK(ExitCodeFor(ErrorCode::kDegenerateInput) == 4);
}

TEST_CASE("config file values are overridden by flags") {
  const fs::path cfg = kRoot / "run.cfg";
  std::ofstream(cfg) << "# run\ndataset = " << Data().string()
                     << "\nmethods = dm\nmetrics = ebpg\nseed = 9\nout = "
                     << (kRoot / "from_file").string() << "\n";
  REQUIRE(Cli("benchmark --config " + cfg.string()).code == 0);
  CHECK(fs::exists(kRoot / "from_file" / "report.csv"));
  REQUIRE(Cli("benchmark --config " + cfg.string() + " --methods kde --out " +
              (kRoot / "from_flags").string()).code == 0);
  const std::string csv = Slurp(kRoot / "from_flags" / "report.csv");
  CHECK(csv.find(",kde,") != std::string::npos);
  CHECK(csv.find(",dm,") == std::string::npos);

  RunConfig rc;
  ApplyConfigText(&rc, "methods = rise, lime\nrise.n_masks = 50\nlime.samples = 120\n"
                       "kde.bandwidth = 3.5\npckde.log_space = true\nworkers = 3\n"
                       "drop.per_box = true\n");
  CHECK(rc.methods == std::vector<std::string>{"rise", "lime"});
  CHECK(rc.params.rise.n_masks == 50);
  CHECK(rc.params.lime.n_samples == 120);
  CHECK(rc.params.kde_bandwidth == 3.5);
  CHECK(rc.params.pckde_log_space);
  CHECK(rc.workers == 3);
  CHECK(rc.drop_per_box);
  ApplyConfigText(&rc, "kde.bandwidth = auto\n");
  CHECK_FALSE(rc.params.kde_bandwidth.has_value());
  CHECK_THROWS_AS(ApplyConfigText(&rc, "seed = -1x\n"), Error);
}

TEST_CASE("benchmark output is identical for 1 and 8 workers") {
  const std::string base = "benchmark --dataset " + Data().string() +
                           " --methods kde,dm,lrp,gradcam,rise --seed 42"
                           " --set rise.n_masks=20 --out ";
  REQUIRE(Cli(base + (kRoot / "w1").string() + " --workers 1").code == 0);
  REQUIRE(Cli(base + (kRoot / "w8").string() + " --workers 8").code == 0);
  auto metric_columns = [](const std::string& csv) {
    std::istringstream in(csv);
    std::string line, out;
    while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
    return out;
  };
  const std::string a = Slurp(kRoot / "w1" / "report.csv");
  CHECK(std::count(a.begin(), a.end(), '\n') == 1 + 50 * 5);
  CHECK(metric_columns(a) == metric_columns(Slurp(kRoot / "w8" / "report.csv")));
  int maps = 0;
  for (const auto& f : fs::directory_iterator(kRoot / "w1" / "maps")) {
    CHECK(Slurp(f.path()) == Slurp(kRoot / "w8" / "maps" / f.path().filename()));
    ++maps;
  }
  CHECK(maps > 0);
  CHECK(fs::exists(kRoot / "w1" / "report.json"));
}

TEST_CASE("render overlays a saliency file") {
  const std::string id = FirstWithBoxes(1);
  const fs::path out = kRoot / "render";
  REQUIRE(Cli("explain " + id + " --dataset " + Data().string() + " --methods dm --out " +
              out.string()).code == 0);
  const fs::path png = out / "overlay.png";
  REQUIRE(Cli("render " + id + " " + (out / (id + "_dm.sal")).string() + " --dataset " +
              Data().string() + " --out " + png.string()).code == 0);
  const std::string bytes = Slurp(png);
  REQUIRE(bytes.size() > 8);
  CHECK(bytes.substr(1, 3) == "PNG");
  CHECK(Cli("render " + id + " " + (out / "nothing.sal").string() + " --dataset " +
            Data().string() + " --out " + png.string()).code == 3);
}
