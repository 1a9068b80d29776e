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

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "detxplain/error.hpp"
#include "detxplain/harness.hpp"
#include "detxplain/metrics.hpp"
#include "detxplain/scene.hpp"
#include "oracles.hpp"

using namespace detxplain;

namespace {

SaliencyMap Indicator(int h, int w, const BBox& b, double in = 1.0, double out = 0.0) {
  SaliencyMap m(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) m.at(y, x) = b.contains(x, y) ? in : out;
  }
  return m;
}

// Indicator of a box over a fixed irregular background pattern.
SaliencyMap Graded(int h, int w, const BBox& b) {
  SaliencyMap m = Indicator(h, w, b, 2.0);
  for (std::size_t i = 0; i < m.values.size(); ++i) m.values[i] += ((7 * i) % 11) / 10.0;
  return m;
}

std::filesystem::path SmallDataset(int count) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("dx_metrics_ds_" + std::to_string(count));
  if (!std::filesystem::exists(dir / "annotations.json")) {
    GenDataOptions o;
    o.count = count;
    o.seed = 42;
    o.out = dir;
    CmdGenData(o);
  }
  return dir;
}

}  // namespace

TEST_CASE("ebpg extremes and a uniform map") {
  const std::vector<BBox> gt = {{0, 0, 4, 4}};
  CHECK(*Ebpg(Indicator(8, 8, gt[0]), gt) == 1.0);
  CHECK(*Ebpg(Indicator(8, 8, {4, 4, 8, 8}), gt) == 0.0);
  SaliencyMap uniform(8, 8);
  std::fill(uniform.values.begin(), uniform.values.end(), 1.0);
  // A constant map normalizes to zeros: no energy, score 0.
  CHECK(*Ebpg(uniform, gt) == 0.0);
  SaliencyMap nearly = uniform;
  nearly.values.back() = 0.0;  // keeps min 0, max 1
  CHECK(*Ebpg(nearly, gt) == doctest::Approx(16.0 / 63.0));
  CHECK_FALSE(Ebpg(nearly, {}).has_value());
}

TEST_CASE("ebpg is invariant under positive scaling") {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SaliencyMap m(16, 16);
  for (double& v : m.values) v = u(rng);
  SaliencyMap scaled = m;
  for (double& v : scaled.values) v *= 37.0;
  const std::vector<BBox> gt = {{2, 3, 9, 11}, {10, 10, 16, 14}};
  CHECK(*Ebpg(scaled, gt) == doctest::Approx(*Ebpg(m, gt)).epsilon(1e-12));
}

TEST_CASE("iou metric examples") {
  const BBox g{1, 1, 4, 5};
  CHECK(*IouMetric(Indicator(8, 8, g), std::vector<BBox>{g}) == 1.0);
  CHECK(*IouMetric(Indicator(8, 8, {5, 5, 8, 8}), std::vector<BBox>{{0, 0, 3, 3}}) == 0.0);
  CHECK(*IouMetric(Indicator(6, 6, {1, 1, 3, 3}), std::vector<BBox>{{2, 2, 4, 4}}) ==
        doctest::Approx(1.0 / 7.0).epsilon(1e-12));
  SaliencyMap flat(6, 6);
  std::fill(flat.values.begin(), flat.values.end(), 0.3);
  CHECK(*IouMetric(flat, std::vector<BBox>{g}) == 0.0);
  CHECK_FALSE(IouMetric(flat, {}).has_value());
}

TEST_CASE("bbox metric examples") {
  const BBox g{1, 1, 3, 4};
  CHECK(*BboxMetric(Indicator(6, 6, g), std::vector<BBox>{g}) == 1.0);
  CHECK(*BboxMetric(Indicator(6, 6, {3, 0, 6, 2}), std::vector<BBox>{{0, 3, 3, 5}}) == 0.0);
  // Uniform map: the first N row-major pixels are taken.
  SaliencyMap uniform(6, 6);
  std::fill(uniform.values.begin(), uniform.values.end(), 0.8);
  const BBox h{0, 0, 2, 3};  // N = 6, the whole first row
  CHECK(*BboxMetric(uniform, std::vector<BBox>{h}) == doctest::Approx(2.0 / 6.0));
}

TEST_CASE("bbox metric is invariant under strictly monotone transforms") {
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    SaliencyMap m(12, 12);
    for (double& v : m.values) v = std::floor(u(rng) * 8) / 8;  // ties included
    SaliencyMap t = m;
    for (double& v : t.values) v = std::exp(3 * v) + v * v * v;
    const std::vector<BBox> gt = {{1, 2, 6, 7}, {8, 0, 12, 3}};
    CHECK(*BboxMetric(t, gt) == *BboxMetric(m, gt));
  }
}

TEST_CASE("iou and bbox metrics match brute force on enumerated 6x6 instances") {
  const auto boxes = oracle::AllBoxes(6, 6);
  REQUIRE(boxes.size() == 441);
  long compared = 0;
  for (int graded = 0; graded < 2; ++graded) {
    for (const BBox& hot : boxes) {
      const SaliencyMap m = graded ? Graded(6, 6, hot) : Indicator(6, 6, hot);
      const BBox ebox = oracle::ExplanationBox(m.values, 6, 6);
      const auto ranks = oracle::Ranks(m.values);
      for (const BBox& g : boxes) {
        const std::vector<BBox> gt = {g};
        CHECK(*IouMetric(m, gt) == oracle::IouMetric(ebox, gt));
        CHECK(*BboxMetric(m, gt) == oracle::BboxMetric(ranks, 6, 6, gt));
        ++compared;
      }
      // A few two-box ground truths per map.
      for (std::size_t k = 0; k + 220 < boxes.size(); k += 55) {
        const std::vector<BBox> gt = {boxes[k], boxes[k + 220]};
        CHECK(*IouMetric(m, gt) == oracle::IouMetric(ebox, gt));
        CHECK(*BboxMetric(m, gt) == oracle::BboxMetric(ranks, 6, 6, gt));
      }
    }
  }
  CHECK(compared == 2 * 441 * 441);
}

TEST_CASE("plausibility metrics stay in [0, 1] and read relevance by magnitude") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    SaliencyMap m(16, 16);
    for (double& v : m.values) v = u(rng);
    SaliencyMap mag = m;
    for (double& v : mag.values) v = std::abs(v);
    const std::vector<BBox> gt = {{3, 3, 9, 10}};
    for (const auto& r : {Ebpg(m, gt), IouMetric(m, gt), BboxMetric(m, gt)}) {
      CHECK(*r >= 0.0);
      CHECK(*r <= 1.0);
    }
    CHECK(*Ebpg(m, gt) == *Ebpg(mag, gt));
    CHECK(*BboxMetric(m, gt) == *BboxMetric(mag, gt));
  }
}

TEST_CASE("drop and increase") {
  const MiniCnn net;
  const SyntheticScene s = GenerateScene(128, 128, 1, 42);
  // x~ equals the image exactly where the map is at its maximum and the
  // image is already 0 where it is not.
  SaliencyMap exact(128, 128);
  std::fill(exact.values.begin(), exact.values.end(), 1.0);
  exact.values[0] = 0.0;
  std::vector<double> px(s.image.values().begin(), s.image.values().end());
  px[0] = 0.0;
  const Image img0(128, 128, px);
  const auto same = DropIncreaseMetric(net, img0, exact);
  REQUIRE(same.has_value());
  CHECK(same->explained == same->original);
  CHECK(same->drop == 0.0);
  CHECK_FALSE(same->increased);

  const auto zero = DropIncreaseMetric(net, s.image, SaliencyMap(128, 128));
  REQUIRE(zero.has_value());
  CHECK(zero->drop >= 90.0);
  CHECK(zero->drop <= 100.0);
  CHECK_FALSE(zero->increased);

  // Keeping only the nodule box darkens its surround and lifts the score.
  const auto focused =
      DropIncreaseMetric(net, s.image, Indicator(128, 128, s.ground_truth[0]));
  REQUIRE(focused.has_value());
  CHECK(focused->increased);
  CHECK(focused->drop == 0.0);

  CHECK_THROWS_AS(DropIncreaseMetric(net, s.image, SaliencyMap(64, 64)), Error);
}

TEST_CASE("per-box drop uses the target box confidence") {
  const MiniCnn net;
  const SyntheticScene s = GenerateScene(128, 128, 1, 42);
  const auto dets = net.Detect(s.image);
  REQUIRE_FALSE(dets.empty());
  const BBox target = dets.front().box;
  double expect = 0.0;
  for (const Detection& d : dets) expect = std::max(expect, oracle::BoxIou(d.box, target) * d.score);
  CHECK(BoxConfidence(dets, target) == expect);
  CHECK(BoxConfidence(dets, target) == dets.front().score);
  CHECK(BoxConfidence({}, target) == 0.0);

  const auto zero = DropIncreaseMetric(net, s.image, SaliencyMap(128, 128), target);
  REQUIRE(zero.has_value());
  CHECK(zero->original == dets.front().score);
  CHECK(zero->explained == 0.0);
  CHECK(zero->drop == 100.0);
  const auto focused = DropIncreaseMetric(net, s.image, Indicator(128, 128, s.ground_truth[0]), target);
  REQUIRE(focused.has_value());
  CHECK(focused->drop < 50.0);
  // A box far from every detection has no confidence to drop.
  CHECK_FALSE(DropIncreaseMetric(net, s.image, SaliencyMap(128, 128), BBox{0, 0, 2, 2}).has_value());
}

TEST_CASE("benchmark bookkeeping, aggregates and determinism") {
  const Dataset ds = LoadDataset(SmallDataset(10));
  REQUIRE(ds.entries.size() == 10);
  const MiniCnn net;
  BenchmarkOptions o;
  o.methods = {"dm"};
  o.metrics = {"ebpg"};
  const MetricReport r = RunBenchmark(ds, net, o);
  CHECK(r.rows.size() == 10);
  CHECK(r.aggregates.size() == 1);
  CHECK(r.aggregates.at("dm").count("ebpg") == 1);
  double sum = 0.0;
  int n = 0;
  for (const MetricRow& row : r.rows) {
    CHECK(row.method == "dm");
    CHECK_FALSE(row.iou.has_value());
    CHECK(row.seconds.has_value());
    CHECK(*row.seconds > 0.0);
    if (row.ebpg) {
      sum += *row.ebpg;
      ++n;
    }
  }
  CHECK(r.aggregates.at("dm").at("ebpg") == doctest::Approx(sum / n));

  o.methods = {"dm", "lrp", "gradcam"};
  o.metrics = AllMetrics();
  const MetricReport a = RunBenchmark(ds, net, o);
  const MetricReport b = RunBenchmark(ds, net, o);
  REQUIRE(a.rows.size() == 30);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].image_id == b.rows[i].image_id);
    CHECK(a.rows[i].status == b.rows[i].status);
    CHECK(a.rows[i].ebpg == b.rows[i].ebpg);
    CHECK(a.rows[i].iou == b.rows[i].iou);
    CHECK(a.rows[i].bbox == b.rows[i].bbox);
    CHECK(a.rows[i].drop == b.rows[i].drop);
    CHECK(a.rows[i].increase == b.rows[i].increase);
    if (a.rows[i].drop) {
      CHECK(*a.rows[i].drop >= 0.0);
      CHECK(*a.rows[i].drop <= 100.0);
    }
  }
  for (const auto& [method, metrics] : a.aggregates) {
    if (metrics.count("increase")) {
      CHECK(metrics.at("increase") >= 0.0);
      CHECK(metrics.at("increase") <= 100.0);
    }
  }

  std::istringstream csv(ReportCsv(a));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "image_id,method,ebpg,iou,bbox,drop,increase,seconds");
  int lines = 0;
  while (std::getline(csv, line)) ++lines;
  CHECK(lines == 30);
  CHECK(ReportJson(a).find("\"lrp\"") != std::string::npos);
}

TEST_CASE("benchmark per-box drop applies to D-RISE rows only") {
  const Dataset ds = LoadDataset(SmallDataset(10));
  const MiniCnn net;
  BenchmarkOptions o;
  o.methods = {"drise", "dm"};
  o.metrics = {"drop"};
  o.params.drise.n_masks = 20;
  const MetricReport image_level = RunBenchmark(ds, net, o);
  o.drop_per_box = true;
  const MetricReport per_box = RunBenchmark(ds, net, o);
  REQUIRE(image_level.rows.size() == per_box.rows.size());
  for (std::size_t i = 0; i < per_box.rows.size(); ++i) {
    const MetricRow& a = image_level.rows[i];
    const MetricRow& b = per_box.rows[i];
    if (b.method == "dm") CHECK(a.drop == b.drop);
    if (b.method == "drise" && b.status == "ok") {
      const Image img = ds.LoadImage(ds.Find(b.image_id));
      const auto dets = net.Detect(img);
      MethodParams p = o.params;
      const MethodOutput out = RunMethod("drise", img, net, dets, p, false);
      const auto expect = DropIncreaseMetric(net, img, out.maps.front(), *out.maps.front().target_box);
      CHECK(b.drop == (expect ? std::optional<double>(expect->drop) : std::nullopt));
    }
  }
}

TEST_CASE("benchmark rejects gradient methods on a black-box detector") {
  const Dataset ds = LoadDataset(SmallDataset(10));
  const SyntheticDetector syn;
  BenchmarkOptions o;
  o.methods = {"dm", "gradcam", "lrp"};
  try {
    RunBenchmark(ds, syn, o);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfig);
    const std::string msg = e.what();
    CHECK(msg.find("gradcam") != std::string::npos);
    CHECK(msg.find("lrp") != std::string::npos);
  }
  o.methods = {"dm"};
  o.metrics = {"accuracy"};
  CHECK_THROWS_AS(RunBenchmark(ds, syn, o), Error);
}
