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

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <queue>

#include "detxplain/detectors.hpp"
#include "detxplain/error.hpp"
#include "detxplain/perturbation.hpp"
#include "detxplain/random.hpp"
#include "detxplain/scene.hpp"

using namespace detxplain;

namespace {

// Black-box detector whose outputs are arbitrary functions of the image.
class FakeDetector : public Detector {
 public:
  using DetectFn = std::function<std::vector<Detection>(const Image&)>;
  using ScoreFn = std::function<double(const Image&)>;

  FakeDetector(DetectFn detect, ScoreFn score = nullptr)
      : detect_(std::move(detect)), score_(std::move(score)) {}
  std::string name() const override { return "fake"; }
  const DetectorConfig& config() const override { return config_; }
  ProposalSet Propose(const Image&) const override { return {}; }
  std::vector<Detection> Detect(const Image& image) const override {
    return detect_(image);
  }
  double ImageScore(const Image& image) const override { return score_(image); }

 private:
  DetectorConfig config_;
  DetectFn detect_;
  ScoreFn score_;
};

FakeDetector ConstantDetector(double score, BBox box = {10, 10, 20, 20}) {
  return FakeDetector([=](const Image&) {
    return std::vector<Detection>{{box, score, Stage::kFinal}};
  });
}

double MassIn(const SaliencyMap& m, const BBox& b) {
  double s = 0.0;
  for (int y = b.y1; y < b.y2; ++y) {
    for (int x = b.x1; x < b.x2; ++x) s += m.at(y, x);
  }
  return s;
}

BBox ArgmaxPixel(const SaliencyMap& m) {
  const auto i = std::max_element(m.values.begin(), m.values.end()) - m.values.begin();
  const int y = static_cast<int>(i) / m.width;
  const int x = static_cast<int>(i) % m.width;
  return {x, y, x + 1, y + 1};
}

bool InBox(const BBox& pixel, const BBox& box) {
  return pixel.x1 >= box.x1 && pixel.x2 <= box.x2 && pixel.y1 >= box.y1 &&
         pixel.y2 <= box.y2;
}

// Two label maps describe the same partition.
bool SamePartition(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<int, int> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto [it1, new1] = ab.emplace(a[i], b[i]);
    auto [it2, new2] = ba.emplace(b[i], a[i]);
    if (it1->second != b[i] || it2->second != a[i]) return false;
  }
  return true;
}

bool FourConnected(const Superpixels& sp, int label) {
  const int h = sp.height, w = sp.width;
  int start = -1, total = 0;
  for (int i = 0; i < h * w; ++i) {
    if (sp.labels[i] == label) {
      if (start < 0) start = i;
      ++total;
    }
  }
  if (start < 0) return false;
  std::vector<char> seen(h * w, 0);
  std::queue<int> q;
  q.push(start);
  seen[start] = 1;
  int reached = 0;
  while (!q.empty()) {
    const int i = q.front();
    q.pop();
    ++reached;
    const int y = i / w, x = i % w;
    const int ny[4] = {y - 1, y + 1, y, y};
    const int nx[4] = {x, x, x - 1, x + 1};
    for (int d = 0; d < 4; ++d) {
      if (ny[d] < 0 || ny[d] >= h || nx[d] < 0 || nx[d] >= w) continue;
      const int j = ny[d] * w + nx[d];
      if (!seen[j] && sp.labels[j] == label) {
        seen[j] = 1;
        q.push(j);
      }
    }
  }
  return reached == total;
}

RiseConfig SmallRise(int n = 60) {
  RiseConfig cfg;
  cfg.n_masks = n;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST_CASE("default masks: 500 binary 8x8 grids with sub-cell offsets") {
  const RiseConfig cfg;
  const auto specs = GenerateMaskSpecs(cfg);
  REQUIRE(specs.size() == 500);
  for (const MaskSpec& m : specs) {
    CHECK(m.grid.rows == 8);
    CHECK(m.grid.cols == 8);
    for (double v : m.grid.data) CHECK((v == 0.0 || v == 1.0));
    CHECK(m.offset.dy >= 0.0);
    CHECK(m.offset.dy < 1.0);
    CHECK(m.offset.dx >= 0.0);
    CHECK(m.offset.dx < 1.0);
  }
  const auto masks = GenerateMasks(SmallRise(20), 64, 48);
  REQUIRE(masks.size() == 20);
  for (const Mask& m : masks) {
    CHECK(m.upsampled.rows == 64);
    CHECK(m.upsampled.cols == 48);
    for (double v : m.upsampled.data) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("mask bits concentrate around keep_prob") {
  const auto specs = GenerateMaskSpecs(RiseConfig{});
  double ones = 0.0, total = 0.0;
  for (const MaskSpec& m : specs) {
    for (double v : m.grid.data) {
      ones += v;
      total += 1.0;
    }
  }
  const double sigma = std::sqrt(0.25 / total);
  CHECK(std::abs(ones / total - 0.5) <= 3.0 * sigma);
}

TEST_CASE("mask generation is seed-deterministic") {
  const auto a = GenerateMaskSpecs(SmallRise());
  const auto b = GenerateMaskSpecs(SmallRise());
  RiseConfig other = SmallRise();
  other.seed = 4;
  const auto c = GenerateMaskSpecs(other);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].grid.data == b[i].grid.data);
    CHECK(a[i].offset.dx == b[i].offset.dx);
    CHECK(a[i].offset.dy == b[i].offset.dy);
    differs = differs || a[i].grid.data != c[i].grid.data;
  }
  CHECK(differs);
}

TEST_CASE("rise config validation") {
  for (auto mutate : std::vector<std::function<void(RiseConfig&)>>{
           [](RiseConfig& c) { c.n_masks = 0; }, [](RiseConfig& c) { c.grid_size = 1; },
           [](RiseConfig& c) { c.keep_prob = 0.0; }, [](RiseConfig& c) { c.keep_prob = 1.0; }}) {
    RiseConfig c;
    mutate(c);
    CHECK_THROWS_AS(ValidateRiseConfig(c), Error);
  }
}

TEST_CASE("rise with a constant detector is proportional to the mask sum") {
  const Image img = Image::Filled(32, 32, 0.5);
  const RiseConfig cfg = SmallRise();
  const auto specs = GenerateMaskSpecs(cfg);
  const SaliencyMap s = RiseWithMasks(img, ConstantDetector(0.7), specs, cfg);
  SaliencyMap sum(32, 32);
  for (const MaskSpec& m : specs) {
    const Matrix up = BilinearUpsample(m.grid, 32, 32, m.offset);
    for (std::size_t i = 0; i < up.data.size(); ++i) sum.values[i] += up.data[i];
  }
  const SaliencyMap a = NormalizeMap(s);
  const SaliencyMap b = NormalizeMap(sum);
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    CHECK(std::abs(a.values[i] - b.values[i]) <= 1e-6);
  }
  CHECK(s.method == "rise");
}

TEST_CASE("rise with one all-ones mask is the score over keep_prob") {
  const Image img = Image::Filled(16, 16, 0.5);
  const std::vector<MaskSpec> one = {{Matrix(8, 8, 1.0), {0.3, 0.6}}};
  const SaliencyMap s = RiseWithMasks(img, ConstantDetector(0.8), one, RiseConfig{});
  for (double v : s.values) CHECK(v == doctest::Approx(0.8 / 0.5).epsilon(1e-15));
}

TEST_CASE("rise weights enter linearly") {
  const Image img = GenerateScene(64, 64, 1, 2).image;
  const RiseConfig cfg = SmallRise();
  const auto specs = GenerateMaskSpecs(cfg);
  auto make = [](double k) {
    return FakeDetector([k](const Image& m) {
      return std::vector<Detection>{{{0, 0, 8, 8}, k * m.Mean(), Stage::kFinal}};
    });
  };
  const SaliencyMap a = RiseWithMasks(img, make(0.25), specs, cfg);
  const SaliencyMap b = RiseWithMasks(img, make(0.5), specs, cfg);
  for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(b.values[i] == 2.0 * a.values[i]);

  std::vector<double> w(specs.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.01 * static_cast<double>(i % 7);
  std::vector<double> w2(w);
  for (double& v : w2) v *= 2.0;
  const SaliencyMap c = WeightedMaskSum(specs, w, 20, 20, 3.0);
  const SaliencyMap d = WeightedMaskSum(specs, w2, 20, 20, 3.0);
  for (std::size_t i = 0; i < c.values.size(); ++i) CHECK(d.values[i] == 2.0 * c.values[i]);
}

TEST_CASE("rise localizes the seed-42 nodule with the mini CNN") {
  const MiniCnn net;
  const SyntheticScene s = GenerateScene(128, 128, 1, 42);
  RiseConfig cfg;
  cfg.seed = 42;
  const SaliencyMap m = Rise(s.image, net, cfg);
  ValidateSaliency(m);
  CHECK(InBox(ArgmaxPixel(m), s.ground_truth[0]));
}

TEST_CASE("d-rise without detections is all zero") {
  const Image img = Image::Filled(32, 32, 0.5);
  const FakeDetector none([](const Image&) { return std::vector<Detection>{}; });
  const SaliencyMap m = DRise(img, none, {{2, 2, 10, 10}, 0.9, Stage::kFinal}, SmallRise());
  for (double v : m.values) CHECK(v == 0.0);
  CHECK(m.target_box == BBox{2, 2, 10, 10});
  CHECK(m.method == "drise");
}

TEST_CASE("d-rise of a coinciding box reduces to rise") {
  const Image img = GenerateScene(64, 64, 1, 8).image;
  const BBox box{5, 6, 30, 40};
  const FakeDetector det([&](const Image& m) {
    return std::vector<Detection>{{box, std::min(1.0, 2.0 * m.Mean()), Stage::kFinal}};
  });
  const RiseConfig cfg = SmallRise();
  const auto specs = GenerateMaskSpecs(cfg);
  const SaliencyMap r = RiseWithMasks(img, det, specs, cfg);
  const SaliencyMap d = DRiseWithMasks(img, det, {box, 1.0, Stage::kFinal}, specs, cfg);
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    CHECK(d.values[i] == doctest::Approx(r.values[i]).epsilon(1e-6));
  }
}

TEST_CASE("d-rise weights never exceed one") {
  const MiniCnn net;
  const SyntheticScene s = GenerateScene(128, 128, 1, 42);
  const auto dets = net.Detect(s.image);
  REQUIRE_FALSE(dets.empty());
  double largest = 0.0;
  const DetectionSimilarity spy = [&](const Detection& t, const Detection& c) {
    const double v = IouTimesScore(t, c);
    largest = std::max(largest, v);
    return v;
  };
  DRise(s.image, net, dets[0], SmallRise(), spy);
  CHECK(largest > 0.0);
  CHECK(largest <= 1.0);
}

TEST_CASE("d-rise of the left detection concentrates on the left nodule") {
  const MiniCnn net;
  // First seed whose two-nodule scene has both nodules detected.
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const SyntheticScene s = GenerateScene(128, 128, 2, seed);
    const auto dets = net.Detect(s.image);
    std::vector<int> match(2, -1);
    for (int g = 0; g < 2; ++g) {
      for (std::size_t d = 0; d < dets.size(); ++d) {
        if (match[g] < 0 && Iou(dets[d].box, s.ground_truth[g]) >= 0.5) {
          match[g] = static_cast<int>(d);
        }
      }
    }
    if (match[0] < 0 || match[1] < 0) continue;
    const int left = s.ground_truth[0].x1 <= s.ground_truth[1].x1 ? 0 : 1;
    RiseConfig cfg;
    cfg.seed = seed;
    const SaliencyMap m = DRise(s.image, net, dets[match[left]], cfg);
    const BBox& lb = s.ground_truth[left];
    const BBox& rb = s.ground_truth[1 - left];
    CHECK(MassIn(m, lb) / static_cast<double>(lb.area()) >
          MassIn(m, rb) / static_cast<double>(rb.area()));
    return;
  }
  FAIL("no two-nodule scene with both nodules detected");
}

TEST_CASE("perturbation output is independent of the worker count") {
  const MiniCnn net;
  const SyntheticScene s = GenerateScene(128, 128, 1, 42);
  RiseConfig one = SmallRise(40);
  RiseConfig many = one;
  many.workers = 4;
  CHECK(Rise(s.image, net, one).values == Rise(s.image, net, many).values);
  const Detection target = net.Detect(s.image).at(0);
  CHECK(DRise(s.image, net, target, one).values == DRise(s.image, net, target, many).values);
  LimeConfig l1;
  l1.n_samples = 60;
  LimeConfig l4 = l1;
  l4.workers = 4;
  const LimeResult a = Lime(s.image, net, l1);
  const LimeResult b = Lime(s.image, net, l4);
  CHECK(a.model.weights == b.model.weights);
  CHECK(a.map.values == b.map.values);
}

TEST_CASE("slic on a constant image returns the initial grid partition") {
  const Image img = Image::Filled(128, 128, 0.4);
  const Superpixels sp = Slic(img, 16, 10.0, 10);
  CHECK(sp.k == 16);
  std::vector<int> grid(128 * 128);
  for (int y = 0; y < 128; ++y) {
    for (int x = 0; x < 128; ++x) grid[y * 128 + x] = (y / 32) * 4 + x / 32;
  }
  CHECK(SamePartition(sp.labels, grid));
}

TEST_CASE("slic splits two homogeneous halves at the edge") {
  std::vector<double> v(128 * 128);
  const int edge = 50;
  for (int y = 0; y < 128; ++y) {
    for (int x = 0; x < 128; ++x) v[y * 128 + x] = x < edge ? 0.2 : 0.8;
  }
  const Superpixels sp = Slic(Image(128, 128, v), 2, 10.0, 10);
  REQUIRE(sp.k == 2);
  for (int y = 0; y < 128; ++y) {
    int boundary = -1;
    for (int x = 1; x < 128; ++x) {
      if (sp.at(y, x) != sp.at(y, x - 1)) {
        CHECK(boundary < 0);
        boundary = x;
      }
    }
    CHECK(std::abs(boundary - edge) <= 1);
  }
}

TEST_CASE("slic labels form a contiguous partition of 4-connected segments") {
  for (const std::uint64_t seed : {1u, 2u, 3u}) {
    const Image img = GenerateScene(128, 128, 2, seed).image;
    const Superpixels sp = Slic(img, 40, 10.0, 10);
    REQUIRE(sp.labels.size() == 128u * 128u);
    CHECK(sp.k >= 2);
    std::vector<int> count(sp.k, 0);
    for (int l : sp.labels) {
      REQUIRE(l >= 0);
      REQUIRE(l < sp.k);
      ++count[l];
    }
    for (int l = 0; l < sp.k; ++l) {
      CHECK(count[l] > 0);
      CHECK(FourConnected(sp, l));
    }
  }
}

TEST_CASE("slic rejects out-of-range segment counts") {
  const Image img = Image::Filled(64, 64, 0.5);
  CHECK_THROWS_AS(Slic(img, 1, 10.0, 10), Error);
  CHECK_THROWS_AS(Slic(img, 64 * 64 / 16 + 1, 10.0, 10), Error);
  CHECK_NOTHROW(Slic(img, 64 * 64 / 16, 10.0, 10));
}

TEST_CASE("lasso solutions satisfy the subgradient optimality conditions") {
  Rng rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    LassoProblem p;
    const int n = 80, k = 12;
    p.x = Matrix(n, k);
    p.y.resize(n);
    p.sample_weights.resize(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < k; ++j) p.x(i, j) = rng.Bernoulli(0.5) ? 1.0 : 0.0;
      p.y[i] = 0.3 * p.x(i, 2) - 0.2 * p.x(i, 7) + 0.05 * (rng.Uniform() - 0.5);
      p.sample_weights[i] = 0.1 + rng.Uniform();
    }
    Matrix xs;
    std::vector<double> ys;
    LassoDesign(p, &xs, &ys);
    for (const double lambda : {0.01, 0.1, 0.5, 2.0}) {
      const SurrogateModel m = FitLasso(p, lambda);
      for (int j = 0; j < k; ++j) {
        double g = 0.0;
        for (int i = 0; i < n; ++i) {
          double r = ys[i];
          for (int q = 0; q < k; ++q) r -= xs(i, q) * m.weights[q];
          g += xs(i, j) * r;
        }
        if (m.weights[j] == 0.0) {
          CHECK(std::abs(g) <= lambda + 1e-9);
          CHECK(m.selected.count(j) == 0);
        } else {
          CHECK(g == doctest::Approx(lambda * (m.weights[j] > 0 ? 1.0 : -1.0)).epsilon(1e-6));
          CHECK(m.selected.count(j) == 1);
        }
      }
    }
  }
}

TEST_CASE("feature cap selects at most k weights") {
  Rng rng(5);
  LassoProblem p;
  const int n = 200, k = 20;
  p.x = Matrix(n, k);
  p.y.resize(n);
  p.sample_weights.assign(n, 1.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) p.x(i, j) = rng.Bernoulli(0.5) ? 1.0 : 0.0;
    for (int j = 0; j < k; ++j) p.y[i] += 0.01 * (j + 1) * p.x(i, j);
  }
  for (const int cap : {1, 3, 5, 20}) {
    const SurrogateModel m = FitLassoMaxFeatures(p, cap);
    int nonzero = 0;
    for (int j = 0; j < k; ++j) {
      if (m.weights[j] != 0.0) ++nonzero;
      CHECK((m.weights[j] != 0.0) == (m.selected.count(j) == 1));
    }
    CHECK(nonzero <= cap);
    CHECK(nonzero >= 1);
  }
  CHECK_THROWS_AS(FitLassoMaxFeatures(p, 0), Error);
}

TEST_CASE("lime recovers a planted segment") {
  const Image img = GenerateScene(128, 128, 1, 42).image;
  const Superpixels sp = Slic(img, 40, 10.0, 10);
  const double mean = img.Mean();
  const int planted = 3;
  long planted_pixels = 0;
  for (int l : sp.labels) planted_pixels += l == planted;
  // Score = fraction of segment 3 still showing its original intensities.
  const FakeDetector det(nullptr, [&](const Image& m) {
    long same = 0;
    for (std::size_t i = 0; i < sp.labels.size(); ++i) {
      if (sp.labels[i] == planted && m.values()[i] == img.values()[i] &&
          img.values()[i] != mean) {
        ++same;
      }
    }
    return static_cast<double>(same) / planted_pixels;
  });
  LimeConfig cfg;
  cfg.n_samples = 200;
  cfg.seed = 1;
  const LimeResult r = LimeWithSegments(img, det, sp, cfg);
  CHECK_FALSE(r.degenerate);
  const auto top = std::max_element(r.model.weights.begin(), r.model.weights.end()) -
                   r.model.weights.begin();
  CHECK(top == planted);
  CHECK(r.model.weights[planted] > 0.0);

  // The all-ones sample is the unoccluded image; its prediction is close to
  // the true score.
  double predicted = r.model.intercept;
  for (double w : r.model.weights) predicted += w;
  CHECK(std::abs(predicted - det.ImageScore(img)) <= 0.05);

  cfg.k_features = 1;
  const LimeResult one = LimeWithSegments(img, det, sp, cfg);
  CHECK(one.model.selected.size() <= 1);
  CHECK(std::count_if(one.model.weights.begin(), one.model.weights.end(),
                      [](double w) { return w != 0.0; }) <= 1);
  for (std::size_t p = 0; p < one.map.values.size(); ++p) {
    CHECK(one.map.values[p] == std::max(0.0, one.model.weights[sp.labels[p]]));
  }
}

TEST_CASE("lime with constant labels is degenerate with a zero surrogate") {
  const Image img = GenerateScene(128, 128, 0, 1).image;
  const FakeDetector det(nullptr, [](const Image&) { return 0.4; });
  LimeConfig cfg;
  cfg.n_samples = 50;
  const LimeResult r = Lime(img, det, cfg);
  CHECK(r.degenerate);
  for (double w : r.model.weights) CHECK(w == 0.0);
  for (double v : r.map.values) CHECK(v == 0.0);
}

TEST_CASE("lime validates its sampling budget") {
  const Image img = Image::Filled(64, 64, 0.5);
  const FakeDetector det(nullptr, [](const Image&) { return 0.4; });
  LimeConfig cfg;
  cfg.n_samples = 49;
  CHECK_THROWS_AS(Lime(img, det, cfg), Error);
  cfg.n_samples = 50;
  cfg.kernel_width = 0.0;
  CHECK_THROWS_AS(Lime(img, det, cfg), Error);
}
