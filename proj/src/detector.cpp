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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "detxplain/detectors.hpp"
#include "detxplain/error.hpp"
#include "detxplain/io.hpp"

namespace detxplain {
namespace {

std::vector<std::string> SplitList(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double ParseNumber(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    Fail(ErrorCode::kConfig, "detector config: bad number for " + key);
  }
}

// Summed-area table with one row/column of zero padding.
struct Integral {
  int rows = 0;
  int cols = 0;
  std::vector<double> s;

  Integral(const double* data, int r, int c)
      : rows(r), cols(c), s(static_cast<std::size_t>(r + 1) * (c + 1), 0.0) {
    for (int y = 0; y < r; ++y) {
      double run = 0.0;
      for (int x = 0; x < c; ++x) {
        run += data[static_cast<std::size_t>(y) * c + x];
        s[static_cast<std::size_t>(y + 1) * (c + 1) + x + 1] =
            s[static_cast<std::size_t>(y) * (c + 1) + x + 1] + run;
      }
    }
  }
  double Sum(const BBox& b) const {
    auto at = [&](int y, int x) {
      return s[static_cast<std::size_t>(y) * (cols + 1) + x];
    };
    return at(b.y2, b.x2) - at(b.y1, b.x2) - at(b.y2, b.x1) + at(b.y1, b.x1);
  }
};

}  // namespace

double Sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

DetectorConfig ParseDetectorConfig(const std::string& text) {
  DetectorConfig cfg;
  for (const auto& [key, value] : ParseKeyValueText(text)) {
    if (key == "input_height") {
      cfg.input_height = static_cast<int>(ParseNumber(key, value));
    } else if (key == "input_width") {
      cfg.input_width = static_cast<int>(ParseNumber(key, value));
    } else if (key == "anchor_scales") {
      cfg.anchor_scales.clear();
      for (const auto& s : SplitList(value)) {
        cfg.anchor_scales.push_back(static_cast<int>(ParseNumber(key, s)));
      }
    } else if (key == "anchor_ratios") {
      cfg.anchor_ratios.clear();
      for (const auto& s : SplitList(value)) {
        cfg.anchor_ratios.push_back(ParseNumber(key, s));
      }
    } else if (key == "score_threshold") {
      cfg.score_threshold = ParseNumber(key, value);
    } else if (key == "nms_iou") {
      cfg.nms_iou = ParseNumber(key, value);
    } else if (key == "proposal_count") {
      cfg.proposal_count = static_cast<int>(ParseNumber(key, value));
    } else {
      Fail(ErrorCode::kConfig, "detector config: unknown key " + key);
    }
  }
  if (cfg.input_height <= 0 || cfg.input_width <= 0 ||
      cfg.input_height % (2 * cfg.stride) != 0 ||
      cfg.input_width % (2 * cfg.stride) != 0) {
    Fail(ErrorCode::kConfig, "detector config: input size must be a positive "
                             "multiple of 8");
  }
  if (cfg.anchor_scales.empty() || cfg.anchor_ratios.empty() ||
      cfg.proposal_count <= 0) {
    Fail(ErrorCode::kConfig, "detector config: empty anchor set");
  }
  return cfg;
}

DetectorConfig LoadDetectorConfig(const std::filesystem::path& path) {
  const auto bytes = ReadFileBytes(path);
  return ParseDetectorConfig(std::string(bytes.begin(), bytes.end()));
}

std::vector<BBox> BuildAnchors(const DetectorConfig& config) {
  const int stride = config.stride;
  auto snap = [stride](double v) {
    return std::max(stride, static_cast<int>(std::lround(v / stride)) * stride);
  };
  std::vector<BBox> anchors;
  std::set<std::tuple<int, int, int, int>> seen;
  for (int scale : config.anchor_scales) {
    for (double ratio : config.anchor_ratios) {
      // Sizes are multiples of the stride, so with centres congruent to the
      // half-extent every edge lands on the stride lattice.
      const int w = snap(scale * std::sqrt(ratio));
      const int h = snap(scale / std::sqrt(ratio));
      const int hw = w / 2;
      const int hh = h / 2;
      for (int cy = hh % stride; cy <= config.input_height; cy += stride) {
        for (int cx = hw % stride; cx <= config.input_width; cx += stride) {
          BBox b{std::max(0, cx - hw), std::max(0, cy - hh),
                 std::min(config.input_width, cx + (w - hw)),
                 std::min(config.input_height, cy + (h - hh))};
          if (b.width() < stride || b.height() < stride) continue;
          if (!seen.insert({b.x1, b.y1, b.x2, b.y2}).second) continue;
          anchors.push_back(b);
        }
      }
    }
  }
  return anchors;
}

std::vector<Detection> NonMaxSuppression(std::vector<Detection> candidates,
                                         double iou_threshold) {
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Detection& a, const Detection& b) {
                     return a.score > b.score;
                   });
  std::vector<Detection> kept;
  for (const auto& c : candidates) {
    const bool suppressed =
        std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
          return Iou(k.box, c.box) > iou_threshold;
        });
    if (!suppressed) kept.push_back(c);
  }
  return kept;
}

PoolRegion StagePoolRegion(const BBox& box, int stride, int margin, int feat_h,
                           int feat_w) {
  PoolRegion r;
  r.inner = {box.x1 / stride, box.y1 / stride, (box.x2 + stride - 1) / stride,
             (box.y2 + stride - 1) / stride};
  const int m = margin / stride;
  r.expanded = {std::max(0, r.inner.x1 - m), std::max(0, r.inner.y1 - m),
                std::min(feat_w, r.inner.x2 + m),
                std::min(feat_h, r.inner.y2 + m)};
  r.inner_cells = static_cast<int>(r.inner.area());
  r.ring_cells = static_cast<int>(r.expanded.area()) - r.inner_cells;
  return r;
}

TwoStageDetector::TwoStageDetector(DetectorConfig config, HeadWeights head)
    : config_(std::move(config)),
      head_(std::move(head)),
      anchors_(BuildAnchors(config_)) {
  if (head_.inner.size() != head_.objectness.size() ||
      head_.context.size() != head_.objectness.size()) {
    Fail(ErrorCode::kInvalidArgument, "head weights: channel count mismatch");
  }
  if (static_cast<int>(anchors_.size()) < config_.proposal_count) {
    Fail(ErrorCode::kConfig, "anchor pool smaller than proposal_count");
  }
}

void TwoStageDetector::CheckInput(const Image& image) const {
  if (image.height() != config_.input_height ||
      image.width() != config_.input_width) {
    Fail(ErrorCode::kInvalidArgument,
         "detector expects " + std::to_string(config_.input_height) + "x" +
             std::to_string(config_.input_width) + " input, got " +
             std::to_string(image.height()) + "x" +
             std::to_string(image.width()));
  }
}

HeadOutputs TwoStageDetector::RunHeads(const Tensor3& f) const {
  const int channels = static_cast<int>(head_.objectness.size());
  if (f.channels != channels) {
    Fail(ErrorCode::kInvalidArgument, "feature channels do not match head");
  }
  const int fh = f.height;
  const int fw = f.width;
  const int stride = config_.stride;
  HeadOutputs out;

  // Stage 1: 1x1 conv + sigmoid per cell.
  out.objectness = Matrix(fh, fw);
  for (int y = 0; y < fh; ++y) {
    for (int x = 0; x < fw; ++x) {
      double o = 0.0;
      for (int c = 0; c < channels; ++c) o += head_.objectness[c] * f.at(c, y, x);
      out.objectness(y, x) =
          Sigmoid(head_.objectness_gain * (o - head_.objectness_offset));
    }
  }
  const Integral obj(out.objectness.data.data(), fh, fw);
  std::vector<double> anchor_score(anchors_.size());
  for (std::size_t i = 0; i < anchors_.size(); ++i) {
    const BBox& a = anchors_[i];
    const BBox cells{a.x1 / stride, a.y1 / stride, a.x2 / stride, a.y2 / stride};
    anchor_score[i] = obj.Sum(cells) / static_cast<double>(cells.area());
  }
  std::vector<int> order(anchors_.size());
  std::iota(order.begin(), order.end(), 0);
  const int k = config_.proposal_count;
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&](int a, int b) {
                      if (anchor_score[a] != anchor_score[b]) {
                        return anchor_score[a] > anchor_score[b];
                      }
                      return a < b;
                    });
  order.resize(k);
  out.anchor_index = order;

  // Stage 2: mean-pooled in-box and context features -> dense -> sigmoid.
  std::vector<Integral> planes;
  planes.reserve(channels);
  for (int c = 0; c < channels; ++c) {
    planes.emplace_back(&f.data[c * f.plane()], fh, fw);
  }
  out.proposals.proposals.reserve(k);
  out.logits.resize(k);
  out.scores.resize(k);
  double best = -1.0;
  for (int p = 0; p < k; ++p) {
    const BBox& box = anchors_[order[p]];
    out.proposals.proposals.push_back({box, anchor_score[order[p]], Stage::kProposal});
    const PoolRegion r =
        StagePoolRegion(box, stride, head_.context_margin, fh, fw);
    double z = 0.0;
    for (int c = 0; c < channels; ++c) {
      const double in_sum = planes[c].Sum(r.inner);
      z += head_.inner[c] * in_sum / r.inner_cells;
      if (r.ring_cells > 0) {
        const double ring_sum = planes[c].Sum(r.expanded) - in_sum;
        z += head_.context[c] * ring_sum / r.ring_cells;
      }
    }
    out.logits[p] = z;
    out.scores[p] = Sigmoid(head_.score_gain * (z - head_.score_offset));
    if (out.scores[p] > best) {
      best = out.scores[p];
      out.best = p;
    }
  }
  return out;
}

std::vector<Detection> TwoStageDetector::Finalize(const HeadOutputs& heads) const {
  std::vector<Detection> candidates;
  for (std::size_t p = 0; p < heads.scores.size(); ++p) {
    if (heads.scores[p] >= config_.score_threshold) {
      candidates.push_back(
          {heads.proposals.proposals[p].box, heads.scores[p], Stage::kFinal});
    }
  }
  return NonMaxSuppression(std::move(candidates), config_.nms_iou);
}

ProposalSet TwoStageDetector::Propose(const Image& image) const {
  CheckInput(image);
  return RunHeads(Features(image)).proposals;
}

std::vector<Detection> TwoStageDetector::Detect(const Image& image) const {
  CheckInput(image);
  return Finalize(RunHeads(Features(image)));
}

double TwoStageDetector::ImageScore(const Image& image) const {
  CheckInput(image);
  const HeadOutputs heads = RunHeads(Features(image));
  return heads.scores[heads.best];
}

HeadWeights SyntheticDetector::DefaultHead() {
  HeadWeights h;
  h.objectness = {1.0};
  h.objectness_gain = 12.0;
  h.objectness_offset = 0.5;
  h.inner = {1.0};
  h.context = {-0.9};
  h.score_gain = 10.0;
  h.score_offset = 0.2;
  h.context_margin = 4;
  return h;
}

SyntheticDetector::SyntheticDetector(DetectorConfig config, HeadWeights head)
    : TwoStageDetector(std::move(config), std::move(head)) {
  if (this->head().objectness.size() != 1 || this->head().inner.size() != 1 ||
      this->head().context.size() != 1) {
    Fail(ErrorCode::kInvalidArgument, "synthetic detector has one feature channel");
  }
}

Tensor3 SyntheticDetector::Features(const Image& image) const {
  CheckInput(image);
  const int s = config().stride;
  Tensor3 f(1, image.height() / s, image.width() / s);
  const double inv = 1.0 / (s * s);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      f.at(0, y / s, x / s) += image.at(y, x) * inv;
    }
  }
  return f;
}

std::unique_ptr<Detector> MakeDetector(const std::string& kind,
                                       const DetectorConfig& config) {
  if (kind == "synthetic") return std::make_unique<SyntheticDetector>(config);
  if (kind == "minicnn") return std::make_unique<MiniCnn>(config);
  Fail(ErrorCode::kConfig, "unknown detector: " + kind);
}

}  // namespace detxplain
