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

#ifndef DETXPLAIN_DETECTORS_HPP_
#define DETXPLAIN_DETECTORS_HPP_

// Two-stage detector contracts and the two shipped detectors:
//   SyntheticDetector  black-box, features are raw 4x4 cell means.
//   MiniCnn            white-box CNN with hand-written forward/backward.
//
// Both share the same heads. Stage 1 scores a dense anchor pool by the mean
// per-cell objectness inside each anchor and keeps the top proposal_count
// anchors (unsuppressed, unthresholded). Stage 2 rescores each proposal from
// mean-pooled features inside the box and in a thin context ring around it,
// then final detections are thresholded and greedily suppressed.

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "detxplain/imaging.hpp"

namespace detxplain {

struct Tensor3 {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(int c, int h, int w)
      : channels(c), height(h), width(w),
        data(static_cast<std::size_t>(c) * h * w, 0.0) {}

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  double& at(int c, int y, int x) {
    return data[c * plane() + static_cast<std::size_t>(y) * width + x];
  }
  double at(int c, int y, int x) const {
    return data[c * plane() + static_cast<std::size_t>(y) * width + x];
  }
  bool SameShape(const Tensor3& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
};

struct DetectorConfig {
  int input_height = 128;
  int input_width = 128;
  int stride = 4;  // feature cell size in pixels
  std::vector<int> anchor_scales = {20, 28, 36};
  std::vector<double> anchor_ratios = {1.0, 2.0};  // width / height
  double score_threshold = 0.5;
  double nms_iou = 0.5;
  int proposal_count = 300;
};

// Key-value text: `key = value` per line, '#' starts a comment. Keys:
// input_height, input_width, anchor_scales (comma list), anchor_ratios,
// score_threshold, nms_iou, proposal_count. Throws kConfig.
DetectorConfig ParseDetectorConfig(const std::string& text);
DetectorConfig LoadDetectorConfig(const std::filesystem::path& path);

enum class Stage { kProposal, kFinal };

struct Detection {
  BBox box;
  double score = 0.0;
  Stage stage = Stage::kProposal;
};

struct ProposalSet {
  std::vector<Detection> proposals;
  int count() const { return static_cast<int>(proposals.size()); }
};

// Anchor pool in deterministic order (scale, ratio, row, column), clipped to
// the image, duplicates removed. Edges are multiples of the stride.
std::vector<BBox> BuildAnchors(const DetectorConfig& config);

// Greedy NMS: candidates sorted by descending score (stable), a candidate is
// dropped when its IoU with an already kept box exceeds iou_threshold.
std::vector<Detection> NonMaxSuppression(std::vector<Detection> candidates,
                                         double iou_threshold);

// Parameters of the shared heads. All per-channel vectors have one entry per
// feature channel.
struct HeadWeights {
  std::vector<double> objectness;  // 1x1 conv
  double objectness_gain = 12.0;
  double objectness_offset = 0.5;
  std::vector<double> inner;    // stage-2 weights on in-box means
  std::vector<double> context;  // stage-2 weights on context-ring means
  double score_gain = 10.0;
  // Stage-2 score = sigmoid(score_gain * (logit - score_offset)). The offset
  // belongs to the output nonlinearity; the dense layer itself has no bias.
  double score_offset = 0.2;
  int context_margin = 4;  // ring width in pixels, multiple of the stride
};

// Everything the heads compute for one feature map.
struct HeadOutputs {
  Matrix objectness;                 // per cell, after the sigmoid
  std::vector<int> anchor_index;     // selected anchors, best first
  ProposalSet proposals;             // stage-1 scores
  std::vector<double> logits;        // stage-2 dense output per proposal
  std::vector<double> scores;        // stage-2 objectness per proposal
  int best = -1;                     // argmax of scores (first on ties)
};

// Cell ranges (in feature coordinates) pooled by stage 2 for one box.
struct PoolRegion {
  BBox inner;     // box in cells
  BBox expanded;  // box plus context margin, clipped
  int inner_cells = 0;
  int ring_cells = 0;
};
PoolRegion StagePoolRegion(const BBox& box, int stride, int margin,
                           int feat_h, int feat_w);

class MiniCnn;

class Detector {
 public:
  virtual ~Detector() = default;

  virtual std::string name() const = 0;
  virtual const DetectorConfig& config() const = 0;

  // Stage-1 output; throws kInvalidArgument on input size mismatch.
  virtual ProposalSet Propose(const Image& image) const = 0;
  // Final detections (stage=final), best first, possibly empty.
  virtual std::vector<Detection> Detect(const Image& image) const = 0;
  // Image-level confidence: maximum stage-2 objectness over the proposals.
  virtual double ImageScore(const Image& image) const = 0;

  // Non-null for detectors that expose gradients.
  virtual const MiniCnn* white_box() const { return nullptr; }
};

// Shared implementation over a feature extractor.
class TwoStageDetector : public Detector {
 public:
  TwoStageDetector(DetectorConfig config, HeadWeights head);

  const DetectorConfig& config() const override { return config_; }
  const HeadWeights& head() const { return head_; }
  const std::vector<BBox>& anchors() const { return anchors_; }

  ProposalSet Propose(const Image& image) const override;
  std::vector<Detection> Detect(const Image& image) const override;
  double ImageScore(const Image& image) const override;

  // Features at stride resolution (channels x H/stride x W/stride).
  virtual Tensor3 Features(const Image& image) const = 0;
  HeadOutputs RunHeads(const Tensor3& features) const;
  std::vector<Detection> Finalize(const HeadOutputs& heads) const;

 protected:
  void CheckInput(const Image& image) const;

 private:
  DetectorConfig config_;
  HeadWeights head_;
  std::vector<BBox> anchors_;
};

// Gradient-free detector working directly on cell-mean intensity.
class SyntheticDetector : public TwoStageDetector {
 public:
  explicit SyntheticDetector(DetectorConfig config = {},
                             HeadWeights head = DefaultHead());
  static HeadWeights DefaultHead();
  std::string name() const override { return "synthetic"; }
  Tensor3 Features(const Image& image) const override;
};

// Recorded forward pass. Layers, in order: input, conv1, relu1, pool1,
// conv2, relu2, pool2. Gradients are filled by MiniCnn::Backward.
struct TraceLayer {
  std::string name;
  Tensor3 activation;
  Tensor3 gradient;  // empty until backward
};

struct WhiteBoxTrace {
  std::vector<TraceLayer> layers;
  HeadOutputs heads;
  double score = 0.0;        // value of the selected target
  int target_proposal = -1;  // proposal the target reads from

  const TraceLayer& layer(const std::string& name) const;
  TraceLayer& layer(const std::string& name);
  bool has_gradients() const;
};

// Scalar output to explain.
struct TargetSelector {
  enum class Kind { kMaxScore, kProposal };
  Kind kind = Kind::kMaxScore;
  int proposal = 0;

  static TargetSelector MaxScore() { return {}; }
  static TargetSelector Proposal(int index) {
    return {Kind::kProposal, index};
  }
};

struct MiniCnnWeights {
  static constexpr int kConv1Channels = 8;
  static constexpr int kConv2Channels = 16;
  std::vector<double> conv1;  // [8][1][3][3]
  std::vector<double> conv2;  // [16][8][3][3]
  HeadWeights head;

  // Hand-constructed filters: smoothing, centre-surround (difference of
  // Gaussians) and oriented edge detectors, all bias-free.
  static MiniCnnWeights Default();
};

// input HxWx1 -> conv3x3x8 + ReLU -> maxpool2 -> conv3x3x16 + ReLU ->
// maxpool2 -> heads. No biases anywhere.
class MiniCnn : public TwoStageDetector {
 public:
  explicit MiniCnn(DetectorConfig config = {},
                   MiniCnnWeights weights = MiniCnnWeights::Default());

  std::string name() const override { return "minicnn"; }
  const MiniCnn* white_box() const override { return this; }
  const MiniCnnWeights& weights() const { return weights_; }

  Tensor3 Features(const Image& image) const override;

  // Forward pass recording every layer; the target is the max stage-2 score
  // unless a proposal is selected. Throws kInvalidArgument for an unknown
  // selector.
  WhiteBoxTrace Forward(const Image& image,
                        TargetSelector target = TargetSelector::MaxScore()) const;
  // Reverse-mode gradients of trace.score w.r.t. every layer.
  void Backward(WhiteBoxTrace* trace) const;

  // Gradient of the target's stage-2 score w.r.t. the pool2 features.
  Tensor3 HeadGradient(const WhiteBoxTrace& trace) const;

 private:
  MiniCnnWeights weights_;
};

std::unique_ptr<Detector> MakeDetector(const std::string& kind,
                                       const DetectorConfig& config = {});

// 3x3 stride-1 convolution, borders padded by edge replication; weights
// [out][in][3][3].
Tensor3 Conv3x3(const Tensor3& input, std::span<const double> weights,
                int out_channels);
// Gradient w.r.t. the input of Conv3x3; gradient reaching a padded position
// is added to the edge pixel it replicates.
Tensor3 Conv3x3Backward(const Tensor3& input, const Tensor3& grad_out,
                        std::span<const double> weights);
Tensor3 MaxPool2(const Tensor3& input);
// Routes each pooled value back to the first maximum of its window.
Tensor3 MaxPool2Backward(const Tensor3& input, const Tensor3& pooled_grad);

double Sigmoid(double z);

}  // namespace detxplain

#endif  // DETXPLAIN_DETECTORS_HPP_
