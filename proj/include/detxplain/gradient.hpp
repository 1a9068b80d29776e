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

#ifndef DETXPLAIN_GRADIENT_HPP_
#define DETXPLAIN_GRADIENT_HPP_

// White-box explainers over MiniCnn traces: Grad-CAM, Grad-CAM++, LRP-epsilon
// and Ada-SISE. All are deterministic.

#include <span>
#include <string>
#include <vector>

#include "detxplain/detectors.hpp"
#include "detxplain/imaging.hpp"

namespace detxplain {

enum class CamWeighting { kGradCam, kGradCamPlusPlus };

// Per-channel weights for a traced layer with gradients.
//   kGradCam:         spatial mean of the gradient.
//   kGradCamPlusPlus: sum over pixels of alpha * relu(gradient), with
//                     alpha = g^2 / (2 g^2 + sum(A) g^3), 0 where that is 0/0.
std::vector<double> CamChannelWeights(const TraceLayer& layer, CamWeighting kind);
// sum_c weight_c * A_c at layer resolution, before rectification.
Matrix ClassActivation(const TraceLayer& layer, std::span<const double> weights);
// ReLU of the class activation, bilinearly upsampled to out_h x out_w.
SaliencyMap CamFromLayer(const TraceLayer& layer, CamWeighting kind, int out_h,
                         int out_w);

// Explains the target using the last conv layer (relu2). Runs the full
// reverse pass.
SaliencyMap GradCam(const MiniCnn& model, const Image& image,
                    TargetSelector target = TargetSelector::MaxScore());
SaliencyMap GradCamPlusPlus(const MiniCnn& model, const Image& image,
                            TargetSelector target = TargetSelector::MaxScore());

struct LayerRelevance {
  std::string name;
  Tensor3 relevance;
};

struct RelevanceField {
  std::vector<LayerRelevance> layers;  // same names and shapes as the trace
  Matrix input;                        // H x W, signed
  double score = 0.0;                  // relevance placed at the output

  const LayerRelevance& layer(const std::string& name) const;
  double InputTotal() const;
};

// Epsilon rule for one dense layer z = W a (W is out x in):
//   R_j = sum_k a_j W_kj / (z_k + eps * sign(z_k)) * R_k, sign(0) = +1.
std::vector<double> LrpEpsilonDense(const Matrix& weights,
                                    std::span<const double> activations,
                                    std::span<const double> relevance_out,
                                    double epsilon);

// Relevance starts as the target score at the stage-2 output and flows
// through the dense head, winner-take-all max-pooling, pass-through ReLUs and
// the epsilon rule at both convolutions. Only non-zero relevance is visited.
RelevanceField LrpEpsilon(const MiniCnn& model, const Image& image,
                          TargetSelector target, double epsilon);
RelevanceField LrpFromTrace(const MiniCnn& model, const WhiteBoxTrace& trace,
                            double epsilon);
SaliencyMap RelevanceMap(const RelevanceField& field);

// Channel score, kept flag and normalized attribution mask of one channel.
struct LayerAttribution {
  std::string layer_name;
  std::vector<double> channel_scores;  // spatial mean gradient per channel
  std::vector<int> kept;               // channels that form masks
  std::vector<double> mask_weights;    // detector score per kept mask
  Matrix visualization;                // H x W weighted mask sum
};

struct AdaSiseConfig {
  std::vector<std::string> layers = {"relu1", "pool1", "relu2", "pool2"};
  bool otsu_gate = true;
};

struct AdaSiseResult {
  SaliencyMap map;
  std::vector<LayerAttribution> layers;
  bool degenerate = false;  // no channel with a positive score
};

// Channels with a positive score whose score exceeds the Otsu threshold of
// the positive scores (all positive channels when those are all equal).
std::vector<int> AdaSiseGate(std::span<const double> scores, bool otsu_gate);

// Per layer: gated channels become min-max normalized upsampled masks; each
// mask is weighted by the detector image score on image * mask; the layer
// visualization is the weighted mask sum. Fusion is the normalized sum of the
// normalized layer visualizations.
AdaSiseResult AdaSise(const MiniCnn& model, const Image& image,
                      TargetSelector target = TargetSelector::MaxScore(),
                      const AdaSiseConfig& cfg = {});

}  // namespace detxplain

#endif  // DETXPLAIN_GRADIENT_HPP_
