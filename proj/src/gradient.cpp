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

#include "detxplain/gradient.hpp"

#include <algorithm>
#include <cmath>

#include "detxplain/error.hpp"
#include "detxplain/logging.hpp"
#include "detxplain/perturbation.hpp"

namespace detxplain {

namespace {

constexpr char kCamLayer[] = "relu2";

Matrix Plane(const Tensor3& t, int c) {
  Matrix m(t.height, t.width);
  std::copy_n(&t.data[c * t.plane()], t.plane(), m.data.begin());
  return m;
}

Matrix Upsample(const Matrix& m, int out_h, int out_w) {
  if (m.rows == out_h && m.cols == out_w) return m;
  return BilinearUpsample(m, out_h, out_w);
}

double Stabilized(double z, double epsilon) {
  return z + (z >= 0.0 ? epsilon : -epsilon);
}

// Winner-take-all routing through a 2x2 max-pool: the first maximum in
// row-major window order receives everything.
Tensor3 RouteMaxPool(const Tensor3& input, const Tensor3& pooled_relevance) {
  return MaxPool2Backward(input, pooled_relevance);
}

// Epsilon rule through a bias-free 3x3 edge-replicated convolution. z is the
// convolution output, a its input; relevance of a padded position returns to
// the edge pixel it copies.
Tensor3 RouteConv(const Tensor3& a, const Tensor3& z,
                  const Tensor3& relevance_out, std::span<const double> weights,
                  double epsilon) {
  const int cin = a.channels;
  Tensor3 r(cin, a.height, a.width);
  for (int co = 0; co < z.channels; ++co) {
    for (int y = 0; y < z.height; ++y) {
      for (int x = 0; x < z.width; ++x) {
        const double rk = relevance_out.at(co, y, x);
        if (rk == 0.0) continue;
        const double q = rk / Stabilized(z.at(co, y, x), epsilon);
        for (int ci = 0; ci < cin; ++ci) {
          const double* k = &weights[(static_cast<std::size_t>(co) * cin + ci) * 9];
          for (int ky = 0; ky < 3; ++ky) {
            const int iy = std::clamp(y + ky - 1, 0, a.height - 1);
            for (int kx = 0; kx < 3; ++kx) {
              const int ix = std::clamp(x + kx - 1, 0, a.width - 1);
              if (k[ky * 3 + kx] == 0.0) continue;
              r.at(ci, iy, ix) += a.at(ci, iy, ix) * k[ky * 3 + kx] * q;
            }
          }
        }
      }
    }
  }
  return r;
}

}  // namespace

std::vector<double> CamChannelWeights(const TraceLayer& layer,
                                      CamWeighting kind) {
  const Tensor3& a = layer.activation;
  const Tensor3& g = layer.gradient;
  if (!g.SameShape(a)) {
    Fail(ErrorCode::kInvalidArgument,
         "layer " + layer.name + " has no gradient; run the backward pass");
  }
  std::vector<double> w(a.channels, 0.0);
  const std::size_t plane = a.plane();
  for (int c = 0; c < a.channels; ++c) {
    const double* gc = &g.data[c * plane];
    const double* ac = &a.data[c * plane];
    if (kind == CamWeighting::kGradCam) {
      double sum = 0.0;
      for (std::size_t i = 0; i < plane; ++i) sum += gc[i];
      w[c] = sum / static_cast<double>(plane);
      continue;
    }
    double act_sum = 0.0;
    for (std::size_t i = 0; i < plane; ++i) act_sum += ac[i];
    double sum = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      const double g2 = gc[i] * gc[i];
      const double denom = 2.0 * g2 + act_sum * g2 * gc[i];
      if (denom == 0.0 || gc[i] <= 0.0) continue;
      sum += (g2 / denom) * gc[i];
    }
    w[c] = sum;
  }
  return w;
}

Matrix ClassActivation(const TraceLayer& layer, std::span<const double> weights) {
  const Tensor3& a = layer.activation;
  if (static_cast<int>(weights.size()) != a.channels) {
    Fail(ErrorCode::kInvalidArgument, "one weight per channel is required");
  }
  Matrix m(a.height, a.width);
  for (int c = 0; c < a.channels; ++c) {
    if (weights[c] == 0.0) continue;
    const double* ac = &a.data[c * a.plane()];
    for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] += weights[c] * ac[i];
  }
  return m;
}

SaliencyMap CamFromLayer(const TraceLayer& layer, CamWeighting kind, int out_h,
                         int out_w) {
  Matrix cam = ClassActivation(layer, CamChannelWeights(layer, kind));
  for (double& v : cam.data) v = std::max(v, 0.0);
  const Matrix up = Upsample(cam, out_h, out_w);
  SaliencyMap map(out_h, out_w,
                  kind == CamWeighting::kGradCam ? "gradcam" : "gradcampp");
  map.values = up.data;
  return map;
}

namespace {

SaliencyMap RunCam(const MiniCnn& model, const Image& image,
                   TargetSelector target, CamWeighting kind) {
  WhiteBoxTrace trace = model.Forward(image, target);
  model.Backward(&trace);
  return CamFromLayer(trace.layer(kCamLayer), kind, image.height(),
                      image.width());
}

}  // namespace

SaliencyMap GradCam(const MiniCnn& model, const Image& image,
                    TargetSelector target) {
  return RunCam(model, image, target, CamWeighting::kGradCam);
}

SaliencyMap GradCamPlusPlus(const MiniCnn& model, const Image& image,
                            TargetSelector target) {
  return RunCam(model, image, target, CamWeighting::kGradCamPlusPlus);
}

const LayerRelevance& RelevanceField::layer(const std::string& name) const {
  for (const auto& l : layers) {
    if (l.name == name) return l;
  }
  Fail(ErrorCode::kInvalidArgument, "relevance field has no layer named " + name);
}

double RelevanceField::InputTotal() const {
  double total = 0.0;
  for (double v : input.data) total += v;
  return total;
}

std::vector<double> LrpEpsilonDense(const Matrix& weights,
                                    std::span<const double> activations,
                                    std::span<const double> relevance_out,
                                    double epsilon) {
  if (static_cast<int>(activations.size()) != weights.cols ||
      static_cast<int>(relevance_out.size()) != weights.rows) {
    Fail(ErrorCode::kInvalidArgument, "dense LRP: shape mismatch");
  }
  if (!(epsilon >= 0.0)) {
    Fail(ErrorCode::kInvalidArgument, "LRP epsilon must be non-negative");
  }
  std::vector<double> r(activations.size(), 0.0);
  for (int k = 0; k < weights.rows; ++k) {
    double z = 0.0;
    for (int j = 0; j < weights.cols; ++j) z += weights(k, j) * activations[j];
    const double denom = Stabilized(z, epsilon);
    if (denom == 0.0) continue;
    const double q = relevance_out[k] / denom;
    for (int j = 0; j < weights.cols; ++j) {
      r[j] += activations[j] * weights(k, j) * q;
    }
  }
  return r;
}

RelevanceField LrpFromTrace(const MiniCnn& model, const WhiteBoxTrace& trace,
                            double epsilon) {
  if (!(epsilon >= 0.0)) {
    Fail(ErrorCode::kInvalidArgument, "LRP epsilon must be non-negative");
  }
  if (trace.layers.size() != 7 || trace.target_proposal < 0) {
    Fail(ErrorCode::kInvalidArgument, "LRP needs a complete forward trace");
  }
  const auto& L = trace.layers;
  const HeadWeights& hw = model.head();
  const MiniCnnWeights& w = model.weights();
  const Tensor3& f = L[6].activation;
  const int p = trace.target_proposal;
  const PoolRegion region =
      StagePoolRegion(trace.heads.proposals.proposals[p].box,
                      model.config().stride, hw.context_margin, f.height, f.width);

  // Dense head: the logit is a bias-free weighted sum over pool2 cells.
  RelevanceField field;
  field.score = trace.score;
  Tensor3 r6(f.channels, f.height, f.width);
  const double q = trace.score / Stabilized(trace.heads.logits[p], epsilon);
  for (int c = 0; c < f.channels; ++c) {
    const double win = hw.inner[c] / region.inner_cells;
    const double wring =
        region.ring_cells > 0 ? hw.context[c] / region.ring_cells : 0.0;
    for (int y = region.expanded.y1; y < region.expanded.y2; ++y) {
      for (int x = region.expanded.x1; x < region.expanded.x2; ++x) {
        const double wc = region.inner.contains(x, y) ? win : wring;
        r6.at(c, y, x) = f.at(c, y, x) * wc * q;
      }
    }
  }
  Tensor3 r5 = RouteMaxPool(L[5].activation, r6);
  Tensor3 r4 = r5;  // ReLU passes relevance through
  Tensor3 r3 = RouteConv(L[3].activation, L[4].activation, r4, w.conv2, epsilon);
  Tensor3 r2 = RouteMaxPool(L[2].activation, r3);
  Tensor3 r1 = r2;
  Tensor3 r0 = RouteConv(L[0].activation, L[1].activation, r1, w.conv1, epsilon);

  field.input = Matrix(r0.height, r0.width);
  field.input.data = r0.data;
  Tensor3* rel[7] = {&r0, &r1, &r2, &r3, &r4, &r5, &r6};
  for (int i = 0; i < 7; ++i) {
    field.layers.push_back({L[i].name, std::move(*rel[i])});
  }
  return field;
}

RelevanceField LrpEpsilon(const MiniCnn& model, const Image& image,
                          TargetSelector target, double epsilon) {
  return LrpFromTrace(model, model.Forward(image, target), epsilon);
}

SaliencyMap RelevanceMap(const RelevanceField& field) {
  SaliencyMap map(field.input.rows, field.input.cols, "lrp");
  map.values = field.input.data;
  return map;
}

std::vector<int> AdaSiseGate(std::span<const double> scores, bool otsu_gate) {
  std::vector<int> positive;
  std::vector<double> values;
  for (int c = 0; c < static_cast<int>(scores.size()); ++c) {
    if (scores[c] > 0.0) {
      positive.push_back(c);
      values.push_back(scores[c]);
    }
  }
  if (!otsu_gate || values.size() < 2) return positive;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (!(*hi > *lo)) return positive;
  const double threshold = OtsuThreshold(values);
  std::vector<int> kept;
  for (std::size_t i = 0; i < positive.size(); ++i) {
    if (values[i] > threshold) kept.push_back(positive[i]);
  }
  return kept;
}

AdaSiseResult AdaSise(const MiniCnn& model, const Image& image,
                      TargetSelector target, const AdaSiseConfig& cfg) {
  if (cfg.layers.empty()) {
    Fail(ErrorCode::kInvalidArgument, "Ada-SISE needs at least one layer");
  }
  WhiteBoxTrace trace = model.Forward(image, target);
  model.Backward(&trace);
  const int h = image.height();
  const int w = image.width();

  AdaSiseResult result;
  SaliencyMap fused(h, w, "adasise");
  bool any_positive = false;
  for (const auto& name : cfg.layers) {
    const TraceLayer& layer = trace.layer(name);
    LayerAttribution attr;
    attr.layer_name = name;
    attr.channel_scores = CamChannelWeights(layer, CamWeighting::kGradCam);
    attr.kept = AdaSiseGate(attr.channel_scores, cfg.otsu_gate);
    any_positive = any_positive || !attr.kept.empty();
    attr.visualization = Matrix(h, w);
    for (int c : attr.kept) {
      SaliencyMap mask(h, w);
      mask.values = Upsample(Plane(layer.activation, c), h, w).data;
      mask = NormalizeMap(mask);
      Matrix m(h, w);
      m.data = mask.values;
      const double weight = model.ImageScore(ApplyMask(image, m));
      attr.mask_weights.push_back(weight);
      for (std::size_t i = 0; i < m.data.size(); ++i) {
        attr.visualization.data[i] += weight * m.data[i];
      }
    }
    SaliencyMap vis(h, w);
    vis.values = attr.visualization.data;
    vis = NormalizeMap(vis);
    for (std::size_t i = 0; i < vis.values.size(); ++i) {
      fused.values[i] += vis.values[i];
    }
    result.layers.push_back(std::move(attr));
  }
  if (!any_positive) {
    Log().warn("adasise: no channel has a positive score; map is zero");
    result.degenerate = true;
  }
  result.map = NormalizeMap(fused);
  result.map.method = "adasise";
  return result;
}

}  // namespace detxplain
