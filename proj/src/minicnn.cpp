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
#include <array>
#include <cmath>

#include "detxplain/detectors.hpp"
#include "detxplain/error.hpp"

namespace detxplain {
namespace {

using Kernel = std::array<double, 9>;

constexpr Kernel kBox = {1 / 9.0, 1 / 9.0, 1 / 9.0, 1 / 9.0, 1 / 9.0,
                         1 / 9.0, 1 / 9.0, 1 / 9.0, 1 / 9.0};
constexpr Kernel kGauss = {1 / 16.0, 2 / 16.0, 1 / 16.0, 2 / 16.0, 4 / 16.0,
                           2 / 16.0, 1 / 16.0, 2 / 16.0, 1 / 16.0};
constexpr Kernel kIdentity = {0, 0, 0, 0, 1, 0, 0, 0, 0};
// Centre-surround: a discrete difference of Gaussians with zero sum.
constexpr Kernel kCenterSurround = {-1 / 8.0, -1 / 8.0, -1 / 8.0,
                                    -1 / 8.0, 1.0,      -1 / 8.0,
                                    -1 / 8.0, -1 / 8.0, -1 / 8.0};
constexpr Kernel kSobelX = {-0.25, 0, 0.25, -0.5, 0, 0.5, -0.25, 0, 0.25};
constexpr Kernel kSobelY = {-0.25, -0.5, -0.25, 0, 0, 0, 0.25, 0.5, 0.25};

Kernel Scaled(const Kernel& k, double s) {
  Kernel out;
  for (int i = 0; i < 9; ++i) out[i] = k[i] * s;
  return out;
}

void SetKernel(std::vector<double>* w, int in_channels, int out_c, int in_c,
               const Kernel& k) {
  for (int i = 0; i < 9; ++i) {
    (*w)[(static_cast<std::size_t>(out_c) * in_channels + in_c) * 9 + i] += k[i];
  }
}

}  // namespace

MiniCnnWeights MiniCnnWeights::Default() {
  MiniCnnWeights m;
  constexpr int c1 = kConv1Channels;
  constexpr int c2 = kConv2Channels;
  m.conv1.assign(c1 * 1 * 9, 0.0);
  m.conv2.assign(static_cast<std::size_t>(c2) * c1 * 9, 0.0);

  // conv1: 0 box mean, 1 Gaussian, 2 bright spot, 3 dark spot, 4-7 signed
  // Sobel edges (+x, -x, +y, -y).
  SetKernel(&m.conv1, 1, 0, 0, kBox);
  SetKernel(&m.conv1, 1, 1, 0, kGauss);
  SetKernel(&m.conv1, 1, 2, 0, kCenterSurround);
  SetKernel(&m.conv1, 1, 3, 0, Scaled(kCenterSurround, -1.0));
  SetKernel(&m.conv1, 1, 4, 0, kSobelX);
  SetKernel(&m.conv1, 1, 5, 0, Scaled(kSobelX, -1.0));
  SetKernel(&m.conv1, 1, 6, 0, kSobelY);
  SetKernel(&m.conv1, 1, 7, 0, Scaled(kSobelY, -1.0));

  // conv2 on the pooled conv1 maps.
  SetKernel(&m.conv2, c1, 0, 0, kBox);            // brightness
  SetKernel(&m.conv2, c1, 1, 1, kGauss);          // brightness, Gaussian
  SetKernel(&m.conv2, c1, 2, 0, Scaled(kGauss, 0.5));
  SetKernel(&m.conv2, c1, 2, 1, Scaled(kGauss, 0.5));
  SetKernel(&m.conv2, c1, 3, 0, kCenterSurround);  // coarse bright blob
  SetKernel(&m.conv2, c1, 4, 0, Scaled(kCenterSurround, -1.0));  // coarse dark
  for (int e = 4; e < 8; ++e) {
    SetKernel(&m.conv2, c1, 5, e, Scaled(kBox, 0.25));  // edge energy
  }
  SetKernel(&m.conv2, c1, 6, 2, kBox);  // bright-spot density
  SetKernel(&m.conv2, c1, 7, 3, kBox);  // dark-spot density
  for (int e = 0; e < 4; ++e) {
    SetKernel(&m.conv2, c1, 8 + e, 4 + e, kGauss);  // oriented edges
  }
  SetKernel(&m.conv2, c1, 12, 0, kIdentity);
  SetKernel(&m.conv2, c1, 13, 1, kIdentity);
  SetKernel(&m.conv2, c1, 14, 0, kSobelX);  // brightness gradients
  SetKernel(&m.conv2, c1, 15, 0, kSobelY);

  HeadWeights& h = m.head;
  h.objectness.assign(c2, 0.0);
  h.inner.assign(c2, 0.0);
  h.context.assign(c2, 0.0);
  h.objectness[0] = 0.5;
  h.objectness[1] = 0.5;
  h.objectness_gain = 12.0;
  h.objectness_offset = 0.55;
  h.inner[0] = 0.4;
  h.inner[1] = 0.3;
  h.inner[2] = 0.3;
  h.inner[3] = 0.5;
  h.context[0] = -0.45;
  h.context[1] = -0.45;
  h.context[5] = -0.5;
  h.score_gain = 10.0;
  h.score_offset = 0.3;
  h.context_margin = 4;
  return m;
}

Tensor3 Conv3x3(const Tensor3& input, std::span<const double> weights,
                int out_channels) {
  const int cin = input.channels;
  const int h = input.height;
  const int w = input.width;
  if (weights.size() != static_cast<std::size_t>(out_channels) * cin * 9) {
    Fail(ErrorCode::kInvalidArgument, "conv3x3: weight count mismatch");
  }
  const int pw = w + 2;
  const std::size_t pplane = static_cast<std::size_t>(h + 2) * pw;
  std::vector<double> padded(pplane * cin, 0.0);
  for (int c = 0; c < cin; ++c) {
    double* dst = &padded[c * pplane];
    for (int y = 0; y < h; ++y) {
      double* row = dst + static_cast<std::size_t>(y + 1) * pw;
      std::copy_n(&input.data[c * input.plane() + static_cast<std::size_t>(y) * w],
                  w, row + 1);
      row[0] = row[1];
      row[w + 1] = row[w];
    }
    std::copy_n(dst + pw, pw, dst);
    std::copy_n(dst + static_cast<std::size_t>(h) * pw, pw,
                dst + static_cast<std::size_t>(h + 1) * pw);
  }
  Tensor3 out(out_channels, h, w);
  for (int co = 0; co < out_channels; ++co) {
    double* dst_plane = &out.data[co * out.plane()];
    for (int ci = 0; ci < cin; ++ci) {
      const double* src_plane = &padded[ci * pplane];
      const double* k = &weights[(static_cast<std::size_t>(co) * cin + ci) * 9];
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const double wv = k[ky * 3 + kx];
          if (wv == 0.0) continue;
          for (int y = 0; y < h; ++y) {
            const double* src = src_plane + static_cast<std::size_t>(y + ky) * pw + kx;
            double* dst = dst_plane + static_cast<std::size_t>(y) * w;
            for (int x = 0; x < w; ++x) dst[x] += wv * src[x];
          }
        }
      }
    }
  }
  return out;
}

Tensor3 Conv3x3Backward(const Tensor3& input, const Tensor3& grad_out,
                        std::span<const double> weights) {
  const int cin = input.channels;
  const int h = input.height;
  const int w = input.width;
  Tensor3 grad(cin, h, w);
  for (int co = 0; co < grad_out.channels; ++co) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double g = grad_out.at(co, y, x);
        if (g == 0.0) continue;
        for (int ci = 0; ci < cin; ++ci) {
          const double* k = &weights[(static_cast<std::size_t>(co) * cin + ci) * 9];
          for (int ky = 0; ky < 3; ++ky) {
            const int iy = std::clamp(y + ky - 1, 0, h - 1);
            for (int kx = 0; kx < 3; ++kx) {
              if (k[ky * 3 + kx] == 0.0) continue;
              grad.at(ci, iy, std::clamp(x + kx - 1, 0, w - 1)) += k[ky * 3 + kx] * g;
            }
          }
        }
      }
    }
  }
  return grad;
}

Tensor3 MaxPool2(const Tensor3& input) {
  Tensor3 out(input.channels, input.height / 2, input.width / 2);
  for (int c = 0; c < input.channels; ++c) {
    for (int y = 0; y < out.height; ++y) {
      for (int x = 0; x < out.width; ++x) {
        double m = input.at(c, 2 * y, 2 * x);
        m = std::max(m, input.at(c, 2 * y, 2 * x + 1));
        m = std::max(m, input.at(c, 2 * y + 1, 2 * x));
        m = std::max(m, input.at(c, 2 * y + 1, 2 * x + 1));
        out.at(c, y, x) = m;
      }
    }
  }
  return out;
}

Tensor3 MaxPool2Backward(const Tensor3& input, const Tensor3& pooled_grad) {
  Tensor3 grad(input.channels, input.height, input.width);
  for (int c = 0; c < input.channels; ++c) {
    for (int y = 0; y < pooled_grad.height; ++y) {
      for (int x = 0; x < pooled_grad.width; ++x) {
        const double g = pooled_grad.at(c, y, x);
        if (g == 0.0) continue;
        int by = 2 * y;
        int bx = 2 * x;
        double m = input.at(c, by, bx);
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            if (input.at(c, 2 * y + dy, 2 * x + dx) > m) {
              m = input.at(c, 2 * y + dy, 2 * x + dx);
              by = 2 * y + dy;
              bx = 2 * x + dx;
            }
          }
        }
        grad.at(c, by, bx) += g;
      }
    }
  }
  return grad;
}

namespace {

Tensor3 Relu(const Tensor3& t) {
  Tensor3 out = t;
  for (double& v : out.data) v = std::max(v, 0.0);
  return out;
}

Tensor3 ImageTensor(const Image& image) {
  Tensor3 t(1, image.height(), image.width());
  std::copy(image.values().begin(), image.values().end(), t.data.begin());
  return t;
}

}  // namespace

MiniCnn::MiniCnn(DetectorConfig config, MiniCnnWeights weights)
    : TwoStageDetector(std::move(config), weights.head),
      weights_(std::move(weights)) {
  if (weights_.conv1.size() != MiniCnnWeights::kConv1Channels * 9u ||
      weights_.conv2.size() != static_cast<std::size_t>(MiniCnnWeights::kConv2Channels) *
                                   MiniCnnWeights::kConv1Channels * 9 ||
      static_cast<int>(weights_.head.objectness.size()) !=
          MiniCnnWeights::kConv2Channels) {
    Fail(ErrorCode::kInvalidArgument, "minicnn: weight shapes do not match");
  }
  if (this->config().stride != 4) {
    Fail(ErrorCode::kConfig, "minicnn: stride is fixed at 4");
  }
}

Tensor3 MiniCnn::Features(const Image& image) const {
  CheckInput(image);
  Tensor3 a = Conv3x3(ImageTensor(image), weights_.conv1,
                      MiniCnnWeights::kConv1Channels);
  for (double& v : a.data) v = std::max(v, 0.0);
  a = Conv3x3(MaxPool2(a), weights_.conv2, MiniCnnWeights::kConv2Channels);
  for (double& v : a.data) v = std::max(v, 0.0);
  return MaxPool2(a);
}

WhiteBoxTrace MiniCnn::Forward(const Image& image, TargetSelector target) const {
  CheckInput(image);
  WhiteBoxTrace trace;
  trace.layers.reserve(7);
  trace.layers.push_back({"input", ImageTensor(image), {}});
  trace.layers.push_back({"conv1",
                          Conv3x3(trace.layers.back().activation, weights_.conv1,
                                  MiniCnnWeights::kConv1Channels),
                          {}});
  trace.layers.push_back({"relu1", Relu(trace.layers.back().activation), {}});
  trace.layers.push_back({"pool1", MaxPool2(trace.layers.back().activation), {}});
  trace.layers.push_back({"conv2",
                          Conv3x3(trace.layers.back().activation, weights_.conv2,
                                  MiniCnnWeights::kConv2Channels),
                          {}});
  trace.layers.push_back({"relu2", Relu(trace.layers.back().activation), {}});
  trace.layers.push_back({"pool2", MaxPool2(trace.layers.back().activation), {}});
  trace.heads = RunHeads(trace.layers.back().activation);

  switch (target.kind) {
    case TargetSelector::Kind::kMaxScore:
      trace.target_proposal = trace.heads.best;
      break;
    case TargetSelector::Kind::kProposal:
      if (target.proposal < 0 ||
          target.proposal >= static_cast<int>(trace.heads.scores.size())) {
        Fail(ErrorCode::kInvalidArgument,
             "target selector: proposal index out of range");
      }
      trace.target_proposal = target.proposal;
      break;
    default:
      Fail(ErrorCode::kInvalidArgument, "target selector: unknown kind");
  }
  trace.score = trace.heads.scores[trace.target_proposal];
  return trace;
}

Tensor3 MiniCnn::HeadGradient(const WhiteBoxTrace& trace) const {
  const Tensor3& f = trace.layer("pool2").activation;
  Tensor3 g(f.channels, f.height, f.width);
  const int p = trace.target_proposal;
  const HeadWeights& hw = head();
  const double s = trace.heads.scores[p];
  const double dz = hw.score_gain * s * (1.0 - s);
  const BBox& box = trace.heads.proposals.proposals[p].box;
  const PoolRegion r =
      StagePoolRegion(box, config().stride, hw.context_margin, f.height, f.width);
  for (int c = 0; c < f.channels; ++c) {
    const double gin = dz * hw.inner[c] / r.inner_cells;
    const double gring = r.ring_cells > 0 ? dz * hw.context[c] / r.ring_cells : 0.0;
    for (int y = r.expanded.y1; y < r.expanded.y2; ++y) {
      for (int x = r.expanded.x1; x < r.expanded.x2; ++x) {
        g.at(c, y, x) = r.inner.contains(x, y) ? gin : gring;
      }
    }
  }
  return g;
}

void MiniCnn::Backward(WhiteBoxTrace* trace) const {
  if (trace == nullptr || trace->layers.size() != 7 || trace->target_proposal < 0) {
    Fail(ErrorCode::kInvalidArgument, "backward: forward trace missing");
  }
  auto& L = trace->layers;
  L[6].gradient = HeadGradient(*trace);
  L[5].gradient = MaxPool2Backward(L[5].activation, L[6].gradient);
  L[4].gradient = L[5].gradient;
  for (std::size_t i = 0; i < L[4].gradient.data.size(); ++i) {
    if (!(L[4].activation.data[i] > 0.0)) L[4].gradient.data[i] = 0.0;
  }
  L[3].gradient = Conv3x3Backward(L[3].activation, L[4].gradient, weights_.conv2);
  L[2].gradient = MaxPool2Backward(L[2].activation, L[3].gradient);
  L[1].gradient = L[2].gradient;
  for (std::size_t i = 0; i < L[1].gradient.data.size(); ++i) {
    if (!(L[1].activation.data[i] > 0.0)) L[1].gradient.data[i] = 0.0;
  }
  L[0].gradient = Conv3x3Backward(L[0].activation, L[1].gradient, weights_.conv1);
}

const TraceLayer& WhiteBoxTrace::layer(const std::string& name) const {
  for (const auto& l : layers) {
    if (l.name == name) return l;
  }
  Fail(ErrorCode::kInvalidArgument, "trace has no layer named " + name);
}

TraceLayer& WhiteBoxTrace::layer(const std::string& name) {
  for (auto& l : layers) {
    if (l.name == name) return l;
  }
  Fail(ErrorCode::kInvalidArgument, "trace has no layer named " + name);
}

bool WhiteBoxTrace::has_gradients() const {
  return !layers.empty() &&
         std::all_of(layers.begin(), layers.end(), [](const TraceLayer& l) {
           return l.gradient.SameShape(l.activation);
         });
}

}  // namespace detxplain
