/*
 * Copyright 2026 The hardmine Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "hardmine/dataset.hpp"
#include "hardmine/errors.hpp"
#include "hardmine/evaluation.hpp"
#include "hardmine/rng.hpp"
#include "hardmine/targets.hpp"

namespace hardmine {

// Minimal single-shot grid detector. A stack of stride-2 3x3 convolutions
// (leaky ReLU) halves the image; each output grid is produced by a 3x3
// stride-2 head convolution over the feature map at twice its resolution,
// emitting 5 channels per cell: an objectness logit and four raw box
// values. Reading the 2x-finer map keeps sub-cell position information
// available to the box regression even on the coarsest grid.
// Probabilities are sigmoids of the raw outputs. Everything is double
// precision and free of hidden state, so the whole backward path can be
// audited with finite differences.
//
// Activations are stored channel-major: index = c*h*w + y*w + x.

inline constexpr double kLeakySlope = 0.1;
inline constexpr int kHeadChannels = 5;  // logit, cx, cy, w, h

namespace detail {

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double leaky(double z) { return z > 0.0 ? z : kLeakySlope * z; }
inline double leaky_grad(double z) { return z > 0.0 ? 1.0 : kLeakySlope; }

}  // namespace detail

struct ConvDesc {
  std::size_t w_off = 0, b_off = 0;
  int in_c = 0, out_c = 0;
  int in_h = 0, in_w = 0;  // input resolution; output halves it
};

struct HeadDesc {
  std::size_t w_off = 0, b_off = 0;
  int in_c = 0;
  int side = 0;  // output grid side length
};

// Flat parameter vector layout for a given grid geometry.
struct ParamLayout {
  std::vector<ConvDesc> trunk;            // stride-2 3x3 convs, in order
  std::array<HeadDesc, kNumScales> heads; // 1x1 convs at the three grids
  int pre_convs = 0;  // convs before the first (finest) grid
  std::size_t total = 0;
};

inline ParamLayout make_param_layout(const GridSpec& grid, int channels) {
  grid.validate();
  if (channels < 1) throw ConfigError("detector channels must be >= 1");
  ParamLayout layout;
  int reduction = grid.image_size / grid.cells[0];
  while (reduction > 1) {
    ++layout.pre_convs;
    reduction /= 2;
  }
  const int n_convs = layout.pre_convs + 2;  // two more halvings for scales 1,2

  std::size_t off = 0;
  int res = grid.image_size;
  for (int l = 0; l < n_convs; ++l) {
    ConvDesc c;
    c.in_c = l == 0 ? 1 : channels;
    c.out_c = channels;
    c.in_h = c.in_w = res;
    c.w_off = off;
    off += static_cast<std::size_t>(c.out_c) * c.in_c * 9;
    c.b_off = off;
    off += c.out_c;
    layout.trunk.push_back(c);
    res /= 2;
  }
  for (int s = 0; s < kNumScales; ++s) {
    HeadDesc h;
    h.in_c = channels;
    h.side = grid.cells[s];
    h.w_off = off;
    off += static_cast<std::size_t>(kHeadChannels) * channels;
    h.b_off = off;
    off += kHeadChannels;
    layout.heads[s] = h;
  }
  layout.total = off;
  return layout;
}

struct DetectorModel {
  GridSpec grid;
  int channels = 8;
  std::uint64_t init_seed = 0;
  std::vector<double> params;

  ParamLayout layout() const { return make_param_layout(grid, channels); }
};

// He-uniform trunk weights. Head weights and the objectness bias start at
// exactly zero, so every cell predicts p = 0.5 before training and the
// first updates are driven by the loss alone. The width/height biases
// start at the typical target fraction of the image (sigma(b) = 0.15)
// instead of sigma(0) = 0.5, so early boxes are target-sized rather than
// half the image.
inline DetectorModel make_detector(const GridSpec& grid, int channels,
                                   std::uint64_t seed) {
  DetectorModel m;
  m.grid = grid;
  m.channels = channels;
  m.init_seed = seed;
  const ParamLayout layout = make_param_layout(grid, channels);
  m.params.assign(layout.total, 0.0);
  Rng rng(seed);
  for (const ConvDesc& c : layout.trunk) {
    const double limit = std::sqrt(6.0 / (c.in_c * 9.0));
    const std::size_t n = static_cast<std::size_t>(c.out_c) * c.in_c * 9;
    for (std::size_t i = 0; i < n; ++i)
      m.params[c.w_off + i] = rng.uniform(-limit, limit);
  }
  const double size_prior = std::log(0.15 / 0.85);  // logit of 0.15
  for (const HeadDesc& h : layout.heads) {
    m.params[h.b_off + 3] = size_prior;
    m.params[h.b_off + 4] = size_prior;
  }
  return m;
}

namespace detail {

inline void conv3x3_s2(const double* in, int in_c, int in_h, int in_w,
                       const double* w, const double* b, int out_c,
                       double* out) {
  const int out_h = in_h / 2, out_w = in_w / 2;
  for (int oc = 0; oc < out_c; ++oc) {
    const double* wk = w + static_cast<std::size_t>(oc) * in_c * 9;
    double* plane_out = out + static_cast<std::size_t>(oc) * out_h * out_w;
    for (int oy = 0; oy < out_h; ++oy)
      for (int ox = 0; ox < out_w; ++ox) {
        double acc = b[oc];
        for (int ic = 0; ic < in_c; ++ic) {
          const double* plane = in + static_cast<std::size_t>(ic) * in_h * in_w;
          const double* wkk = wk + static_cast<std::size_t>(ic) * 9;
          for (int ky = 0; ky < 3; ++ky) {
            const int iy = 2 * oy + ky - 1;
            if (iy < 0 || iy >= in_h) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int ix = 2 * ox + kx - 1;
              if (ix < 0 || ix >= in_w) continue;
              acc += wkk[ky * 3 + kx] * plane[iy * in_w + ix];
            }
          }
        }
        plane_out[oy * out_w + ox] = acc;
      }
  }
}

inline void conv3x3_s2_backward(const double* in, int in_c, int in_h, int in_w,
                                const double* w, int out_c, const double* gout,
                                double* gw, double* gb, double* gin) {
  const int out_h = in_h / 2, out_w = in_w / 2;
  for (int oc = 0; oc < out_c; ++oc) {
    const double* wk = w + static_cast<std::size_t>(oc) * in_c * 9;
    double* gwk = gw + static_cast<std::size_t>(oc) * in_c * 9;
    const double* gplane = gout + static_cast<std::size_t>(oc) * out_h * out_w;
    for (int oy = 0; oy < out_h; ++oy)
      for (int ox = 0; ox < out_w; ++ox) {
        const double g = gplane[oy * out_w + ox];
        gb[oc] += g;
        for (int ic = 0; ic < in_c; ++ic) {
          const double* plane = in + static_cast<std::size_t>(ic) * in_h * in_w;
          double* gin_plane =
              gin ? gin + static_cast<std::size_t>(ic) * in_h * in_w : nullptr;
          for (int ky = 0; ky < 3; ++ky) {
            const int iy = 2 * oy + ky - 1;
            if (iy < 0 || iy >= in_h) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int ix = 2 * ox + kx - 1;
              if (ix < 0 || ix >= in_w) continue;
              gwk[ic * 9 + ky * 3 + kx] += g * plane[iy * in_w + ix];
              if (gin_plane)
                gin_plane[iy * in_w + ix] += g * wk[ic * 9 + ky * 3 + kx];
            }
          }
        }
      }
  }
}

inline void conv1x1(const double* in, int in_c, int hw, const double* w,
                    const double* b, int out_c, double* out) {
  for (int oc = 0; oc < out_c; ++oc) {
    double* plane_out = out + static_cast<std::size_t>(oc) * hw;
    for (int p = 0; p < hw; ++p) plane_out[p] = b[oc];
    for (int ic = 0; ic < in_c; ++ic) {
      const double wv = w[static_cast<std::size_t>(oc) * in_c + ic];
      const double* plane = in + static_cast<std::size_t>(ic) * hw;
      for (int p = 0; p < hw; ++p) plane_out[p] += wv * plane[p];
    }
  }
}

inline void conv1x1_backward(const double* in, int in_c, int hw,
                             const double* w, int out_c, const double* gout,
                             double* gw, double* gb, double* gin) {
  for (int oc = 0; oc < out_c; ++oc) {
    const double* gplane = gout + static_cast<std::size_t>(oc) * hw;
    for (int p = 0; p < hw; ++p) gb[oc] += gplane[p];
    for (int ic = 0; ic < in_c; ++ic) {
      const double* plane = in + static_cast<std::size_t>(ic) * hw;
      double* gin_plane = gin + static_cast<std::size_t>(ic) * hw;
      const double wv = w[static_cast<std::size_t>(oc) * in_c + ic];
      double acc = 0.0;
      for (int p = 0; p < hw; ++p) {
        acc += gplane[p] * plane[p];
        gin_plane[p] += wv * gplane[p];
      }
      gw[static_cast<std::size_t>(oc) * in_c + ic] += acc;
    }
  }
}

}  // namespace detail

// Intermediate activations of one forward pass, kept for the backward pass.
struct ForwardCache {
  std::vector<std::vector<double>> act;  // act[0] = input image
  std::vector<std::vector<double>> pre;  // pre[l] = pre-activation of conv l
};

// Raw 5-channel head outputs for the three grids, channel-major.
using HeadOutputs = std::array<std::vector<double>, kNumScales>;

inline std::vector<double> image_to_doubles(const Frame& frame) {
  std::vector<double> out(frame.pixels.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = frame.pixels[i] / 255.0;
  return out;
}

inline HeadOutputs forward_heads(const DetectorModel& model,
                                 const std::vector<double>& image,
                                 ForwardCache* cache = nullptr) {
  const ParamLayout layout = model.layout();
  const std::size_t npx =
      static_cast<std::size_t>(model.grid.image_size) * model.grid.image_size;
  if (image.size() != npx)
    throw DataError("forward_heads: image does not match grid.image_size");
  if (model.params.size() != layout.total)
    throw DataError("forward_heads: parameter vector has the wrong size");

  const int n_convs = static_cast<int>(layout.trunk.size());
  std::vector<std::vector<double>> act(n_convs + 1), pre(n_convs + 1);
  act[0] = image;
  for (int l = 0; l < n_convs; ++l) {
    const ConvDesc& c = layout.trunk[l];
    const int out_h = c.in_h / 2;
    pre[l + 1].assign(static_cast<std::size_t>(c.out_c) * out_h * out_h, 0.0);
    detail::conv3x3_s2(act[l].data(), c.in_c, c.in_h, c.in_w,
                       model.params.data() + c.w_off,
                       model.params.data() + c.b_off, c.out_c,
                       pre[l + 1].data());
    act[l + 1].resize(pre[l + 1].size());
    for (std::size_t i = 0; i < pre[l + 1].size(); ++i)
      act[l + 1][i] = detail::leaky(pre[l + 1][i]);
  }

  HeadOutputs heads;
  for (int s = 0; s < kNumScales; ++s) {
    const HeadDesc& h = layout.heads[s];
    const int level = layout.pre_convs + s;
    const int hw = h.side * h.side;
    heads[s].assign(static_cast<std::size_t>(kHeadChannels) * hw, 0.0);
    detail::conv1x1(act[level].data(), h.in_c, hw,
                    model.params.data() + h.w_off,
                    model.params.data() + h.b_off, kHeadChannels,
                    heads[s].data());
  }
  if (cache) {
    cache->act = std::move(act);
    cache->pre = std::move(pre);
  }
  return heads;
}

// Accumulates d(loss)/d(params) into `param_grad` given d(loss)/d(raw head
// outputs). `param_grad` must already have layout.total entries.
inline void backward_heads(const DetectorModel& model,
                           const ForwardCache& cache,
                           const HeadOutputs& head_grads,
                           std::vector<double>& param_grad) {
  const ParamLayout layout = model.layout();
  if (param_grad.size() != layout.total)
    throw DataError("backward_heads: gradient vector has the wrong size");
  const int n_convs = static_cast<int>(layout.trunk.size());

  std::vector<std::vector<double>> d_act(n_convs + 1);
  for (int l = 0; l <= n_convs; ++l) d_act[l].assign(cache.act[l].size(), 0.0);

  for (int s = 0; s < kNumScales; ++s) {
    const HeadDesc& h = layout.heads[s];
    const int level = layout.pre_convs + s;
    const int hw = h.side * h.side;
    detail::conv1x1_backward(cache.act[level].data(), h.in_c, hw,
                             model.params.data() + h.w_off, kHeadChannels,
                             head_grads[s].data(),
                             param_grad.data() + h.w_off,
                             param_grad.data() + h.b_off,
                             d_act[level].data());
  }

  for (int l = n_convs; l >= 1; --l) {
    const ConvDesc& c = layout.trunk[l - 1];
    // chain through the activation
    std::vector<double>& dz = d_act[l];
    for (std::size_t i = 0; i < dz.size(); ++i)
      dz[i] *= detail::leaky_grad(cache.pre[l][i]);
    detail::conv3x3_s2_backward(
        cache.act[l - 1].data(), c.in_c, c.in_h, c.in_w,
        model.params.data() + c.w_off, c.out_c, dz.data(),
        param_grad.data() + c.w_off, param_grad.data() + c.b_off,
        l > 1 ? d_act[l - 1].data() : nullptr);
  }
}

// Decodes every cell above the confidence floor into a detection. Cells
// are emitted in (scale, row, col) order, so output order is deterministic.
inline std::vector<Detection> detect_frame(const DetectorModel& model,
                                           const Frame& frame,
                                           double min_confidence = 0.05) {
  const HeadOutputs heads = forward_heads(model, image_to_doubles(frame));
  std::vector<Detection> dets;
  for (int s = 0; s < kNumScales; ++s) {
    const int side = model.grid.cells[s];
    const int hw = side * side;
    const int stride = model.grid.stride(s);
    for (int cell = 0; cell < hw; ++cell) {
      const double p = detail::sigmoid(heads[s][cell]);
      if (p <= min_confidence) continue;
      const int row = cell / side, col = cell % side;
      const double cx =
          (col + detail::sigmoid(heads[s][1 * hw + cell])) * stride;
      const double cy =
          (row + detail::sigmoid(heads[s][2 * hw + cell])) * stride;
      const double w =
          detail::sigmoid(heads[s][3 * hw + cell]) * model.grid.image_size;
      const double h =
          detail::sigmoid(heads[s][4 * hw + cell]) * model.grid.image_size;
      Box b{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
      b.x1 = std::max(0.0, b.x1);
      b.y1 = std::max(0.0, b.y1);
      b.x2 = std::min<double>(model.grid.image_size, b.x2);
      b.y2 = std::min<double>(model.grid.image_size, b.y2);
      if (!(b.x1 < b.x2 && b.y1 < b.y2)) continue;
      dets.push_back(Detection{frame.frame_id, b, p});
    }
  }
  return dets;
}

inline std::vector<Detection> detect_dataset(const DetectorModel& model,
                                             const Dataset& data,
                                             double min_confidence = 0.05) {
  if (data.image_size != model.grid.image_size)
    throw DataError("detect_dataset: dataset and model image sizes differ");
  std::vector<Detection> all;
  for (const Frame& f : data.frames) {
    auto dets = detect_frame(model, f, min_confidence);
    all.insert(all.end(), dets.begin(), dets.end());
  }
  return all;
}

}  // namespace hardmine
