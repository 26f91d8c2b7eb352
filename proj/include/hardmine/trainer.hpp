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

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "hardmine/dataset.hpp"
#include "hardmine/detector.hpp"
#include "hardmine/mining.hpp"
#include "hardmine/targets.hpp"

namespace hardmine {

// Training setup. The overall loss is
//   lambda_box * smooth-L1 box loss (positive cells only)
//   + objectness loss of the configured variant.
// Plain fixed-rate SGD, deterministic shuffling; (seed, config) fixes the
// whole trajectory bit-for-bit.
struct TrainConfig {
  LossConfig loss;
  double lambda_box = 1.0;
  double learning_rate = 0.2;
  int epochs = 30;
  int batch_size = 16;
  int channels = 8;  // trunk width of the detector
  std::uint64_t seed = 7;

  void validate() const {
    loss.validate();
    if (!(lambda_box >= 0.0)) throw ConfigError("train.lambda_box must be >= 0");
    if (!(learning_rate >= 0.0))
      throw ConfigError("train.learning_rate must be >= 0");
    if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (channels < 1) throw ConfigError("train.channels must be >= 1");
  }
};

struct BatchLoss {
  double total = 0.0;
  double objectness = 0.0;
  double box = 0.0;
  std::optional<SelectionMask> mask;  // present for the rank-mined variants
};

namespace detail {

inline double smooth_l1(double d) {
  const double a = std::abs(d);
  return a < 1.0 ? 0.5 * d * d : a - 0.5;
}
inline double smooth_l1_grad(double d) {
  return std::abs(d) < 1.0 ? d : (d > 0.0 ? 1.0 : -1.0);
}

// Order-insensitive comparison: reordering within a selection does not
// change the loss, only crossing the selection boundary does.
inline bool same_selection_sets(const std::optional<SelectionMask>& a,
                                const std::optional<SelectionMask>& b) {
  if (a.has_value() != b.has_value()) return false;
  if (!a.has_value()) return true;
  for (int s = 0; s < kNumScales; ++s) {
    if (a->scales[s].size() != b->scales[s].size()) return false;
    for (std::size_t i = 0; i < a->scales[s].size(); ++i) {
      std::vector<std::uint32_t> lhs = a->scales[s][i].indices;
      std::vector<std::uint32_t> rhs = b->scales[s][i].indices;
      std::sort(lhs.begin(), lhs.end());
      std::sort(rhs.begin(), rhs.end());
      if (lhs != rhs) return false;
    }
  }
  return true;
}

}  // namespace detail

// Forward pass over a mini-batch, loss composition, and (optionally) the
// analytic parameter gradient. The objectness kernels differentiate in
// probability space; gradients are chained through the head sigmoids here.
inline BatchLoss batch_loss_and_grad(const DetectorModel& model,
                                     const std::vector<const Frame*>& frames,
                                     const TrainConfig& cfg,
                                     std::vector<double>* param_grad) {
  if (frames.empty()) throw DataError("batch_loss_and_grad: empty batch");
  const bool want_grad = param_grad != nullptr;
  const GridSpec& grid = model.grid;
  const int n_images = static_cast<int>(frames.size());

  std::vector<ForwardCache> caches(want_grad ? n_images : 0);
  std::vector<HeadOutputs> raws(n_images);

  FeatureMapBatch batch;
  for (int s = 0; s < kNumScales; ++s) {
    ScaleGrid& g = batch.scales[s];
    g.images = n_images;
    g.height = g.width = grid.cells[s];
    g.obj_p.assign(g.total_cells(), 0.0);
    g.obj_t.assign(g.total_cells(), 0.0);
    g.box_pred.assign(4 * g.total_cells(), 0.0);
    g.box_target.assign(4 * g.total_cells(), 0.0);
  }

  for (int i = 0; i < n_images; ++i) {
    const Frame& frame = *frames[i];
    raws[i] = forward_heads(model, image_to_doubles(frame),
                            want_grad ? &caches[i] : nullptr);
    const auto targets = build_targets(frame.box, grid);
    for (int s = 0; s < kNumScales; ++s) {
      ScaleGrid& g = batch.scales[s];
      const int hw = g.cells_per_image();
      const std::size_t base = static_cast<std::size_t>(i) * hw;
      for (int cell = 0; cell < hw; ++cell) {
        const double logit = raws[i][s][cell];
        if (!std::isfinite(logit))
          throw NumericError(
              "batch_loss_and_grad: non-finite network output (diverged)");
        g.obj_p[base + cell] = detail::sigmoid(logit);
        g.obj_t[base + cell] = targets[s].obj_t[cell];
        for (int c = 0; c < 4; ++c) {
          g.box_pred[4 * (base + cell) + c] =
              detail::sigmoid(raws[i][s][(1 + c) * hw + cell]);
          g.box_target[4 * (base + cell) + c] = targets[s].box_target[4 * cell + c];
        }
      }
    }
  }

  const ObjectnessLoss obj = objectness_loss(batch, cfg.loss);

  // Smooth-L1 box loss over positive cells, reduced like the objectness
  // term: per-cell mean within each image, then mean over images. Keeping
  // the per-image contribution independent of batch composition makes the
  // epoch statistics invariant to shuffling.
  double box_value = 0.0;
  std::array<std::vector<double>, kNumScales> box_grad;
  for (int s = 0; s < kNumScales; ++s)
    box_grad[s].assign(batch.scales[s].box_pred.size(), 0.0);
  {
    std::vector<std::size_t> positives(n_images, 0);
    for (int s = 0; s < kNumScales; ++s) {
      const ScaleGrid& g = batch.scales[s];
      const int hw = g.cells_per_image();
      for (int i = 0; i < n_images; ++i)
        for (int cell = 0; cell < hw; ++cell)
          if (g.obj_t[static_cast<std::size_t>(i) * hw + cell] == 1.0)
            ++positives[i];
    }
    for (int i = 0; i < n_images; ++i) {
      if (positives[i] == 0) continue;
      const double scale = 1.0 / (static_cast<double>(positives[i]) * n_images);
      double image_sum = 0.0;
      for (int s = 0; s < kNumScales; ++s) {
        const ScaleGrid& g = batch.scales[s];
        const int hw = g.cells_per_image();
        const std::size_t base = static_cast<std::size_t>(i) * hw;
        for (int cell = 0; cell < hw; ++cell) {
          if (g.obj_t[base + cell] != 1.0) continue;
          for (int c = 0; c < 4; ++c) {
            const double d =
                g.box_pred[4 * (base + cell) + c] - g.box_target[4 * (base + cell) + c];
            image_sum += detail::smooth_l1(d);
            box_grad[s][4 * (base + cell) + c] = detail::smooth_l1_grad(d) * scale;
          }
        }
      }
      box_value += image_sum / positives[i];
    }
    box_value /= n_images;
  }

  BatchLoss out;
  out.objectness = obj.value;
  out.box = box_value;
  out.total = cfg.lambda_box * box_value + obj.value;
  out.mask = obj.mask;

  if (want_grad) {
    for (int i = 0; i < n_images; ++i) {
      HeadOutputs head_grads;
      for (int s = 0; s < kNumScales; ++s) {
        const ScaleGrid& g = batch.scales[s];
        const int hw = g.cells_per_image();
        const std::size_t base = static_cast<std::size_t>(i) * hw;
        head_grads[s].assign(static_cast<std::size_t>(kHeadChannels) * hw, 0.0);
        for (int cell = 0; cell < hw; ++cell) {
          const double p = g.obj_p[base + cell];
          head_grads[s][cell] = obj.d_dp[s][base + cell] * p * (1.0 - p);
          for (int c = 0; c < 4; ++c) {
            const double q = g.box_pred[4 * (base + cell) + c];
            head_grads[s][(1 + c) * hw + cell] =
                cfg.lambda_box * box_grad[s][4 * (base + cell) + c] * q *
                (1.0 - q);
          }
        }
      }
      backward_heads(model, caches[i], head_grads, *param_grad);
    }
  }
  return out;
}

struct EpochStats {
  double total = 0.0;
  double objectness = 0.0;
  double box = 0.0;
};

struct TrainResult {
  DetectorModel model;
  std::vector<EpochStats> history;  // one entry per epoch
};

inline TrainResult train(const Dataset& data, const GridSpec& grid,
                         const TrainConfig& cfg) {
  cfg.validate();
  grid.validate();
  if (data.frames.empty()) throw DataError("train: empty dataset");
  if (data.image_size != grid.image_size)
    throw DataError("train: dataset and grid image sizes differ");

  TrainResult result;
  result.model = make_detector(grid, cfg.channels, cfg.seed);
  DetectorModel& model = result.model;

  Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  const int n = static_cast<int>(data.frames.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad(model.params.size(), 0.0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    EpochStats stats;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int end = std::min(n, start + cfg.batch_size);
      std::vector<const Frame*> batch;
      batch.reserve(end - start);
      for (int i = start; i < end; ++i) batch.push_back(&data.frames[order[i]]);

      std::fill(grad.begin(), grad.end(), 0.0);
      BatchLoss bl;
      try {
        bl = batch_loss_and_grad(model, batch, cfg, &grad);
      } catch (const NumericError& e) {
        throw NumericError("train: epoch " + std::to_string(epoch + 1) + ": " +
                           e.what());
      }
      if (!std::isfinite(bl.total))
        throw NumericError("train: non-finite loss at epoch " +
                           std::to_string(epoch + 1));
      const double lr = cfg.learning_rate;
      for (std::size_t i = 0; i < model.params.size(); ++i)
        model.params[i] -= lr * grad[i];

      const double weight = static_cast<double>(end - start) / n;
      stats.total += bl.total * weight;
      stats.objectness += bl.objectness * weight;
      stats.box += bl.box * weight;
    }
    result.history.push_back(stats);
  }
  return result;
}

// Moving average of the per-epoch total loss; used to judge the training
// trend without reacting to per-batch jitter.
inline std::vector<double> smoothed_total_loss(
    const std::vector<EpochStats>& history, int window) {
  std::vector<double> out;
  if (window < 1 || history.empty()) return out;
  for (std::size_t i = 0; i + window <= history.size(); ++i) {
    double s = 0.0;
    for (int j = 0; j < window; ++j) s += history[i + j].total;
    out.push_back(s / window);
  }
  return out;
}

// Central-difference audit of the full backward path (convolutions, head
// sigmoids, box loss, and the configured objectness variant including its
// selection masking). Returns the max relative error over `sample_count`
// randomly chosen parameters. Batches where a probe step flips the rank
// selection are rejected: the loss is not differentiable across a
// selection boundary, so the comparison would be meaningless there.
inline double audit_gradients(const DetectorModel& model,
                              const std::vector<const Frame*>& batch,
                              const TrainConfig& cfg, int sample_count = 120,
                              std::uint64_t seed = 1234, double step = 1e-5) {
  cfg.validate();
  if (sample_count < 1)
    throw ConfigError("audit_gradients: sample_count must be >= 1");

  std::vector<double> grad(model.params.size(), 0.0);
  const BatchLoss base = batch_loss_and_grad(model, batch, cfg, &grad);
  const bool mined = base.mask.has_value();

  DetectorModel probe = model;
  Rng rng(seed);
  double max_rel = 0.0;
  for (int k = 0; k < sample_count; ++k) {
    const std::size_t idx = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(model.params.size()) - 1));
    probe.params[idx] = model.params[idx] + step;
    const BatchLoss up = batch_loss_and_grad(probe, batch, cfg, nullptr);
    probe.params[idx] = model.params[idx] - step;
    const BatchLoss dn = batch_loss_and_grad(probe, batch, cfg, nullptr);
    probe.params[idx] = model.params[idx];

    if (mined && (!detail::same_selection_sets(up.mask, base.mask) ||
                  !detail::same_selection_sets(dn.mask, base.mask)))
      throw NumericError(
          "audit_gradients: selection boundary tie at parameter " +
          std::to_string(idx) + "; choose a batch with clearer margins");

    const double fd = (up.total - dn.total) / (2.0 * step);
    const double rel =
        std::abs(grad[idx] - fd) / std::max(1.0, std::abs(grad[idx]));
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace hardmine
