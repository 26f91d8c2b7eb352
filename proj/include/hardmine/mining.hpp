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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "hardmine/feature_map.hpp"
#include "hardmine/loss_kernels.hpp"

namespace hardmine {

// Indices of the cells kept for one image on one scale, ordered by
// descending loss value, ties broken by lower flattened index.
struct SelectionEntry {
  std::vector<std::uint32_t> indices;

  bool operator==(const SelectionEntry&) const = default;
};

// Per scale, per image: which cells survive the rank selection.
struct SelectionMask {
  std::array<std::vector<SelectionEntry>, kNumScales> scales;

  bool operator==(const SelectionMask&) const = default;
};

// Number of cells kept from n: max(1, ceil(rank_b * n)). The floor of 1
// keeps the selection non-empty on degenerate 1x1 grids.
inline std::size_t selection_count(double rank_b, std::size_t n) {
  const auto k = static_cast<std::size_t>(
      std::ceil(rank_b * static_cast<double>(n)));
  return std::max<std::size_t>(1, k);
}

// Splits per-cell losses (same layout as the grid) into one vector per
// image, each of length H*W in row-major cell order.
inline std::vector<std::vector<double>> flatten_per_image(
    const ScaleGrid& grid, const std::vector<double>& cell_losses) {
  if (cell_losses.size() != grid.total_cells())
    throw DataError("flatten_per_image: losses do not match grid dimensions");
  const int n = grid.cells_per_image();
  std::vector<std::vector<double>> out(grid.images);
  for (int i = 0; i < grid.images; ++i) {
    const auto* begin = cell_losses.data() + static_cast<std::size_t>(i) * n;
    out[i].assign(begin, begin + n);
  }
  return out;
}

// Indices of the k = max(1, ceil(rank_b * n)) largest losses, sorted by
// descending value, ties by lower index first. Deterministic across runs
// and platforms.
inline SelectionEntry select_top_b(const std::vector<double>& losses,
                                   double rank_b) {
  if (losses.empty()) throw DataError("select_top_b: empty loss vector");
  if (!(rank_b > 0.0 && rank_b <= 1.0))
    throw ConfigError("select_top_b: rank factor must lie in (0,1]");
  const std::size_t n = losses.size();
  const std::size_t k = selection_count(rank_b, n);
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(),
            [&](std::uint32_t a, std::uint32_t b) {
              if (losses[a] != losses[b]) return losses[a] > losses[b];
              return a < b;
            });
  order.resize(k);
  return SelectionEntry{std::move(order)};
}

// Scalar objectness loss plus per-cell derivatives d(value)/dp in the same
// layout as the batch grids. For the rank-mined reductions, `mask` records
// the surviving cells and derivatives are exactly 0 elsewhere.
struct ObjectnessLoss {
  double value = 0.0;
  std::array<std::vector<double>, kNumScales> d_dp;
  std::optional<SelectionMask> mask;
};

// Default reduction: per scale, mean over each image's cells, then mean
// over images, then sum over the three scales. Summation runs in
// ascending cell order so the result is bit-reproducible.
template <typename Kernel>
ObjectnessLoss plain_objectness_loss(const FeatureMapBatch& batch,
                                     Kernel&& kernel) {
  batch.validate();
  ObjectnessLoss out;
  for (int s = 0; s < kNumScales; ++s) {
    const ScaleGrid& grid = batch.scales[s];
    const int n = grid.cells_per_image();
    out.d_dp[s].assign(grid.total_cells(), 0.0);
    double scale_sum = 0.0;
    for (int i = 0; i < grid.images; ++i) {
      const std::size_t base = static_cast<std::size_t>(i) * n;
      double image_sum = 0.0;
      for (int j = 0; j < n; ++j) {
        const CellLoss c = kernel(grid.obj_p[base + j], grid.obj_t[base + j]);
        image_sum += c.value;
        out.d_dp[s][base + j] =
            c.d_dp / (static_cast<double>(n) * grid.images);
      }
      scale_sum += image_sum / n;
    }
    out.value += scale_sum / grid.images;
  }
  return out;
}

// Loss-rank-mined reduction, per scale:
//   1. per-cell losses through `kernel`
//   2. flatten to one vector per image
//   3. sort each vector by loss, descending
//   4. keep the top rank_b fraction (at least one cell)
//   5. mean of each image's kept losses, then mean over images
//   6. sum the three scale means
// The selection is a hard, non-differentiable step: the mask is frozen and
// gradients flow only through kept cells, each contributing
// kernel derivative / (k * N). Kept losses are summed in ascending index
// order, so rank_b = 1 reproduces plain_objectness_loss bit-exactly.
template <typename Kernel>
ObjectnessLoss lrm_objectness_loss(const FeatureMapBatch& batch,
                                   const LossConfig& cfg, Kernel&& kernel) {
  if (!(cfg.rank_b > 0.0 && cfg.rank_b <= 1.0))
    throw ConfigError("lrm_objectness_loss: rank_b must lie in (0,1]");
  batch.validate();
  ObjectnessLoss out;
  out.mask.emplace();
  for (int s = 0; s < kNumScales; ++s) {
    const ScaleGrid& grid = batch.scales[s];
    const int n = grid.cells_per_image();
    out.d_dp[s].assign(grid.total_cells(), 0.0);
    out.mask->scales[s].resize(grid.images);

    std::vector<double> losses(grid.total_cells());
    std::vector<double> derivs(grid.total_cells());
    for (std::size_t j = 0; j < grid.total_cells(); ++j) {
      const CellLoss c = kernel(grid.obj_p[j], grid.obj_t[j]);
      losses[j] = c.value;
      derivs[j] = c.d_dp;
    }

    const auto per_image = flatten_per_image(grid, losses);
    double scale_sum = 0.0;
    for (int i = 0; i < grid.images; ++i) {
      SelectionEntry sel = select_top_b(per_image[i], cfg.rank_b);
      const std::size_t k = sel.indices.size();
      const std::size_t base = static_cast<std::size_t>(i) * n;

      std::vector<std::uint32_t> by_index(sel.indices);
      std::sort(by_index.begin(), by_index.end());
      double image_sum = 0.0;
      for (std::uint32_t idx : by_index) {
        image_sum += per_image[i][idx];
        out.d_dp[s][base + idx] =
            derivs[base + idx] / (static_cast<double>(k) * grid.images);
      }
      scale_sum += image_sum / k;
      out.mask->scales[s][i] = std::move(sel);
    }
    out.value += scale_sum / grid.images;
  }
  return out;
}

// Rank mining over balanced focal cell losses: the combined variant.
inline ObjectnessLoss combined_objectness_loss(const FeatureMapBatch& batch,
                                               const LossConfig& cfg) {
  return lrm_objectness_loss(batch, cfg, [&cfg](double p, double t) {
    return balanced_focal_loss(p, t, cfg);
  });
}

// Dispatch on the configured variant.
inline ObjectnessLoss objectness_loss(const FeatureMapBatch& batch,
                                      const LossConfig& cfg) {
  cfg.validate();
  switch (cfg.variant) {
    case Variant::kBce:
      return plain_objectness_loss(
          batch, [&cfg](double p, double t) { return ce_loss(p, t, cfg.eps); });
    case Variant::kFocal:
      return plain_objectness_loss(batch, [&cfg](double p, double t) {
        return focal_loss(p, t, cfg.alpha, cfg.gamma, cfg.eps);
      });
    case Variant::kBalancedFocal:
      return plain_objectness_loss(batch, [&cfg](double p, double t) {
        return balanced_focal_loss(p, t, cfg);
      });
    case Variant::kLrm:
      return lrm_objectness_loss(batch, cfg, [&cfg](double p, double t) {
        return ce_loss(p, t, cfg.eps);
      });
    case Variant::kCombined:
      return combined_objectness_loss(batch, cfg);
  }
  throw ConfigError("objectness_loss: unhandled variant");
}

}  // namespace hardmine
