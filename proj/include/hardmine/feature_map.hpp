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
#include <cstddef>
#include <string>
#include <vector>

#include "hardmine/errors.hpp"

namespace hardmine {

inline constexpr int kNumScales = 3;  // small / medium / large object maps

// One output grid of the detector for a mini-batch: N images of H x W
// cells, one anchor per cell. Cells are stored row-major per image, images
// concatenated. Box channels are (cx, cy, w, h) offsets, 4 per cell; the
// box arrays may be left empty when only objectness is needed.
struct ScaleGrid {
  int images = 0;
  int height = 0;
  int width = 0;
  std::vector<double> obj_p;       // predicted objectness, each in [0,1]
  std::vector<double> obj_t;       // targets, each 0 or 1
  std::vector<double> box_pred;    // 4 per cell, or empty
  std::vector<double> box_target;  // 4 per cell (meaningful where t=1), or empty

  int cells_per_image() const { return height * width; }
  std::size_t total_cells() const {
    return static_cast<std::size_t>(images) * cells_per_image();
  }
  std::size_t cell_index(int image, int row, int col) const {
    return static_cast<std::size_t>(image) * cells_per_image() +
           static_cast<std::size_t>(row) * width + col;
  }

  void validate(const char* where = "ScaleGrid") const {
    const std::string w = where;
    if (images < 0 || height <= 0 || width <= 0)
      throw DataError(w + ": bad grid dimensions");
    if (obj_p.size() != total_cells() || obj_t.size() != total_cells())
      throw DataError(w + ": objectness arrays do not match grid dimensions");
    if (!box_pred.empty() && box_pred.size() != 4 * total_cells())
      throw DataError(w + ": box_pred does not match grid dimensions");
    if (!box_target.empty() && box_target.size() != 4 * total_cells())
      throw DataError(w + ": box_target does not match grid dimensions");
    for (double p : obj_p)
      if (!(p >= 0.0 && p <= 1.0))
        throw DataError(w + ": objectness probability outside [0,1]");
    for (double t : obj_t)
      if (t != 0.0 && t != 1.0)
        throw DataError(w + ": objectness target not in {0,1}");
  }
};

// Predictions and targets for all three scales of one mini-batch.
struct FeatureMapBatch {
  std::array<ScaleGrid, kNumScales> scales;

  void validate() const {
    int images = scales[0].images;
    for (int s = 0; s < kNumScales; ++s) {
      scales[s].validate("FeatureMapBatch");
      if (scales[s].images != images)
        throw DataError("FeatureMapBatch: scales disagree on batch size");
    }
  }
};

}  // namespace hardmine
