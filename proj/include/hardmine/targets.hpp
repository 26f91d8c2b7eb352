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
#include <optional>
#include <vector>

#include "hardmine/errors.hpp"
#include "hardmine/feature_map.hpp"
#include "hardmine/geometry.hpp"

namespace hardmine {

// Three square output grids with one anchor per cell. Strides must divide
// the image size exactly and successive grids must halve (the detector
// derives them with stride-2 convolutions).
struct GridSpec {
  int image_size = 64;
  std::array<int, kNumScales> cells = {8, 4, 2};  // per-side cell counts

  int stride(int scale) const { return image_size / cells[scale]; }

  void validate() const {
    if (image_size <= 0) throw ConfigError("grid.image_size must be > 0");
    for (int s = 0; s < kNumScales; ++s) {
      if (cells[s] <= 0) throw ConfigError("grid.cells must be > 0");
      if (image_size % cells[s] != 0)
        throw ConfigError("grid.cells must divide image_size exactly");
    }
    if (cells[1] * 2 != cells[0] || cells[2] * 2 != cells[1])
      throw ConfigError("grid.cells must halve from scale to scale");
    const int reduction = image_size / cells[0];
    if ((reduction & (reduction - 1)) != 0 || reduction < 2)
      throw ConfigError(
          "grid: image_size / cells[0] must be a power of two >= 2");
  }

  bool operator==(const GridSpec&) const = default;
};

// Objectness and box regression targets for one image on one scale.
struct ScaleTargets {
  std::vector<double> obj_t;       // H*W, exactly one 1 when a box exists
  std::vector<double> box_target;  // 4 per cell: cx,cy offsets and w,h
};

// The cell containing the box center gets t=1 and the regression target
// (offsets within the cell in [0,1), width/height as fractions of the
// image); everything else stays 0. An empty frame yields all zeros.
inline std::array<ScaleTargets, kNumScales> build_targets(
    const std::optional<Box>& gt, const GridSpec& grid) {
  grid.validate();
  std::array<ScaleTargets, kNumScales> out;
  for (int s = 0; s < kNumScales; ++s) {
    const int n = grid.cells[s] * grid.cells[s];
    out[s].obj_t.assign(n, 0.0);
    out[s].box_target.assign(4 * static_cast<std::size_t>(n), 0.0);
    if (!gt.has_value()) continue;

    if (!(gt->x1 >= 0 && gt->y1 >= 0 && gt->x2 <= grid.image_size &&
          gt->y2 <= grid.image_size && gt->x1 < gt->x2 && gt->y1 < gt->y2))
      throw DataError("build_targets: box outside image bounds");

    const double cx = gt->center_x();
    const double cy = gt->center_y();
    const int stride = grid.stride(s);
    const int col = std::min(grid.cells[s] - 1,
                             static_cast<int>(std::floor(cx / stride)));
    const int row = std::min(grid.cells[s] - 1,
                             static_cast<int>(std::floor(cy / stride)));
    const int cell = row * grid.cells[s] + col;
    out[s].obj_t[cell] = 1.0;
    out[s].box_target[4 * cell + 0] = cx / stride - col;
    out[s].box_target[4 * cell + 1] = cy / stride - row;
    out[s].box_target[4 * cell + 2] = gt->width() / grid.image_size;
    out[s].box_target[4 * cell + 3] = gt->height() / grid.image_size;
  }
  return out;
}

}  // namespace hardmine
