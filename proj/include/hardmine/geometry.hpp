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
#include <stdexcept>

namespace hardmine {

// Axis-aligned box in pixel coordinates, corners (x1,y1) < (x2,y2).
struct Box {
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x1 + x2); }
  double center_y() const { return 0.5 * (y1 + y2); }
};

// Intersection area over union area; 0 for disjoint boxes. Zero-area boxes
// have no meaningful overlap ratio and are rejected.
inline double iou(const Box& a, const Box& b) {
  if (!(a.x1 < a.x2 && a.y1 < a.y2) || !(b.x1 < b.x2 && b.y1 < b.y2))
    throw std::domain_error("iou: degenerate box");
  const double iw =
      std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih =
      std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return inter / uni;
}

}  // namespace hardmine
