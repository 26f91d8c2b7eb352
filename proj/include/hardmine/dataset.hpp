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
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "hardmine/errors.hpp"
#include "hardmine/geometry.hpp"
#include "hardmine/rng.hpp"

namespace hardmine {

// Synthetic scene description. One bright filled disc is the target;
// distractors (smaller discs and thin bars) share its intensity range so
// detectors confuse them, which is what creates hard frames. The seed
// fully determines every pixel.
struct SceneSpec {
  int image_size = 64;         // square, pixels
  double presence_prob = 0.7;  // probability a frame contains the target
  int target_size_min = 6;     // target box side, pixels
  int target_size_max = 14;
  int distractor_min = 0;
  int distractor_max = 3;
  double noise = 0.05;  // stddev of additive background noise
  std::uint64_t seed = 7;

  void validate() const {
    if (image_size <= 0) throw ConfigError("scene.image_size must be > 0");
    if (!(presence_prob >= 0.0 && presence_prob <= 1.0))
      throw ConfigError("scene.presence_prob must lie in [0,1]");
    if (target_size_min < 2 || target_size_max < target_size_min)
      throw ConfigError("scene.target_size range invalid");
    if (target_size_max >= image_size)
      throw ConfigError("scene.target_size_max must be smaller than image_size");
    if (distractor_min < 0 || distractor_max < distractor_min)
      throw ConfigError("scene.distractor range invalid");
    if (!(noise >= 0.0)) throw ConfigError("scene.noise must be >= 0");
  }
};

// One frame: 8-bit grayscale pixels, row-major, plus the optional target
// box in pixel coordinates.
struct Frame {
  std::int64_t frame_id = 0;
  int image_size = 0;
  std::vector<std::uint8_t> pixels;
  std::optional<Box> box;

  double pixel(int y, int x) const {
    return pixels[static_cast<std::size_t>(y) * image_size + x] / 255.0;
  }
};

struct Dataset {
  int image_size = 0;
  std::vector<Frame> frames;
};

namespace detail {

inline void draw_disc(std::vector<double>& img, int size, double cx, double cy,
                      double r, double intensity) {
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - r)) - 1);
  const int x1 = std::min(size - 1, static_cast<int>(std::ceil(cx + r)) + 1);
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - r)) - 1);
  const int y1 = std::min(size - 1, static_cast<int>(std::ceil(cy + r)) + 1);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double dx = x + 0.5 - cx;
      const double dy = y + 0.5 - cy;
      if (dx * dx + dy * dy <= r * r)
        img[static_cast<std::size_t>(y) * size + x] =
            std::max(img[static_cast<std::size_t>(y) * size + x], intensity);
    }
}

inline void draw_bar(std::vector<double>& img, int size, int x, int y, int len,
                     int thick, bool horizontal, double intensity) {
  const int w = horizontal ? len : thick;
  const int h = horizontal ? thick : len;
  for (int yy = y; yy < std::min(size, y + h); ++yy)
    for (int xx = x; xx < std::min(size, x + w); ++xx)
      if (yy >= 0 && xx >= 0)
        img[static_cast<std::size_t>(yy) * size + xx] =
            std::max(img[static_cast<std::size_t>(yy) * size + xx], intensity);
}

}  // namespace detail

// Deterministic synthetic frames: identical (spec, count) always produces
// bit-identical pixels and boxes. Each frame holds zero or one target.
inline Dataset generate_dataset(const SceneSpec& spec, int count) {
  spec.validate();
  if (count < 1) throw ConfigError("generate_dataset: count must be >= 1");

  Rng rng(spec.seed);
  Dataset data;
  data.image_size = spec.image_size;
  data.frames.reserve(count);
  const int size = spec.image_size;
  const std::size_t npx = static_cast<std::size_t>(size) * size;

  for (int f = 0; f < count; ++f) {
    std::vector<double> img(npx, 0.12);  // dim background plate

    // Distractors first so the target stays on top when they overlap.
    const int n_distr =
        static_cast<int>(rng.uniform_int(spec.distractor_min, spec.distractor_max));
    for (int d = 0; d < n_distr; ++d) {
      const double intensity = rng.uniform(0.50, 0.85);
      if (rng.bernoulli(0.5)) {
        // Small disc, strictly below the target size range.
        const double r =
            rng.uniform(1.0, std::max(1.2, spec.target_size_min / 2.0 - 1.0));
        const double cx = rng.uniform(r, size - r);
        const double cy = rng.uniform(r, size - r);
        detail::draw_disc(img, size, cx, cy, r, intensity);
      } else {
        // Thin bar, target-bright but elongated.
        const int len = static_cast<int>(
            rng.uniform_int(spec.target_size_min, spec.target_size_max));
        const int x = static_cast<int>(rng.uniform_int(0, size - len));
        const int y = static_cast<int>(rng.uniform_int(0, size - len));
        detail::draw_bar(img, size, x, y, len, 1, rng.bernoulli(0.5),
                         intensity);
      }
    }

    // Target intensity spans bright to faint; the faint end close to the
    // noise floor is what makes some frames genuinely hard.
    std::optional<Box> box;
    if (rng.bernoulli(spec.presence_prob)) {
      const double r =
          rng.uniform(spec.target_size_min / 2.0, spec.target_size_max / 2.0);
      const double margin = r + 1.0;
      const double cx = rng.uniform(margin, size - margin);
      const double cy = rng.uniform(margin, size - margin);
      const double intensity = rng.uniform(0.40, 0.95);
      detail::draw_disc(img, size, cx, cy, r, intensity);
      box = Box{cx - r, cy - r, cx + r, cy + r};
    }

    // Additive noise, then quantize to 8 bits.
    Frame frame;
    frame.frame_id = f;
    frame.image_size = size;
    frame.pixels.resize(npx);
    for (std::size_t i = 0; i < npx; ++i) {
      const double v =
          std::clamp(img[i] + spec.noise * rng.normal(), 0.0, 1.0);
      frame.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    frame.box = box;
    data.frames.push_back(std::move(frame));
  }
  return data;
}

}  // namespace hardmine
