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

#include <string>

#include "hardmine/errors.hpp"

namespace hardmine {

// The five objectness-loss variants a detector can be trained with.
//
//   Bce           plain two-sided cross-entropy, mean-reduced
//   Focal         (1-p_t)^gamma modulated cross-entropy with alpha weighting
//   BalancedFocal focal scaled by the objectness balancing weight xi
//   Lrm           top-B loss-rank selection over cross-entropy cell losses
//   Combined      top-B loss-rank selection over balanced focal cell losses
enum class Variant { kBce, kFocal, kBalancedFocal, kLrm, kCombined };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::kBce: return "bce";
    case Variant::kFocal: return "focal";
    case Variant::kBalancedFocal: return "balanced_focal";
    case Variant::kLrm: return "lrm";
    case Variant::kCombined: return "combined";
  }
  return "unknown";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "bce" || s == "default") return Variant::kBce;
  if (s == "focal") return Variant::kFocal;
  if (s == "balanced_focal") return Variant::kBalancedFocal;
  if (s == "lrm") return Variant::kLrm;
  if (s == "combined") return Variant::kCombined;
  throw ConfigError("unknown loss variant: '" + s +
                    "' (expected bce|focal|balanced_focal|lrm|combined)");
}

// Hyperparameters for all loss variants. Defaults are the reference
// operating point: alpha 0.25, gamma 1.5, xi 30, rank factor 0.35.
//
// Fields not used by a variant are ignored: Bce reads none of them, Focal
// ignores xi and rank_b, BalancedFocal ignores rank_b, Lrm reads only
// rank_b and eps.
struct LossConfig {
  Variant variant = Variant::kCombined;
  double alpha = 0.25;   // focal correction weight for positive cells, (0,1)
  double gamma = 1.5;    // focal focus exponent, >= 0
  double xi = 30.0;      // objectness balancing weight, > 0
  double rank_b = 0.35;  // fraction of cells kept per image per map, (0,1]
  double eps = 1e-7;     // probability clamp bound, (0, 0.5)

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0))
      throw ConfigError("loss.alpha must lie in (0,1)");
    if (!(gamma >= 0.0)) throw ConfigError("loss.gamma must be >= 0");
    if (!(xi > 0.0)) throw ConfigError("loss.xi must be > 0");
    if (!(rank_b > 0.0 && rank_b <= 1.0))
      throw ConfigError("loss.rank_b must lie in (0,1]");
    if (!(eps > 0.0 && eps < 0.5))
      throw ConfigError("loss.eps must lie in (0,0.5)");
  }
};

}  // namespace hardmine
