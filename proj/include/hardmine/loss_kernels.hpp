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
#include <stdexcept>

#include "hardmine/loss_config.hpp"

namespace hardmine {

// One cell's objectness loss and its first derivative with respect to the
// predicted probability p. Every kernel below works on the two-sided form:
// with p_t = p for a positive cell and p_t = 1-p for a negative one, the
// loss is a function of p_t and the derivative is chained through
// dp_t/dp = +/-1.
//
// p_t is clamped to [eps, 1-eps] before taking logs; inside the clamped
// regions the derivative is defined as exactly 0, which keeps central
// finite differences consistent with the analytic value as long as check
// points stay at least one step away from the bounds.
struct CellLoss {
  double value = 0.0;
  double d_dp = 0.0;
};

namespace detail {

inline void require_finite_probability(double p, const char* who) {
  if (!std::isfinite(p))
    throw std::domain_error(std::string(who) + ": non-finite probability");
}

inline double clamp_prob(double q, double eps) {
  if (q < eps) return eps;
  if (q > 1.0 - eps) return 1.0 - eps;
  return q;
}

}  // namespace detail

// Two-sided cross-entropy: -log(p_t).
inline CellLoss ce_loss(double p, double t, double eps = 1e-7) {
  detail::require_finite_probability(p, "ce_loss");
  const bool positive = t > 0.5;
  const double sign = positive ? 1.0 : -1.0;
  const double pt_raw = positive ? p : 1.0 - p;
  const double pt = detail::clamp_prob(pt_raw, eps);
  CellLoss out;
  out.value = -std::log(pt);
  const bool clamped = pt_raw < eps || pt_raw > 1.0 - eps;
  out.d_dp = clamped ? 0.0 : (-sign) / pt;
  return out;
}

// Two-sided focal loss: -alpha_t (1-p_t)^gamma log(p_t) with
// alpha_t = alpha for positives and 1-alpha for negatives.
//
// Derivative in p_t: alpha_t [gamma (1-p_t)^(gamma-1) log(p_t)
//                             - (1-p_t)^gamma / p_t],
// strictly negative on (eps, 1-eps), so the loss is strictly decreasing in
// p_t. For gamma < 1 the first term diverges as p_t -> 1; the clamp keeps
// it finite. gamma == 0 is handled explicitly so the expression reduces
// bit-exactly to alpha_t * ce_loss.
inline CellLoss focal_loss(double p, double t, double alpha, double gamma,
                           double eps = 1e-7) {
  detail::require_finite_probability(p, "focal_loss");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("focal_loss: alpha must lie in (0,1)");
  if (!(gamma >= 0.0))
    throw std::invalid_argument("focal_loss: gamma must be >= 0");
  const bool positive = t > 0.5;
  const double sign = positive ? 1.0 : -1.0;
  const double at = positive ? alpha : 1.0 - alpha;
  const double pt_raw = positive ? p : 1.0 - p;
  const double pt = detail::clamp_prob(pt_raw, eps);
  const double one_m = 1.0 - pt;  // >= eps by the clamp
  const double log_pt = std::log(pt);
  const double mod = gamma == 0.0 ? 1.0 : std::pow(one_m, gamma);

  CellLoss out;
  out.value = -at * mod * log_pt;
  const bool clamped = pt_raw < eps || pt_raw > 1.0 - eps;
  if (clamped) {
    out.d_dp = 0.0;
  } else {
    const double focus_term =
        gamma == 0.0 ? 0.0 : gamma * std::pow(one_m, gamma - 1.0) * log_pt;
    out.d_dp = at * (focus_term - mod / pt) * sign;
  }
  return out;
}

// Focal loss scaled by the balancing weight xi. Value and derivative are
// exactly xi times the focal counterparts.
inline CellLoss balanced_focal_loss(double p, double t, const LossConfig& cfg) {
  CellLoss f = focal_loss(p, t, cfg.alpha, cfg.gamma, cfg.eps);
  f.value *= cfg.xi;
  f.d_dp *= cfg.xi;
  return f;
}

// Central-difference check of a cell kernel's derivative at (p, t).
// Returns |analytic - estimate| / max(1, |analytic|). Points within 2h of
// either probability bound are rejected: there the clamp makes the loss
// locally flat and the comparison meaningless.
template <typename Op>
double grad_check_cell(Op&& op, double p, double t, double h = 1e-5) {
  if (!(p >= 2.0 * h && p <= 1.0 - 2.0 * h))
    throw std::domain_error("grad_check_cell: p too close to clamp boundary");
  const CellLoss at_p = op(p, t);
  const double fwd = op(p + h, t).value;
  const double bwd = op(p - h, t).value;
  const double estimate = (fwd - bwd) / (2.0 * h);
  return std::abs(at_p.d_dp - estimate) /
         std::max(1.0, std::abs(at_p.d_dp));
}

}  // namespace hardmine
