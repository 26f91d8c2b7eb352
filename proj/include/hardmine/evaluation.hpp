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
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hardmine/errors.hpp"
#include "hardmine/geometry.hpp"

namespace hardmine {

// One scored box for one frame.
struct Detection {
  std::int64_t frame_id = 0;
  Box box;
  double confidence = 0.0;
};

// Ground truth for one frame: at most one object.
struct FrameGt {
  std::int64_t frame_id = 0;
  std::optional<Box> box;
};

enum class Verdict { kTp, kFp, kTn, kFn };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::kTp: return "TP";
    case Verdict::kFp: return "FP";
    case Verdict::kTn: return "TN";
    case Verdict::kFn: return "FN";
  }
  return "??";
}

struct FrameOutcome {
  std::int64_t frame_id = 0;
  Verdict verdict = Verdict::kTn;
};

// Joint verdict of two methods on the same frame.
struct OutcomePair {
  std::int64_t frame_id = 0;
  Verdict m1 = Verdict::kTn;
  Verdict m2 = Verdict::kTn;
};

struct EvalConfig {
  double conf_thr = 0.5;
  double iou_thr = 0.5;
  double min_confidence = 0.05;  // export floor for raw detections

  void validate() const {
    if (!(conf_thr >= 0.0 && conf_thr <= 1.0))
      throw ConfigError("eval.conf_thr must lie in [0,1]");
    if (!(iou_thr >= 0.0 && iou_thr <= 1.0))
      throw ConfigError("eval.iou_thr must lie in [0,1]");
    if (!(min_confidence >= 0.0 && min_confidence <= 1.0))
      throw ConfigError("eval.min_confidence must lie in [0,1]");
  }
};

// Frame-level verdict from the highest-confidence detection. Thresholds
// are strict: confidence or IoU exactly at the threshold counts as below.
//
//   conf > thr, gt present, IoU > thr  ->  TP
//   conf > thr, otherwise              ->  FP
//   no detection above thr, gt present ->  FN
//   no detection above thr, no gt      ->  TN
inline FrameOutcome classify_frame(std::int64_t frame_id,
                                   const std::vector<Detection>& dets,
                                   const std::optional<Box>& gt,
                                   double conf_thr = 0.5,
                                   double iou_thr = 0.5) {
  for (const Detection& d : dets)
    if (d.frame_id != frame_id)
      throw DataError("classify_frame: detection from a different frame");
  const Detection* best = nullptr;
  for (const Detection& d : dets)
    if (best == nullptr || d.confidence > best->confidence) best = &d;

  FrameOutcome out;
  out.frame_id = frame_id;
  if (best != nullptr && best->confidence > conf_thr) {
    out.verdict = (gt.has_value() && iou(best->box, *gt) > iou_thr)
                      ? Verdict::kTp
                      : Verdict::kFp;
  } else {
    out.verdict = gt.has_value() ? Verdict::kFn : Verdict::kTn;
  }
  return out;
}

// Joins two outcome lists on frame id. Both methods must cover exactly the
// same frames; the error message lists the difference.
inline std::vector<OutcomePair> pair_outcomes(
    const std::vector<FrameOutcome>& m1,
    const std::vector<FrameOutcome>& m2) {
  std::map<std::int64_t, Verdict> right;
  for (const FrameOutcome& o : m2) right[o.frame_id] = o.verdict;

  std::vector<OutcomePair> pairs;
  std::vector<std::int64_t> only_m1, only_m2;
  std::map<std::int64_t, Verdict> left;
  for (const FrameOutcome& o : m1) left[o.frame_id] = o.verdict;
  for (const auto& [id, v] : left) {
    auto it = right.find(id);
    if (it == right.end()) {
      only_m1.push_back(id);
    } else {
      pairs.push_back(OutcomePair{id, v, it->second});
    }
  }
  for (const auto& [id, v] : right)
    if (left.find(id) == left.end()) only_m2.push_back(id);

  if (!only_m1.empty() || !only_m2.empty()) {
    std::ostringstream msg;
    msg << "pair_outcomes: frame sets differ;";
    auto list = [&msg](const char* label, const std::vector<std::int64_t>& v) {
      if (v.empty()) return;
      msg << " " << label << " only:";
      for (std::size_t i = 0; i < v.size() && i < 8; ++i) msg << " " << v[i];
      if (v.size() > 8) msg << " ... (" << v.size() << " total)";
      msg << ";";
    };
    list("m1", only_m1);
    list("m2", only_m2);
    throw DataError(msg.str());
  }
  return pairs;
}

// Round half-up to two decimals. Table percentages use this convention.
inline double round_half_up2(double x) {
  return std::floor(x * 100.0 + 0.5) / 100.0;
}

// The seven joint categories reported by the head-to-head comparison, in
// display order: gains for M2 first, losses for M2, then agreements.
inline constexpr std::array<std::pair<Verdict, Verdict>, 7> kPairCategories = {
    {{Verdict::kFn, Verdict::kTp},
     {Verdict::kFp, Verdict::kTn},
     {Verdict::kTp, Verdict::kFn},
     {Verdict::kTn, Verdict::kFp},
     {Verdict::kFp, Verdict::kFp},
     {Verdict::kFn, Verdict::kFn},
     {Verdict::kTp, Verdict::kTp}}};

// Counts and percentages of joint verdicts over a frame set. Percentages
// are 100*count/total over the pair total, rounded half-up to two
// decimals. TN-TN pairs and any residual combination are counted under
// "other" rather than dropped, so per-category counts always sum to the
// total.
struct PairwiseReport {
  std::array<std::array<std::int64_t, 4>, 4> counts{};  // [m1][m2]
  std::int64_t total = 0;

  std::int64_t count(Verdict a, Verdict b) const {
    return counts[static_cast<int>(a)][static_cast<int>(b)];
  }
  double percentage(Verdict a, Verdict b) const {
    return round_half_up2(100.0 * static_cast<double>(count(a, b)) /
                          static_cast<double>(total));
  }
  std::int64_t other_count() const {
    std::int64_t named = 0;
    for (const auto& [a, b] : kPairCategories) named += count(a, b);
    return total - named;
  }
  double other_percentage() const {
    return round_half_up2(100.0 * static_cast<double>(other_count()) /
                          static_cast<double>(total));
  }

  // Hard-example balance for M2 over M1: frames gained (M1 failures turned
  // into successes) minus frames lost.
  std::int64_t net_hard_example_delta() const {
    return (count(Verdict::kFn, Verdict::kTp) +
            count(Verdict::kFp, Verdict::kTn)) -
           (count(Verdict::kTp, Verdict::kFn) +
            count(Verdict::kTn, Verdict::kFp));
  }
};

inline PairwiseReport pairwise_report(const std::vector<OutcomePair>& pairs) {
  if (pairs.empty()) throw DataError("pairwise_report: no pairs");
  PairwiseReport rep;
  for (const OutcomePair& p : pairs)
    ++rep.counts[static_cast<int>(p.m1)][static_cast<int>(p.m2)];
  rep.total = static_cast<std::int64_t>(pairs.size());
  return rep;
}

// Builds a report directly from category counts (used when reproducing
// published tables).
inline PairwiseReport pairwise_report_from_counts(
    const std::vector<std::pair<std::pair<Verdict, Verdict>, std::int64_t>>&
        category_counts) {
  PairwiseReport rep;
  for (const auto& [cat, n] : category_counts) {
    rep.counts[static_cast<int>(cat.first)][static_cast<int>(cat.second)] += n;
    rep.total += n;
  }
  if (rep.total == 0) throw DataError("pairwise_report: no pairs");
  return rep;
}

struct PrSummary {
  std::optional<double> precision;  // TP / (TP + FP), absent if no positives
  std::optional<double> recall;     // TP / (TP + FN), absent if no gt frames
};

inline PrSummary precision_recall(const std::vector<FrameOutcome>& outcomes) {
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (const FrameOutcome& o : outcomes) {
    if (o.verdict == Verdict::kTp) ++tp;
    if (o.verdict == Verdict::kFp) ++fp;
    if (o.verdict == Verdict::kFn) ++fn;
  }
  PrSummary out;
  if (tp + fp > 0)
    out.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0)
    out.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return out;
}

namespace detail {

// Ranks detections by descending confidence (ties: lower frame id, then
// original order) and marks each one TP or FP by greedy one-to-one
// matching against the ground truth of its frame at the given threshold.
// Matching is strict: IoU must exceed iou_thr.
struct RankedFlags {
  std::vector<bool> is_tp;  // in rank order
  std::size_t num_gt = 0;
};

inline RankedFlags rank_and_match(const std::vector<Detection>& dets,
                                  const std::vector<FrameGt>& gts,
                                  double iou_thr) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (dets[a].confidence != dets[b].confidence)
                       return dets[a].confidence > dets[b].confidence;
                     return dets[a].frame_id < dets[b].frame_id;
                   });

  std::map<std::int64_t, std::vector<const Box*>> gt_by_frame;
  std::size_t num_gt = 0;
  for (const FrameGt& g : gts)
    if (g.box.has_value()) {
      gt_by_frame[g.frame_id].push_back(&*g.box);
      ++num_gt;
    }

  std::map<std::int64_t, std::vector<bool>> used;
  for (const auto& [id, boxes] : gt_by_frame)
    used[id].assign(boxes.size(), false);

  RankedFlags out;
  out.num_gt = num_gt;
  out.is_tp.reserve(dets.size());
  for (std::size_t idx : order) {
    const Detection& d = dets[idx];
    bool matched = false;
    auto it = gt_by_frame.find(d.frame_id);
    if (it != gt_by_frame.end()) {
      double best = -1.0;
      std::size_t best_j = 0;
      for (std::size_t j = 0; j < it->second.size(); ++j) {
        if (used[d.frame_id][j]) continue;
        const double v = iou(d.box, *it->second[j]);
        if (v > best) {
          best = v;
          best_j = j;
        }
      }
      if (best > iou_thr) {
        used[d.frame_id][best_j] = true;
        matched = true;
      }
    }
    out.is_tp.push_back(matched);
  }
  return out;
}

}  // namespace detail

// Single-class average precision: area under the precision-recall curve
// with the interpolated (upper-envelope) precision, integrated over all
// recall points. Absent when there are no ground-truth boxes; 0 when there
// are boxes but no detections.
inline std::optional<double> average_precision(
    const std::vector<Detection>& dets, const std::vector<FrameGt>& gts,
    double iou_thr) {
  const detail::RankedFlags ranked = detail::rank_and_match(dets, gts, iou_thr);
  if (ranked.num_gt == 0) return std::nullopt;
  if (ranked.is_tp.empty()) return 0.0;

  const std::size_t m = ranked.is_tp.size();
  std::vector<double> precision(m), recall(m);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (ranked.is_tp[i]) ++tp;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(ranked.num_gt);
  }

  // Upper precision envelope from the right, then rectangle sum over the
  // recall increments.
  std::vector<double> envelope(m);
  double running = 0.0;
  for (std::size_t i = m; i-- > 0;) {
    running = std::max(running, precision[i]);
    envelope[i] = running;
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    ap += (recall[i] - prev_recall) * envelope[i];
    prev_recall = recall[i];
  }
  return ap;
}

inline const std::array<double, 10>& map_iou_thresholds() {
  static const std::array<double, 10> kThresholds = {
      0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95};
  return kThresholds;
}

// Mean AP over IoU thresholds 0.50:0.05:0.95.
inline std::optional<double> mean_average_precision_50_95(
    const std::vector<Detection>& dets, const std::vector<FrameGt>& gts) {
  double sum = 0.0;
  for (double thr : map_iou_thresholds()) {
    const auto ap = average_precision(dets, gts, thr);
    if (!ap.has_value()) return std::nullopt;
    sum += *ap;
  }
  return sum / static_cast<double>(map_iou_thresholds().size());
}

// Detection quality summary; all values are fractions in [0,1], rendered
// as percentages by the report writers.
struct MetricsReport {
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> map50;
  std::optional<double> map50_95;
};

// Frame-level P/R at the working point plus AP metrics over the full
// ranked detection set.
inline MetricsReport compute_metrics(const std::vector<Detection>& dets,
                                     const std::vector<FrameGt>& gts,
                                     const EvalConfig& cfg = {}) {
  cfg.validate();
  std::map<std::int64_t, std::vector<Detection>> by_frame;
  for (const Detection& d : dets) by_frame[d.frame_id].push_back(d);

  std::vector<FrameOutcome> outcomes;
  outcomes.reserve(gts.size());
  for (const FrameGt& g : gts) {
    auto it = by_frame.find(g.frame_id);
    static const std::vector<Detection> kNone;
    const std::vector<Detection>& frame_dets =
        it == by_frame.end() ? kNone : it->second;
    outcomes.push_back(classify_frame(g.frame_id, frame_dets, g.box,
                                      cfg.conf_thr, cfg.iou_thr));
  }

  const PrSummary pr = precision_recall(outcomes);
  MetricsReport rep;
  rep.precision = pr.precision;
  rep.recall = pr.recall;
  rep.map50 = average_precision(dets, gts, 0.5);
  rep.map50_95 = mean_average_precision_50_95(dets, gts);
  return rep;
}

// Outcomes for every ground-truth frame of one method's detections.
inline std::vector<FrameOutcome> classify_all(
    const std::vector<Detection>& dets, const std::vector<FrameGt>& gts,
    const EvalConfig& cfg = {}) {
  std::map<std::int64_t, std::vector<Detection>> by_frame;
  for (const Detection& d : dets) by_frame[d.frame_id].push_back(d);
  std::vector<FrameOutcome> outcomes;
  outcomes.reserve(gts.size());
  for (const FrameGt& g : gts) {
    auto it = by_frame.find(g.frame_id);
    static const std::vector<Detection> kNone;
    outcomes.push_back(classify_frame(
        g.frame_id, it == by_frame.end() ? kNone : it->second, g.box,
        cfg.conf_thr, cfg.iou_thr));
  }
  return outcomes;
}

}  // namespace hardmine
