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

#include <cstdio>
#include <iomanip>
#include <sstream>
#include <string>

#include "hardmine/evaluation.hpp"

namespace hardmine {

namespace detail {

inline std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string pct_or_dash(const std::optional<double>& v) {
  if (!v.has_value()) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * *v);
  return buf;
}

}  // namespace detail

// Head-to-head table: per-category frame counts and percentages of the
// pair total, plus everything that falls outside the seven named
// categories and the net hard-example balance for M2.
inline std::string render_pairwise_table(const PairwiseReport& rep,
                                         const std::string& name_m1 = "M1",
                                         const std::string& name_m2 = "M2") {
  std::ostringstream out;
  out << "Pairwise comparison, M1: " << name_m1 << "  M2: " << name_m2 << "\n";
  out << std::left << std::setw(6) << "M1" << std::setw(6) << "M2"
      << std::right << std::setw(8) << "# Fr." << std::setw(10) << "Fr. %"
      << "\n";
  double pct_sum = 0.0;
  for (const auto& [a, b] : kPairCategories) {
    const double pct = rep.percentage(a, b);
    pct_sum += pct;
    out << std::left << std::setw(6) << to_string(a) << std::setw(6)
        << to_string(b) << std::right << std::setw(8) << rep.count(a, b)
        << std::setw(10) << detail::fixed2(pct) << "\n";
  }
  pct_sum += rep.other_percentage();
  out << std::left << std::setw(6) << "other" << std::setw(6) << ""
      << std::right << std::setw(8) << rep.other_count() << std::setw(10)
      << detail::fixed2(rep.other_percentage()) << "\n";
  out << std::left << std::setw(6) << "total" << std::setw(6) << ""
      << std::right << std::setw(8) << rep.total << std::setw(10)
      << detail::fixed2(pct_sum) << "\n";
  out << "net hard-example delta (M2 gains - M2 losses): "
      << rep.net_hard_example_delta() << "\n";
  return out.str();
}

inline std::string render_pairwise_csv(const PairwiseReport& rep) {
  std::ostringstream out;
  out << "m1,m2,count,percent\n";
  for (const auto& [a, b] : kPairCategories)
    out << to_string(a) << "," << to_string(b) << "," << rep.count(a, b) << ","
        << detail::fixed2(rep.percentage(a, b)) << "\n";
  out << "other,," << rep.other_count() << ","
      << detail::fixed2(rep.other_percentage()) << "\n";
  out << "total,," << rep.total << ",\n";
  out << "net_delta,," << rep.net_hard_example_delta() << ",\n";
  return out.str();
}

// Detection metric summary, one method per row, percentages with one
// decimal as in the usual benchmark tables.
inline std::string render_metrics_table(const MetricsReport& rep,
                                        const std::string& method) {
  std::ostringstream out;
  out << std::left << std::setw(18) << "Method" << std::right << std::setw(8)
      << "Prec." << std::setw(8) << "Rec." << std::setw(10) << "mAP_0.5"
      << std::setw(14) << "mAP_0.5:0.95" << "\n";
  out << std::left << std::setw(18) << method << std::right << std::setw(8)
      << detail::pct_or_dash(rep.precision) << std::setw(8)
      << detail::pct_or_dash(rep.recall) << std::setw(10)
      << detail::pct_or_dash(rep.map50) << std::setw(14)
      << detail::pct_or_dash(rep.map50_95) << "\n";
  return out.str();
}

inline std::string render_metrics_csv(const MetricsReport& rep,
                                      const std::string& method) {
  auto field = [](const std::optional<double>& v) -> std::string {
    if (!v.has_value()) return "";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", 100.0 * *v);
    return buf;
  };
  std::ostringstream out;
  out << "method,precision_pct,recall_pct,map50_pct,map50_95_pct\n";
  out << method << "," << field(rep.precision) << "," << field(rep.recall)
      << "," << field(rep.map50) << "," << field(rep.map50_95) << "\n";
  return out.str();
}

}  // namespace hardmine
