// Copyright (c) 2026 The stutterkit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "stutter/error.hpp"
#include "stutter/labels.hpp"

namespace stutter {

/// Columns of the results table: R, P, B, I, F (class-wise recall) and TA (overall accuracy).
inline constexpr int kNumMetrics = kNumClasses + 1;
inline constexpr int kTotalAccuracy = kNumClasses;
inline constexpr std::array<std::string_view, kNumMetrics> kMetricNames = {"R", "P", "B", "I", "F", "TA"};

using MetricValues = std::array<double, kNumMetrics>;
using Confusion = std::array<std::array<long, kNumClasses>, kNumClasses>;  // [truth][predicted]

/// Percentages; a class absent from the truths is NaN (not applicable).
struct MetricsRow {
  MetricValues values{};
  std::array<long, kNumClasses> class_count{};
  std::array<long, kNumClasses> class_correct{};
  long evaluated = 0;
  long correct = 0;
};

inline MetricsRow per_class_accuracy(const std::vector<ClassLabel>& predictions, const std::vector<ClassLabel>& truths) {
  if (predictions.size() != truths.size())
    fail(ErrorCode::LengthMismatch, std::to_string(predictions.size()) + " predictions for " +
                                        std::to_string(truths.size()) + " truths");
  MetricsRow row;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const int t = code(truths[i]);
    ++row.class_count[t];
    if (predictions[i] == truths[i]) {
      ++row.class_correct[t];
      ++row.correct;
    }
  }
  row.evaluated = static_cast<long>(truths.size());
  for (int c = 0; c < kNumClasses; ++c)
    row.values[c] = row.class_count[c] ? 100.0 * row.class_correct[c] / row.class_count[c]
                                       : std::numeric_limits<double>::quiet_NaN();
  row.values[kTotalAccuracy] =
      row.evaluated ? 100.0 * row.correct / row.evaluated : std::numeric_limits<double>::quiet_NaN();
  return row;
}

inline Confusion confusion_matrix(const std::vector<ClassLabel>& predictions, const std::vector<ClassLabel>& truths) {
  if (predictions.size() != truths.size()) fail(ErrorCode::LengthMismatch, "predictions vs truths");
  Confusion m{};
  for (std::size_t i = 0; i < truths.size(); ++i) ++m[code(truths[i])][code(predictions[i])];
  return m;
}

/// Aggregate over folds and repeats.
struct MetricsTable {
  MetricValues mean{};    // mean over folds, then over repeats (NaN entries skipped)
  MetricValues stddev{};  // population std over all fold x repeat values
  MetricValues pooled{};  // from summed counts over every evaluated clip
  int folds = 0;
  int repeats = 0;
};

/// rows[r][f] is the fold-f result of repeat r.
inline MetricsTable aggregate(const std::vector<std::vector<MetricsRow>>& rows) {
  MetricsTable table;
  table.repeats = static_cast<int>(rows.size());
  table.folds = rows.empty() ? 0 : static_cast<int>(rows.front().size());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::array<long, kNumClasses> count{}, correct{};
  long evaluated = 0, total_correct = 0;
  for (int m = 0; m < kNumMetrics; ++m) {
    double repeat_sum = 0.0;
    int repeat_n = 0;
    std::vector<double> all;
    for (const auto& repeat : rows) {
      double sum = 0.0;
      int n = 0;
      for (const auto& fold : repeat) {
        if (std::isnan(fold.values[m])) continue;
        sum += fold.values[m];
        ++n;
        all.push_back(fold.values[m]);
      }
      if (n) {
        repeat_sum += sum / n;
        ++repeat_n;
      }
    }
    table.mean[m] = repeat_n ? repeat_sum / repeat_n : nan;
    if (all.empty()) {
      table.stddev[m] = nan;
    } else {
      double mu = 0.0;
      for (double v : all) mu += v;
      mu /= static_cast<double>(all.size());
      double ss = 0.0;
      for (double v : all) ss += (v - mu) * (v - mu);
      table.stddev[m] = std::sqrt(ss / static_cast<double>(all.size()));
    }
  }
  for (const auto& repeat : rows)
    for (const auto& fold : repeat) {
      for (int c = 0; c < kNumClasses; ++c) {
        count[c] += fold.class_count[c];
        correct[c] += fold.class_correct[c];
      }
      evaluated += fold.evaluated;
      total_correct += fold.correct;
    }
  for (int c = 0; c < kNumClasses; ++c) table.pooled[c] = count[c] ? 100.0 * correct[c] / count[c] : nan;
  table.pooled[kTotalAccuracy] = evaluated ? 100.0 * total_correct / evaluated : nan;
  return table;
}

}  // namespace stutter
