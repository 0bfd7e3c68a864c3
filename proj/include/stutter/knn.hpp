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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Core>

#include "stutter/error.hpp"
#include "stutter/features.hpp"
#include "stutter/prediction.hpp"

namespace stutter {

inline constexpr int kDefaultKnnK = 5;
inline constexpr double kDefaultMinkowskiP = 2.0;

template <typename A, typename B>
double minkowski_distance(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y, double p) {
  if (x.size() != y.size()) fail(ErrorCode::DimensionMismatch, "minkowski_distance operand lengths differ");
  if (!(p >= 1.0)) fail(ErrorCode::InvalidOrder, "Minkowski order must be >= 1");
  if (p == 2.0) return std::sqrt((x - y).squaredNorm());
  if (p == 1.0) return (x - y).cwiseAbs().sum();
  return std::pow((x - y).cwiseAbs().array().pow(p).sum(), 1.0 / p);
}

inline double minkowski_distance(const std::vector<double>& x, const std::vector<double>& y, double p) {
  if (x.size() != y.size()) fail(ErrorCode::DimensionMismatch, "minkowski_distance operand lengths differ");
  const auto n = static_cast<Eigen::Index>(x.size());
  return minkowski_distance(Eigen::Map<const Eigen::VectorXd>(x.data(), n),
                            Eigen::Map<const Eigen::VectorXd>(y.data(), n), p);
}

/// Lazy learner: keeps the training rows verbatim.
struct KnnModel {
  Eigen::MatrixXd store;
  std::vector<int> store_labels;
  int k = kDefaultKnnK;
  double p = kDefaultMinkowskiP;
};

inline KnnModel knn_fit(const FeatureMatrix& train, int k = kDefaultKnnK, double p = kDefaultMinkowskiP) {
  train.check();
  if (k < 1) fail(ErrorCode::InvalidArgument, "k must be >= 1");
  if (!(p >= 1.0)) fail(ErrorCode::InvalidOrder, "Minkowski order must be >= 1");
  if (train.rows() < k)
    fail(ErrorCode::InsufficientData, std::to_string(train.rows()) + " rows for k=" + std::to_string(k));
  KnnModel model;
  model.store = train.values;
  model.store_labels.reserve(train.labels.size());
  for (auto l : train.labels) model.store_labels.push_back(code(l));
  model.k = k;
  model.p = p;
  return model;
}

/// Vote shares of the k nearest rows. Distance ties go to the lower training row; a vote tie goes
/// to the class whose voters have the smaller summed distance, then to the lower class code.
template <typename Derived>
Prediction knn_predict_proba(const KnnModel& model, const Eigen::MatrixBase<Derived>& query) {
  const Eigen::Index n = model.store.rows();
  if (query.size() != model.store.cols())
    fail(ErrorCode::DimensionMismatch, "query has " + std::to_string(query.size()) + " dims, model " +
                                           std::to_string(model.store.cols()));
  std::vector<double> dist(static_cast<std::size_t>(n));
  const Eigen::RowVectorXd q = query.derived().transpose().template cast<double>();
  for (Eigen::Index i = 0; i < n; ++i) dist[i] = minkowski_distance(model.store.row(i), q, model.p);

  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  const auto closer = [&](Eigen::Index a, Eigen::Index b) { return dist[a] < dist[b] || (dist[a] == dist[b] && a < b); };
  std::partial_sort(idx.begin(), idx.begin() + model.k, idx.end(), closer);

  std::array<int, kNumClasses> votes{};
  std::array<double, kNumClasses> summed{};
  for (int j = 0; j < model.k; ++j) {
    const int c = model.store_labels[idx[j]];
    ++votes[c];
    summed[c] += dist[idx[j]];
  }
  Prediction out;
  int best = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    out.proba[c] = static_cast<double>(votes[c]) / model.k;
    if (votes[c] > votes[best] || (votes[c] == votes[best] && votes[c] > 0 && summed[c] < summed[best])) best = c;
  }
  out.label = label_from_code(best);
  return out;
}

}  // namespace stutter
