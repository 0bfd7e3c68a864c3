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
#include <numbers>

#include <Eigen/Core>

#include "stutter/error.hpp"
#include "stutter/features.hpp"
#include "stutter/prediction.hpp"

namespace stutter {

struct GnbOptions {
  /// Variance floor as a multiple of the mean per-feature variance of the training rows.
  double var_floor_scale = 1e-9;
  bool uniform_priors = false;
};

/// Diagonal-covariance Gaussian back-end.
struct GnbModel {
  ProbaVector priors{};
  Eigen::MatrixXd means;      // 5 x K
  Eigen::MatrixXd variances;  // 5 x K
  std::array<bool, kNumClasses> present{};
  double var_floor = 0.0;
};

/// 1e-9 x the mean over features of each column's population variance.
inline double gnb_default_var_floor(const FeatureMatrix& train, double scale = 1e-9) {
  const Eigen::RowVectorXd mean = train.values.colwise().mean();
  const double mean_var = (train.values.rowwise() - mean).array().square().colwise().mean().mean();
  const double floor = scale * mean_var;
  return floor > 0.0 ? floor : std::numeric_limits<double>::min();
}

inline GnbModel gnb_fit(const FeatureMatrix& train, double var_floor, bool uniform_priors = false) {
  train.check();
  if (!(var_floor > 0.0)) fail(ErrorCode::InvalidArgument, "var_floor must be > 0");
  const Eigen::Index k = train.cols();
  std::array<Eigen::Index, kNumClasses> counts{};
  for (auto l : train.labels) ++counts[code(l)];

  GnbModel model;
  model.var_floor = var_floor;
  model.means = Eigen::MatrixXd::Zero(kNumClasses, k);
  model.variances = Eigen::MatrixXd::Constant(kNumClasses, k, var_floor);
  int active = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    if (counts[c] == 1)
      fail(ErrorCode::MissingClass, "class '" + std::string(kLabelNames[c]) + "' has a single sample");
    model.present[c] = counts[c] >= 2;
    active += model.present[c] ? 1 : 0;
  }
  if (active == 0) fail(ErrorCode::MissingClass, "no class has >= 2 samples");

  for (Eigen::Index i = 0; i < train.rows(); ++i) model.means.row(code(train.labels[i])) += train.values.row(i);
  for (int c = 0; c < kNumClasses; ++c)
    if (model.present[c]) model.means.row(c) /= static_cast<double>(counts[c]);

  Eigen::MatrixXd ss = Eigen::MatrixXd::Zero(kNumClasses, k);
  for (Eigen::Index i = 0; i < train.rows(); ++i) {
    const int c = code(train.labels[i]);
    ss.row(c) += (train.values.row(i) - model.means.row(c)).array().square().matrix();
  }
  for (int c = 0; c < kNumClasses; ++c) {
    if (!model.present[c]) continue;
    model.variances.row(c) = (ss.row(c) / static_cast<double>(counts[c])).cwiseMax(var_floor);
    model.priors[c] = uniform_priors ? 1.0 / active : static_cast<double>(counts[c]) / static_cast<double>(train.rows());
  }
  return model;
}

inline GnbModel gnb_fit(const FeatureMatrix& train, const GnbOptions& opts = {}) {
  return gnb_fit(train, gnb_default_var_floor(train, opts.var_floor_scale), opts.uniform_priors);
}

/// Per-class joint log density log p(c) + log N(x | mu_c, diag sigma2_c); -inf for absent classes.
template <typename Derived>
std::array<double, kNumClasses> gnb_joint_log_likelihood(const GnbModel& model, const Eigen::MatrixBase<Derived>& query) {
  if (query.size() != model.means.cols())
    fail(ErrorCode::DimensionMismatch, "query has " + std::to_string(query.size()) + " dims, model " +
                                           std::to_string(model.means.cols()));
  const Eigen::RowVectorXd q = query.derived().transpose().template cast<double>();
  std::array<double, kNumClasses> out{};
  const double log_two_pi = std::log(2.0 * std::numbers::pi);
  for (int c = 0; c < kNumClasses; ++c) {
    if (!model.present[c] || model.priors[c] <= 0.0) {
      out[c] = -std::numeric_limits<double>::infinity();
      continue;
    }
    const auto var = model.variances.row(c).array();
    const auto diff = q.array() - model.means.row(c).array();
    const double quad = (diff.square() / var).sum();
    const double log_det = (var.log() + log_two_pi).sum();
    out[c] = std::log(model.priors[c]) - 0.5 * (log_det + quad);
  }
  return out;
}

/// Posterior over classes, normalized with log-sum-exp; label is the argmax (lower code on ties).
template <typename Derived>
Prediction gnb_predict_proba(const GnbModel& model, const Eigen::MatrixBase<Derived>& query) {
  const auto jll = gnb_joint_log_likelihood(model, query);
  double peak = -std::numeric_limits<double>::infinity();
  for (double v : jll) peak = std::max(peak, v);
  double total = 0.0;
  Prediction out;
  for (int c = 0; c < kNumClasses; ++c) {
    out.proba[c] = std::isinf(jll[c]) ? 0.0 : std::exp(jll[c] - peak);
    total += out.proba[c];
  }
  for (auto& p : out.proba) p /= total;
  int best = 0;
  for (int c = 1; c < kNumClasses; ++c)
    if (jll[c] > jll[best]) best = c;
  out.label = label_from_code(best);
  return out;
}

}  // namespace stutter
