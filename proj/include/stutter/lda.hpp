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
#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "stutter/error.hpp"
#include "stutter/features.hpp"
#include "stutter/labels.hpp"

namespace stutter {

inline constexpr double kDefaultLdaShrinkage = 1e-4;
inline constexpr int kMaxLdaComponents = kNumClasses - 1;

struct LdaModel {
  Eigen::MatrixXd projection;                // K x m, unit-norm columns, descending eigenvalue
  Eigen::VectorXd eigenvalues;               // length m
  Eigen::MatrixXd class_means;               // 5 x K; rows of absent classes are zero
  std::array<bool, kNumClasses> present{};   // which classes took part in the fit
  Eigen::VectorXd global_mean;               // length K
  double shrinkage = kDefaultLdaShrinkage;

  Eigen::Index input_dim() const { return projection.rows(); }
  Eigen::Index components() const { return projection.cols(); }
};

/// Fits a multiclass LDA projection on training rows only.
///
/// Solves S_b w = lambda S_w' w with S_w' = (1-s) S_w + s tr(S_w)/K I. S_w' is whitened by its
/// Cholesky factor L; since S_b = M M^T has rank <= C-1, the symmetric problem L^-1 S_b L^-T is
/// solved through the C x C Gram matrix of A = L^-1 M, which shares its nonzero spectrum.
inline LdaModel lda_fit(const FeatureMatrix& train, int components, double shrinkage = kDefaultLdaShrinkage) {
  train.check();
  if (components < 1 || components > kMaxLdaComponents)
    fail(ErrorCode::InvalidArgument, "LDA components must be in [1,4], got " + std::to_string(components));
  if (!(shrinkage >= 0.0 && shrinkage <= 1.0)) fail(ErrorCode::InvalidArgument, "shrinkage must be in [0,1]");
  const Eigen::Index n = train.rows();
  const Eigen::Index k = train.cols();
  if (components > k) fail(ErrorCode::InvalidArgument, "more LDA components than input dimensions");

  std::array<Eigen::Index, kNumClasses> counts{};
  for (auto l : train.labels) ++counts[code(l)];
  LdaModel model;
  model.shrinkage = shrinkage;
  int present_classes = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    if (counts[c] == 1)
      fail(ErrorCode::MissingClass, "class '" + std::string(kLabelNames[c]) + "' has a single sample");
    model.present[c] = counts[c] >= 2;
    present_classes += model.present[c] ? 1 : 0;
  }
  if (components > present_classes - 1)
    fail(ErrorCode::MissingClass, std::to_string(components) + " components need " +
                                      std::to_string(components + 1) + " classes with >=2 samples, found " +
                                      std::to_string(present_classes));

  model.global_mean = train.values.colwise().mean().transpose();
  model.class_means = Eigen::MatrixXd::Zero(kNumClasses, k);
  for (Eigen::Index i = 0; i < n; ++i) model.class_means.row(code(train.labels[i])) += train.values.row(i);
  for (int c = 0; c < kNumClasses; ++c)
    if (model.present[c]) model.class_means.row(c) /= static_cast<double>(counts[c]);

  Eigen::MatrixXd centered(n, k);
  for (Eigen::Index i = 0; i < n; ++i) centered.row(i) = train.values.row(i) - model.class_means.row(code(train.labels[i]));
  Eigen::MatrixXd within = Eigen::MatrixXd::Zero(k, k);
  within.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose());
  within = within.selfadjointView<Eigen::Lower>();

  const double trace = within.trace();
  Eigen::MatrixXd regularized = (1.0 - shrinkage) * within;
  regularized.diagonal().array() += shrinkage * trace / static_cast<double>(k);

  Eigen::LLT<Eigen::MatrixXd> llt(regularized);
  if (llt.info() != Eigen::Success) fail(ErrorCode::DegenerateScatter, "within-class scatter is not positive definite");
  const Eigen::VectorXd diag = llt.matrixLLT().diagonal();
  if (!(diag.minCoeff() > 0.0) || diag.minCoeff() / diag.maxCoeff() < 1e-8)
    fail(ErrorCode::DegenerateScatter, "within-class scatter is numerically singular");

  Eigen::MatrixXd between_factor(k, present_classes);
  for (int c = 0, j = 0; c < kNumClasses; ++c) {
    if (!model.present[c]) continue;
    between_factor.col(j++) =
        std::sqrt(static_cast<double>(counts[c])) * (model.class_means.row(c).transpose() - model.global_mean);
  }
  const Eigen::MatrixXd whitened = llt.matrixL().solve(between_factor);
  const Eigen::MatrixXd gram = whitened.transpose() * whitened;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) fail(ErrorCode::DegenerateScatter, "eigensolver failed");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(present_classes));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return eig.eigenvalues()(a) > eig.eigenvalues()(b); });

  model.projection.resize(k, components);
  model.eigenvalues.resize(components);
  for (int j = 0; j < components; ++j) {
    const Eigen::Index src = order[static_cast<std::size_t>(j)];
    const Eigen::VectorXd y = whitened * eig.eigenvectors().col(src);
    Eigen::VectorXd w = llt.matrixU().solve(y);
    const double norm = w.norm();
    if (!(norm > 0.0) || !std::isfinite(norm) || eig.eigenvalues()(src) <= 0.0)
      fail(ErrorCode::DegenerateScatter, "between-class scatter has rank below " + std::to_string(components));
    w /= norm;
    Eigen::Index pivot = 0;
    w.cwiseAbs().maxCoeff(&pivot);
    if (w(pivot) < 0.0) w = -w;
    model.projection.col(j) = w;
    model.eigenvalues(j) = eig.eigenvalues()(src);
  }
  return model;
}

inline FeatureMatrix lda_transform(const LdaModel& model, const FeatureMatrix& data) {
  if (data.cols() != model.input_dim())
    fail(ErrorCode::DimensionMismatch, "LDA expects " + std::to_string(model.input_dim()) + " columns, got " +
                                           std::to_string(data.cols()));
  Eigen::MatrixXd out = (data.values.rowwise() - model.global_mean.transpose()) * model.projection;
  return data.with_values(std::move(out));
}

inline Eigen::VectorXd lda_transform(const LdaModel& model, const Eigen::VectorXd& v) {
  if (v.size() != model.input_dim()) fail(ErrorCode::DimensionMismatch, "LDA input length");
  return model.projection.transpose() * (v - model.global_mean);
}

}  // namespace stutter
