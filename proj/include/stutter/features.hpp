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

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "stutter/emb1.hpp"
#include "stutter/error.hpp"
#include "stutter/labels.hpp"

namespace stutter {

/// N x K feature rows with per-row identity. Every pipeline stage consumes and produces these.
struct FeatureMatrix {
  Eigen::MatrixXd values;
  std::vector<ClassLabel> labels;
  std::vector<std::string> podcast_ids;
  std::vector<std::string> clip_ids;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }

  /// Throws unless the metadata vectors align with the value rows and all values are finite.
  void check() const {
    const auto n = static_cast<std::size_t>(values.rows());
    if (labels.size() != n || podcast_ids.size() != n || clip_ids.size() != n)
      fail(ErrorCode::RowMisalignment, "metadata length differs from row count");
    if (!values.allFinite()) fail(ErrorCode::NonFiniteValue, "feature matrix");
  }

  /// Rows selected by index, in the given order.
  FeatureMatrix subset(std::span<const Eigen::Index> idx) const {
    FeatureMatrix out;
    out.values.resize(static_cast<Eigen::Index>(idx.size()), values.cols());
    out.labels.reserve(idx.size());
    out.podcast_ids.reserve(idx.size());
    out.clip_ids.reserve(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      out.values.row(static_cast<Eigen::Index>(i)) = values.row(idx[i]);
      out.labels.push_back(labels[idx[i]]);
      out.podcast_ids.push_back(podcast_ids[idx[i]]);
      out.clip_ids.push_back(clip_ids[idx[i]]);
    }
    return out;
  }

  /// Same rows and metadata, different values.
  FeatureMatrix with_values(Eigen::MatrixXd v) const {
    FeatureMatrix out{std::move(v), labels, podcast_ids, clip_ids};
    return out;
  }
};

/// Mean over frames followed by population standard deviation over frames: a 2D-vector.
template <typename Derived>
Eigen::VectorXd statistical_pool(const Eigen::MatrixBase<Derived>& tensor) {
  const Eigen::Index frames = tensor.rows();
  const Eigen::Index dims = tensor.cols();
  if (frames < 1 || dims < 1) fail(ErrorCode::EmptyTensor, "pooling needs T>=1 and D>=1");
  Eigen::VectorXd out(2 * dims);
  const double inv_t = 1.0 / static_cast<double>(frames);
  for (Eigen::Index d = 0; d < dims; ++d) {
    double sum = 0.0;
    for (Eigen::Index t = 0; t < frames; ++t) sum += static_cast<double>(tensor(t, d));
    const double mean = sum * inv_t;
    double ss = 0.0;
    for (Eigen::Index t = 0; t < frames; ++t) {
      const double dev = static_cast<double>(tensor(t, d)) - mean;
      ss += dev * dev;
    }
    out(d) = mean;
    out(dims + d) = std::sqrt(ss * inv_t);
  }
  if (!out.allFinite()) fail(ErrorCode::NonFiniteValue, "pooled vector");
  return out;
}

inline Eigen::VectorXd magnitude_normalize(const Eigen::VectorXd& v) {
  if (!v.allFinite()) fail(ErrorCode::NonFiniteValue, "magnitude_normalize input");
  const double norm = v.norm();
  if (norm < 1e-12) fail(ErrorCode::ZeroVector, "norm below 1e-12");
  return v / norm;
}

/// Row-wise magnitude normalization.
inline FeatureMatrix magnitude_normalize(const FeatureMatrix& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.row(i) = magnitude_normalize(Eigen::VectorXd(m.values.row(i))).transpose();
  return m.with_values(std::move(out));
}

/// Horizontal concatenation of feature blocks describing the same clips in the same order.
inline FeatureMatrix concat_features(std::span<const FeatureMatrix> parts) {
  if (parts.empty()) fail(ErrorCode::InvalidArgument, "concat_features needs at least one part");
  const auto& first = parts.front();
  Eigen::Index total_cols = 0;
  for (const auto& p : parts) {
    p.check();
    if (p.rows() != first.rows() || p.labels != first.labels || p.podcast_ids != first.podcast_ids ||
        p.clip_ids != first.clip_ids)
      fail(ErrorCode::RowMisalignment, "parts do not describe the same rows");
    total_cols += p.cols();
  }
  Eigen::MatrixXd values(first.rows(), total_cols);
  Eigen::Index offset = 0;
  for (const auto& p : parts) {
    values.middleCols(offset, p.cols()) = p.values;
    offset += p.cols();
  }
  return first.with_values(std::move(values));
}

inline FeatureMatrix concat_features(std::initializer_list<FeatureMatrix> parts) {
  return concat_features(std::span<const FeatureMatrix>(parts.begin(), parts.size()));
}

}  // namespace stutter
