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

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "stutter/error.hpp"
#include "stutter/features.hpp"
#include "stutter/streams.hpp"
#include "stutter/synthetic.hpp"
#include "test_util.hpp"

namespace stutter {
namespace {

using testing::make_features;

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no stutter::Error thrown";
  return ErrorCode::InvalidArgument;
}

// Independent oracle: extended-precision one-pass moments.
Eigen::VectorXd pool_oracle(const Tensor& x) {
  const Eigen::Index t = x.rows(), d = x.cols();
  Eigen::VectorXd out(2 * d);
  for (Eigen::Index j = 0; j < d; ++j) {
    long double s = 0, s2 = 0;
    for (Eigen::Index i = 0; i < t; ++i) {
      const long double v = x(i, j);
      s += v;
      s2 += v * v;
    }
    const long double mean = s / t;
    const long double var = std::max<long double>(0, s2 / t - mean * mean);
    out(j) = static_cast<double>(mean);
    out(d + j) = static_cast<double>(std::sqrt(var));
  }
  return out;
}

TEST(StatisticalPool, TwoByTwoExample) {
  Eigen::MatrixXd x(2, 2);
  x << 1, 2, 3, 4;
  const Eigen::VectorXd p = statistical_pool(x);
  ASSERT_EQ(p.size(), 4);
  EXPECT_DOUBLE_EQ(p(0), 2.0);
  EXPECT_DOUBLE_EQ(p(1), 3.0);
  EXPECT_DOUBLE_EQ(p(2), 1.0);
  EXPECT_DOUBLE_EQ(p(3), 1.0);
}

TEST(StatisticalPool, ConstantRowsGiveZeroStd) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Constant(7, 3, -2.5);
  const Eigen::VectorXd p = statistical_pool(x);
  for (int j = 0; j < 3; ++j) {
    EXPECT_DOUBLE_EQ(p(j), -2.5);
    EXPECT_DOUBLE_EQ(p(3 + j), 0.0);
  }
}

TEST(StatisticalPool, SingleFrameHasZeroStdHalf) {
  Eigen::MatrixXd x(1, 4);
  x << 1, -2, 3, 0.5;
  const Eigen::VectorXd p = statistical_pool(x);
  EXPECT_EQ(p.head(4), x.row(0).transpose());
  EXPECT_TRUE(p.tail(4).isZero(0.0));
}

TEST(StatisticalPool, EmptyTensorIsRejected) {
  EXPECT_EQ(code_of([] { statistical_pool(Eigen::MatrixXd(0, 3)); }), ErrorCode::EmptyTensor);
  EXPECT_EQ(code_of([] { statistical_pool(Eigen::MatrixXd(3, 0)); }), ErrorCode::EmptyTensor);
}

TEST(StatisticalPool, MatchesExtendedPrecisionOracle) {
  Rng rng(17);
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::uniform_real_distribution<float> offset(-5.0f, 5.0f);
  for (int trial = 0; trial < 3; ++trial) {
    Tensor x(150, 768);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const float mu = offset(rng) + (offset(rng) > 0 ? 6.0f : -6.0f);
      for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, j) = mu + n(rng);
    }
    const Eigen::VectorXd got = statistical_pool(x);
    const Eigen::VectorXd want = pool_oracle(x);
    for (Eigen::Index k = 0; k < got.size(); ++k)
      ASSERT_LE(std::abs(got(k) - want(k)), 1e-12 * std::abs(want(k))) << "entry " << k;
  }
  // Zero-centred data: compare relative to the vector scale.
  Tensor z(150, 768);
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = n(rng);
  const Eigen::VectorXd got = statistical_pool(z), want = pool_oracle(z);
  EXPECT_LE((got - want).lpNorm<Eigen::Infinity>(), 1e-12 * want.lpNorm<Eigen::Infinity>());
}

TEST(StatisticalPool, InvariantToFramePermutation) {
  Rng rng(4);
  const Eigen::MatrixXd x = testing::random_normal(31, 6, rng);
  std::vector<int> perm(31);
  std::iota(perm.begin(), perm.end(), 0);
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::MatrixXd y(31, 6);
    for (int i = 0; i < 31; ++i) y.row(i) = x.row(perm[i]);
    EXPECT_TRUE(statistical_pool(y).isApprox(statistical_pool(x), 1e-14));
  }
}

TEST(MagnitudeNormalize, ThreeFourFive) {
  Eigen::VectorXd v(2);
  v << 3, 4;
  const Eigen::VectorXd u = magnitude_normalize(v);
  EXPECT_DOUBLE_EQ(u(0), 0.6);
  EXPECT_DOUBLE_EQ(u(1), 0.8);
}

TEST(MagnitudeNormalize, UnitVectorUnchanged) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(5);
  e(2) = 1.0;
  EXPECT_EQ(magnitude_normalize(e), e);
}

TEST(MagnitudeNormalize, ZeroVectorIsRejected) {
  EXPECT_EQ(code_of([] { magnitude_normalize(Eigen::VectorXd::Zero(3)); }), ErrorCode::ZeroVector);
  EXPECT_EQ(code_of([] { magnitude_normalize(Eigen::VectorXd::Constant(3, 1e-14)); }), ErrorCode::ZeroVector);
}

TEST(MagnitudeNormalize, IdempotentWithUnitNorm) {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::VectorXd v = testing::random_normal(192, 1, rng, 10.0);
    const Eigen::VectorXd once = magnitude_normalize(v);
    const Eigen::VectorXd twice = magnitude_normalize(once);
    EXPECT_NEAR(once.norm(), 1.0, 1e-12);
    EXPECT_LE((once - twice).lpNorm<Eigen::Infinity>(), 1e-12);
  }
}

TEST(MagnitudeNormalize, RowWiseOnFeatureMatrix) {
  Rng rng(2);
  const FeatureMatrix m = make_features(testing::random_normal(6, 4, rng), std::vector<ClassLabel>(6, ClassLabel::Fluent));
  const FeatureMatrix n = magnitude_normalize(m);
  for (Eigen::Index i = 0; i < 6; ++i) EXPECT_NEAR(n.values.row(i).norm(), 1.0, 1e-12);
  EXPECT_EQ(n.labels, m.labels);
  EXPECT_EQ(n.clip_ids, m.clip_ids);
}

FeatureMatrix block(Eigen::Index n, Eigen::Index k, Rng& rng) {
  std::vector<ClassLabel> labels;
  for (Eigen::Index i = 0; i < n; ++i) labels.push_back(label_from_code(static_cast<int>(i % kNumClasses)));
  return make_features(testing::random_normal(n, k, rng), labels, 3);
}

TEST(ConcatFeatures, ThreeBlocksOfFourGiveTwelve) {
  Rng rng(1);
  const auto a = block(20, 4, rng), b = block(20, 4, rng), c = block(20, 4, rng);
  const auto out = concat_features({a, b, c});
  ASSERT_EQ(out.rows(), 20);
  ASSERT_EQ(out.cols(), 12);
  EXPECT_EQ(out.values.leftCols(4), a.values);
  EXPECT_EQ(out.values.middleCols(4, 4), b.values);
  EXPECT_EQ(out.values.rightCols(4), c.values);
  EXPECT_EQ(out.labels, a.labels);
}

TEST(ConcatFeatures, SinglePartIsIdentity) {
  Rng rng(1);
  const auto a = block(9, 5, rng);
  const auto out = concat_features({a});
  EXPECT_EQ(out.values, a.values);
  EXPECT_EQ(out.podcast_ids, a.podcast_ids);
}

TEST(ConcatFeatures, ShuffledRowsAreMisaligned) {
  Rng rng(1);
  const auto a = block(10, 2, rng);
  std::vector<Eigen::Index> order(10);
  std::iota(order.begin(), order.end(), 0);
  std::reverse(order.begin(), order.end());
  const auto shuffled = a.subset(order);
  EXPECT_EQ(code_of([&] { concat_features({a, shuffled}); }), ErrorCode::RowMisalignment);
  const auto shorter = a.subset(std::vector<Eigen::Index>{0, 1, 2});
  EXPECT_EQ(code_of([&] { concat_features({a, shorter}); }), ErrorCode::RowMisalignment);
  auto relabeled = a;
  relabeled.labels[0] = label_from_code((code(a.labels[0]) + 1) % kNumClasses);
  EXPECT_EQ(code_of([&] { concat_features({a, relabeled}); }), ErrorCode::RowMisalignment);
}

TEST(ConcatFeatures, AssociativeInColumns) {
  Rng rng(6);
  const auto a = block(8, 3, rng), b = block(8, 2, rng), c = block(8, 5, rng);
  const auto nested = concat_features({a, concat_features({b, c})});
  const auto flat = concat_features({a, b, c});
  const auto left = concat_features({concat_features({a, b}), c});
  EXPECT_EQ(nested.values, flat.values);
  EXPECT_EQ(left.values, flat.values);
}

TEST(Streams, EcapaBypassesPoolingAndW2v2IsPooled) {
  testing::TempDir dir;
  SyntheticOptions o;
  o.num_podcasts = 10;
  o.clips_per_podcast = 2;
  o.layers = {3, 11};
  o.min_frames = 4;
  o.max_frames = 6;
  const auto manifest = generate_synthetic(o, dir.path());
  const auto data = load_streams(manifest, {ecapa_stream(), w2v2_stream(11), w2v2_stream(3)});
  ASSERT_EQ(data.rows(), 20);
  EXPECT_EQ(data.at(ecapa_stream()).cols(), 192);
  EXPECT_EQ(data.at(w2v2_stream(11)).cols(), 1536);
  for (const auto& row : manifest.rows) {
    const auto& fm = data.at(StreamId{row.source, row.layer});
    const auto it = std::find(fm.clip_ids.begin(), fm.clip_ids.end(), row.clip_id);
    ASSERT_NE(it, fm.clip_ids.end());
    const Eigen::Index i = it - fm.clip_ids.begin();
    const Tensor t = read_embedding(row.resolved);
    const Eigen::VectorXd want = row.source == Source::Ecapa ? Eigen::VectorXd(t.row(0).transpose().cast<double>())
                                                             : statistical_pool(t);
    EXPECT_EQ(Eigen::VectorXd(fm.values.row(i).transpose()), want);
    EXPECT_EQ(fm.labels[static_cast<std::size_t>(i)], row.label);
    EXPECT_EQ(fm.podcast_ids[static_cast<std::size_t>(i)], row.podcast_id);
  }
  const auto parallel = load_streams(manifest, {ecapa_stream(), w2v2_stream(11), w2v2_stream(3)}, 4);
  for (std::size_t s = 0; s < data.features.size(); ++s) EXPECT_EQ(parallel.features[s].values, data.features[s].values);
  EXPECT_EQ(code_of([&] { load_streams(manifest, {w2v2_stream(7)}); }), ErrorCode::MissingStream);
  EXPECT_EQ(code_of([&] { data.at(w2v2_stream(7)); }), ErrorCode::MissingStream);
}

TEST(Streams, ConflictingClipMetadataIsRejected) {
  testing::TempDir dir;
  SyntheticOptions o;
  o.num_podcasts = 10;
  o.clips_per_podcast = 1;
  o.layers = {11};
  o.min_frames = 2;
  o.max_frames = 2;
  auto manifest = generate_synthetic(o, dir.path());
  manifest.rows[1].label = label_from_code((code(manifest.rows[0].label) + 1) % kNumClasses);
  EXPECT_EQ(code_of([&] { load_streams(manifest, {ecapa_stream()}); }), ErrorCode::InconsistentClip);
}

}  // namespace
}  // namespace stutter
