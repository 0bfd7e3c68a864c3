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
#include <cmath>
#include <numbers>

#include "stutter/error.hpp"
#include "stutter/gnb.hpp"
#include "stutter/knn.hpp"
#include "test_util.hpp"

namespace stutter {
namespace {

using testing::gaussian_clusters;
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

// ---- brute-force KNN oracle -----------------------------------------------------------------

Prediction knn_oracle(const Eigen::MatrixXd& store, const std::vector<int>& labels, int k, double p,
                      const Eigen::VectorXd& q) {
  struct Hit {
    double d;
    Eigen::Index row;
  };
  std::vector<Hit> hits;
  for (Eigen::Index i = 0; i < store.rows(); ++i) {
    double acc = 0;
    for (Eigen::Index j = 0; j < store.cols(); ++j) acc += std::pow(std::abs(store(i, j) - q(j)), p);
    hits.push_back({std::pow(acc, 1.0 / p), i});
  }
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.d != b.d ? a.d < b.d : a.row < b.row; });
  std::array<int, kNumClasses> votes{};
  std::array<double, kNumClasses> dist{};
  for (int j = 0; j < k; ++j) {
    votes[labels[hits[j].row]]++;
    dist[labels[hits[j].row]] += hits[j].d;
  }
  Prediction out;
  int best = -1;
  for (int c = 0; c < kNumClasses; ++c) {
    out.proba[c] = votes[c] / static_cast<double>(k);
    if (votes[c] == 0) continue;
    if (best < 0 || votes[c] > votes[best] || (votes[c] == votes[best] && dist[c] < dist[best])) best = c;
  }
  out.label = label_from_code(best);
  return out;
}

TEST(Minkowski, Examples) {
  EXPECT_DOUBLE_EQ(minkowski_distance(std::vector<double>{0, 0}, std::vector<double>{3, 4}, 2), 5.0);
  EXPECT_DOUBLE_EQ(minkowski_distance(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 6}, 1), 6.0);
  const std::vector<double> x{0.3, -1.2, 7.0};
  for (double p : {1.0, 1.5, 2.0, 3.0}) EXPECT_EQ(minkowski_distance(x, x, p), 0.0);
}

TEST(Minkowski, Errors) {
  EXPECT_EQ(code_of([] { minkowski_distance(std::vector<double>{1, 2}, std::vector<double>{1}, 2); }),
            ErrorCode::DimensionMismatch);
  EXPECT_EQ(code_of([] { minkowski_distance(std::vector<double>{1}, std::vector<double>{2}, 0.5); }),
            ErrorCode::InvalidOrder);
}

TEST(KnnFit, BoundaryAndDefaults) {
  const auto five = gaussian_clusters(1, 3, 1.0, 1);
  const auto model = knn_fit(five);
  EXPECT_EQ(model.k, 5);
  EXPECT_EQ(model.p, 2.0);
  EXPECT_EQ(model.store, five.values);
  const auto four = gaussian_clusters(1, 3, 1.0, 1, {0, 1, 2, 3});
  EXPECT_EQ(code_of([&] { knn_fit(four); }), ErrorCode::InsufficientData);
  EXPECT_EQ(code_of([&] { knn_fit(five, 3, 0.9); }), ErrorCode::InvalidOrder);
}

TEST(KnnPredict, UnanimousNeighbours) {
  Eigen::MatrixXd store(7, 1);
  store << 0, 0.1, 0.2, 0.3, 0.4, 10, 11;
  const auto model = knn_fit(make_features(store, {ClassLabel::Fluent, ClassLabel::Fluent, ClassLabel::Fluent,
                                                   ClassLabel::Fluent, ClassLabel::Fluent, ClassLabel::Block,
                                                   ClassLabel::Block}));
  const auto p = knn_predict_proba(model, Eigen::VectorXd::Zero(1));
  EXPECT_EQ(p.label, ClassLabel::Fluent);
  EXPECT_EQ(p.proba, (ProbaVector{0, 0, 0, 0, 1}));
}

TEST(KnnPredict, MajorityBlockOverFluent) {
  Eigen::MatrixXd store(5, 1);
  store << 1, 2, 3, 4, 5;
  const auto model = knn_fit(
      make_features(store, {ClassLabel::Block, ClassLabel::Fluent, ClassLabel::Block, ClassLabel::Fluent, ClassLabel::Block}));
  const auto p = knn_predict_proba(model, Eigen::VectorXd::Constant(1, 3.0));
  EXPECT_EQ(p.label, ClassLabel::Block);
  EXPECT_EQ(p.proba, (ProbaVector{0, 0, 0.6, 0, 0.4}));
}

TEST(KnnPredict, DistanceTiesGoToLowerRow) {
  // Rows 1 and 2 are both at distance 1; k=2 takes rows 0 and 1.
  Eigen::MatrixXd store(3, 1);
  store << 0, 1, -1;
  const auto model =
      knn_fit(make_features(store, {ClassLabel::Fluent, ClassLabel::Block, ClassLabel::Repetition}), 2);
  const auto p = knn_predict_proba(model, Eigen::VectorXd::Zero(1));
  EXPECT_EQ(p.proba, (ProbaVector{0, 0, 0.5, 0, 0.5}));
}

TEST(KnnPredict, VoteTiesUseSummedDistanceThenClassCode) {
  Eigen::MatrixXd store(4, 1);
  store << 0.1, 0.2, 0.3, 0.45;
  // Fluent voters: 0.1 + 0.2; block voters: 0.3 + 0.45. Fluent is closer overall.
  auto model = knn_fit(make_features(store, {ClassLabel::Fluent, ClassLabel::Fluent, ClassLabel::Block, ClassLabel::Block}), 4);
  EXPECT_EQ(knn_predict_proba(model, Eigen::VectorXd::Zero(1)).label, ClassLabel::Fluent);
  // Symmetric layout: equal summed distance, so the lower code (block) wins.
  Eigen::MatrixXd sym(2, 1);
  sym << -1, 1;
  model = knn_fit(make_features(sym, {ClassLabel::Fluent, ClassLabel::Block}), 2);
  EXPECT_EQ(knn_predict_proba(model, Eigen::VectorXd::Zero(1)).label, ClassLabel::Block);
}

TEST(KnnPredict, DimensionMismatch) {
  const auto model = knn_fit(gaussian_clusters(2, 3, 1.0, 1));
  EXPECT_EQ(code_of([&] { knn_predict_proba(model, Eigen::VectorXd::Zero(4)); }), ErrorCode::DimensionMismatch);
}

TEST(KnnPredict, MatchesBruteForceOracle) {
  Rng rng(2024);
  std::uniform_int_distribution<int> cls(0, kNumClasses - 1);
  std::uniform_int_distribution<int> grid(-3, 3);
  for (int inst = 0; inst < 20; ++inst) {
    const int dims = 1 + inst % 6;
    // Integer grid coordinates make exact distance ties common.
    Eigen::MatrixXd store(40, dims);
    std::vector<ClassLabel> labels;
    for (int i = 0; i < 40; ++i) {
      for (int d = 0; d < dims; ++d) store(i, d) = inst % 2 ? grid(rng) : testing::random_normal(1, 1, rng)(0, 0);
      labels.push_back(label_from_code(cls(rng)));
    }
    const int k = 1 + inst % 7;
    const double p = inst % 3 == 0 ? 1.0 : (inst % 3 == 1 ? 2.0 : 3.0);
    const auto model = knn_fit(make_features(store, labels), k, p);
    for (int q = 0; q < 25; ++q) {
      Eigen::VectorXd query(dims);
      for (int d = 0; d < dims; ++d) query(d) = inst % 2 ? grid(rng) : testing::random_normal(1, 1, rng)(0, 0);
      const auto got = knn_predict_proba(model, query);
      const auto want = knn_oracle(store, model.store_labels, k, p, query);
      ASSERT_EQ(got.label, want.label) << "instance " << inst << " query " << q;
      ASSERT_EQ(got.proba, want.proba);
      double total = 0;
      for (double v : got.proba) {
        EXPECT_DOUBLE_EQ(v * k, std::round(v * k));
        total += v;
      }
      EXPECT_NEAR(total, 1.0, 1e-15);
    }
  }
}

TEST(KnnPredict, ShiftInvariance) {
  const auto train = gaussian_clusters(10, 4, 2.0, 8);
  const auto test = gaussian_clusters(5, 4, 2.0, 9);
  Eigen::RowVectorXd shift(4);
  shift << 100, -3, 0.5, 7;
  const auto shifted = train.with_values(train.values.rowwise() + shift);
  const auto a = knn_fit(train), b = knn_fit(shifted);
  for (Eigen::Index i = 0; i < test.rows(); ++i) {
    const Eigen::RowVectorXd q = test.values.row(i);
    EXPECT_EQ(knn_predict_proba(a, q).label, knn_predict_proba(b, Eigen::RowVectorXd(q + shift)).label);
  }
}

// ---- Gaussian naive Bayes ---------------------------------------------------------------

// Direct density evaluation in extended precision, normalized by the plain sum.
ProbaVector gnb_oracle(const GnbModel& m, const Eigen::VectorXd& q) {
  std::array<long double, kNumClasses> dens{};
  long double total = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    if (!m.present[c]) continue;
    long double d = m.priors[c];
    for (Eigen::Index j = 0; j < q.size(); ++j) {
      const long double var = m.variances(c, j);
      const long double diff = q(j) - m.means(c, j);
      d *= std::exp(-diff * diff / (2 * var)) / std::sqrt(2 * std::numbers::pi_v<long double> * var);
    }
    dens[c] = d;
    total += d;
  }
  ProbaVector out{};
  for (int c = 0; c < kNumClasses; ++c) out[c] = static_cast<double>(dens[c] / total);
  return out;
}

TEST(GnbFit, HandArithmeticPopulationVariance) {
  Eigen::MatrixXd v(4, 1);
  v << 0, 2, 10, 14;
  const auto model = gnb_fit(make_features(v, {ClassLabel::Block, ClassLabel::Block, ClassLabel::Fluent, ClassLabel::Fluent}), 1e-9);
  EXPECT_DOUBLE_EQ(model.means(2, 0), 1.0);
  EXPECT_DOUBLE_EQ(model.variances(2, 0), 1.0);
  EXPECT_DOUBLE_EQ(model.means(4, 0), 12.0);
  EXPECT_DOUBLE_EQ(model.variances(4, 0), 4.0);
  EXPECT_DOUBLE_EQ(model.priors[2], 0.5);
  EXPECT_FALSE(model.present[0]);
  EXPECT_EQ(model.priors[0], 0.0);
}

TEST(GnbFit, ConstantFeatureHitsFloor) {
  Eigen::MatrixXd v(4, 2);
  v << 1, 5, 2, 5, 3, 5, 4, 5;
  const auto model = gnb_fit(make_features(v, std::vector<ClassLabel>(4, ClassLabel::Fluent)), 0.25);
  EXPECT_DOUBLE_EQ(model.variances(4, 1), 0.25);
  EXPECT_DOUBLE_EQ(model.variances(4, 0), 1.25);
  EXPECT_GE(model.variances.minCoeff(), model.var_floor);
}

TEST(GnbFit, DefaultFloorScalesWithFeatureVariance) {
  const auto train = gaussian_clusters(50, 3, 0.0, 4);
  const Eigen::RowVectorXd mu = train.values.colwise().mean();
  const double mean_var = (train.values.rowwise() - mu).array().square().colwise().mean().mean();
  EXPECT_NEAR(gnb_fit(train).var_floor, 1e-9 * mean_var, 1e-24);
}

TEST(GnbFit, PriorsAreEmpiricalOrUniform) {
  auto train = gaussian_clusters(10, 2, 1.0, 5, {0, 4});
  const auto extra = gaussian_clusters(30, 2, 1.0, 6, {4});
  Eigen::MatrixXd v(train.rows() + extra.rows(), 2);
  v << train.values, extra.values;
  auto labels = train.labels;
  labels.insert(labels.end(), extra.labels.begin(), extra.labels.end());
  const auto fm = make_features(v, labels);
  const auto emp = gnb_fit(fm);
  EXPECT_DOUBLE_EQ(emp.priors[0], 0.2);
  EXPECT_DOUBLE_EQ(emp.priors[4], 0.8);
  GnbOptions uni;
  uni.uniform_priors = true;
  const auto u = gnb_fit(fm, uni);
  EXPECT_DOUBLE_EQ(u.priors[0], 0.5);
  EXPECT_DOUBLE_EQ(u.priors[4], 0.5);
  double total = 0;
  for (double p : emp.priors) total += p;
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(GnbFit, SingleSampleClassIsMissingClass) {
  Eigen::MatrixXd v(3, 1);
  v << 0, 1, 2;
  EXPECT_EQ(code_of([&] { gnb_fit(make_features(v, {ClassLabel::Fluent, ClassLabel::Fluent, ClassLabel::Block}), 1e-9); }),
            ErrorCode::MissingClass);
}

TEST(GnbFit, MeansConvergeToGenerator) {
  Rng rng(77);
  const int n = 10000;
  const int dims = 3;
  Eigen::MatrixXd mu(kNumClasses, dims);
  Eigen::MatrixXd sd(kNumClasses, dims);
  std::uniform_real_distribution<double> u(-5, 5), s(0.5, 3);
  for (int c = 0; c < kNumClasses; ++c)
    for (int d = 0; d < dims; ++d) mu(c, d) = u(rng), sd(c, d) = s(rng);
  Eigen::MatrixXd v(n * kNumClasses, dims);
  std::vector<ClassLabel> labels;
  std::normal_distribution<double> z(0, 1);
  for (int c = 0; c < kNumClasses; ++c)
    for (int i = 0; i < n; ++i) {
      for (int d = 0; d < dims; ++d) v(c * n + i, d) = mu(c, d) + sd(c, d) * z(rng);
      labels.push_back(label_from_code(c));
    }
  const auto model = gnb_fit(make_features(v, labels));
  for (int c = 0; c < kNumClasses; ++c)
    for (int d = 0; d < dims; ++d) {
      EXPECT_LE(std::abs(model.means(c, d) - mu(c, d)), 3 * sd(c, d) / std::sqrt(n));
      // Sample variance has std ~ sigma^2 sqrt(2/n).
      EXPECT_LE(std::abs(model.variances(c, d) - sd(c, d) * sd(c, d)), 4 * sd(c, d) * sd(c, d) * std::sqrt(2.0 / n));
    }
}

GnbModel one_d_model(double mu0, double mu1, double var) {
  GnbModel m;
  m.means = Eigen::MatrixXd::Zero(kNumClasses, 1);
  m.variances = Eigen::MatrixXd::Constant(kNumClasses, 1, var);
  m.means(0, 0) = mu0;
  m.means(1, 0) = mu1;
  m.present = {true, true, false, false, false};
  m.priors = {0.5, 0.5, 0, 0, 0};
  m.var_floor = 1e-12;
  return m;
}

TEST(GnbPredict, ClosedFormTwoClassPosterior) {
  const auto p = gnb_predict_proba(one_d_model(0, 2, 1), Eigen::VectorXd::Constant(1, 0.5));
  const double e = std::exp(1.0);
  EXPECT_NEAR(p.proba[0], e / (e + 1), 1e-12);
  EXPECT_NEAR(p.proba[1], 1 / (e + 1), 1e-12);
  EXPECT_EQ(p.label, ClassLabel::Repetition);
}

TEST(GnbPredict, SymmetricQueryGivesEvenSplit) {
  const auto p = gnb_predict_proba(one_d_model(-1, 1, 1), Eigen::VectorXd::Zero(1));
  EXPECT_NEAR(p.proba[0], 0.5, 1e-15);
  EXPECT_NEAR(p.proba[1], 0.5, 1e-15);
  EXPECT_EQ(p.label, ClassLabel::Repetition);  // tie -> lower code
}

TEST(GnbPredict, DeepBasinQuery) {
  const auto train = gaussian_clusters(200, 5, 20.0, 12);
  const auto model = gnb_fit(train);
  for (int c = 0; c < kNumClasses; ++c) {
    Eigen::VectorXd q = model.means.row(c).transpose();
    const auto p = gnb_predict_proba(model, q);
    EXPECT_GE(p.proba[c], 1 - 1e-6);
    const auto oracle = gnb_oracle(model, q);
    EXPECT_NEAR(p.proba[c], oracle[c], 1e-10);
  }
}

TEST(GnbPredict, MatchesDirectDensityOracle) {
  Rng rng(99);
  std::uniform_int_distribution<int> dims(1, 8);
  for (int inst = 0; inst < 50; ++inst) {
    const auto train = gaussian_clusters(10, dims(rng), 1.0, 1000 + inst);
    const auto model = gnb_fit(train);
    for (int q = 0; q < 10; ++q) {
      const Eigen::VectorXd query = testing::random_normal(train.cols(), 1, rng, 1.0);
      const auto got = gnb_predict_proba(model, query);
      const auto want = gnb_oracle(model, query);
      for (int c = 0; c < kNumClasses; ++c) ASSERT_NEAR(got.proba[c], want[c], 1e-10);
      double total = 0;
      for (double v : got.proba) total += v;
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(GnbPredict, NoUnderflowFarFromAllMeans) {
  const auto train = gaussian_clusters(50, 4, 3.0, 13);
  const auto model = gnb_fit(train);
  const double sigma = std::sqrt(model.variances.maxCoeff());
  for (double dist : {10.0, 50.0, 100.0}) {
    const Eigen::VectorXd q = Eigen::VectorXd::Constant(4, dist * sigma + model.means.maxCoeff());
    const auto p = gnb_predict_proba(model, q);
    double total = 0;
    for (double v : p.proba) {
      EXPECT_TRUE(std::isfinite(v));
      total += v;
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(GnbPredict, ShiftInvariance) {
  const auto train = gaussian_clusters(30, 3, 2.0, 14);
  const auto test = gaussian_clusters(5, 3, 2.0, 15);
  Eigen::RowVectorXd shift(3);
  shift << 50, -20, 3;
  const auto a = gnb_fit(train), b = gnb_fit(train.with_values(train.values.rowwise() + shift));
  for (Eigen::Index i = 0; i < test.rows(); ++i) {
    const Eigen::RowVectorXd q = test.values.row(i);
    const auto pa = gnb_predict_proba(a, q), pb = gnb_predict_proba(b, Eigen::RowVectorXd(q + shift));
    EXPECT_EQ(pa.label, pb.label);
    for (int c = 0; c < kNumClasses; ++c) EXPECT_NEAR(pa.proba[c], pb.proba[c], 1e-9);
  }
}

TEST(GnbPredict, ArgmaxInvariantToPriorScaling) {
  const auto train = gaussian_clusters(30, 3, 1.0, 16);
  const auto model = gnb_fit(train);
  auto scaled = model;
  for (auto& p : scaled.priors) p *= 7.5;
  const auto test = gaussian_clusters(20, 3, 1.0, 17);
  for (Eigen::Index i = 0; i < test.rows(); ++i) {
    const Eigen::RowVectorXd q = test.values.row(i);
    const auto a = gnb_predict_proba(model, q), b = gnb_predict_proba(scaled, q);
    EXPECT_EQ(a.label, b.label);
    for (int c = 0; c < kNumClasses; ++c) EXPECT_NEAR(a.proba[c], b.proba[c], 1e-12);
  }
}

TEST(GnbPredict, DimensionMismatch) {
  const auto model = gnb_fit(gaussian_clusters(3, 3, 1.0, 1));
  EXPECT_EQ(code_of([&] { gnb_predict_proba(model, Eigen::VectorXd::Zero(2)); }), ErrorCode::DimensionMismatch);
}

}  // namespace
}  // namespace stutter
