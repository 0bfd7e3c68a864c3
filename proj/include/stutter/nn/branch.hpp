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
#include <limits>
#include <numeric>
#include <vector>

#include "stutter/error.hpp"
#include "stutter/features.hpp"
#include "stutter/labels.hpp"
#include "stutter/nn/engine.hpp"
#include "stutter/prediction.hpp"
#include "stutter/rng.hpp"

namespace stutter::nn {

struct BranchShape {
  Eigen::Index inputs = 0;
  Eigen::Index hidden1 = 256;
  Eigen::Index hidden2 = 64;
  Eigen::Index outputs = 2;
  double dropout = 0.2;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;
};

/// Three FC layers, each followed by ReLU then batch norm; dropout after the first two stages.
/// The softmax head lives in the loss and in prediction.
template <typename Scalar>
Sequential<Scalar> make_branch(const BranchShape& shape, Rng& rng) {
  Sequential<Scalar> net;
  const Eigen::Index widths[] = {shape.inputs, shape.hidden1, shape.hidden2, shape.outputs};
  for (int i = 0; i < 3; ++i) {
    net.add(Linear<Scalar>(widths[i], widths[i + 1], rng));
    net.add(Relu<Scalar>{});
    net.add(BatchNorm<Scalar>(widths[i + 1], shape.bn_eps, shape.bn_momentum));
    if (i < 2) net.add(Dropout<Scalar>(shape.dropout));
  }
  return net;
}

/// Fluent -> 0, any disfluency -> 1.
inline std::vector<int> pseudo_label(const std::vector<ClassLabel>& labels) {
  std::vector<int> out;
  out.reserve(labels.size());
  for (auto l : labels) out.push_back(is_fluent(l) ? 0 : 1);
  return out;
}

/// Stops after `patience` consecutive epochs without a strict improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  /// Records the loss of the next epoch (1-based); returns true if it is a new best.
  bool observe(double loss) {
    ++epoch_;
    if (loss < best_) {
      best_ = loss;
      best_epoch_ = epoch_;
      stale_ = 0;
      return true;
    }
    ++stale_;
    return false;
  }

  bool should_stop() const { return stale_ >= patience_; }
  int epoch() const { return epoch_; }
  int best_epoch() const { return best_epoch_; }
  double best() const { return best_; }

 private:
  int patience_;
  int epoch_ = 0;
  int best_epoch_ = 0;
  int stale_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

enum class StopCriterion { SumOfBranches, FluentOnly };

struct TwoBranchConfig {
  double learning_rate = 1e-2;
  int batch_size = 128;
  int max_epochs = 200;
  int patience = 7;
  std::uint64_t seed = 0;
  Eigen::Index hidden1 = 256;
  Eigen::Index hidden2 = 64;
  double dropout = 0.2;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  StopCriterion stop_on = StopCriterion::SumOfBranches;
};

struct EpochRecord {
  int epoch = 0;
  double fluent_train = 0, disfluent_train = 0;
  double fluent_valid = 0, disfluent_valid = 0;
};

struct TwoBranchModel {
  Sequential<double> fluent_net;     // 2 outputs: {fluent, disfluent}
  Sequential<double> disfluent_net;  // 4 outputs: repetition, prolongation, block, interjection
  TwoBranchConfig config;
  Eigen::Index input_dim = 0;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  int epochs_run = 0;
};

/// One FluentNet gradient evaluation on a batch (grads zeroed first). Returns the mean loss.
inline double fluent_step_gradients(Sequential<double>& net, const Mat<double>& x, const std::vector<ClassLabel>& labels,
                                    const ForwardContext& ctx) {
  net.zero_grad();
  const Mat<double> logits = net.forward(x, ctx);
  Mat<double> grad;
  const double loss = softmax_cross_entropy(logits, pseudo_label(labels), &grad);
  net.backward(grad);
  return loss;
}

/// One DisfluentNet gradient evaluation. Fluent rows carry zero loss weight; they are removed
/// before the forward pass so they influence neither the loss nor the batch statistics.
/// Returns the mean loss over disfluent rows, or NaN when fewer than two remain (no step).
inline double disfluent_step_gradients(Sequential<double>& net, const Mat<double>& x,
                                       const std::vector<ClassLabel>& labels, const ForwardContext& ctx) {
  net.zero_grad();
  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (!is_fluent(labels[i])) keep.push_back(static_cast<Eigen::Index>(i));
  if (keep.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  Mat<double> sub(static_cast<Eigen::Index>(keep.size()), x.cols());
  std::vector<int> targets;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    sub.row(static_cast<Eigen::Index>(i)) = x.row(keep[i]);
    targets.push_back(code(labels[keep[i]]));
  }
  const Mat<double> logits = net.forward(sub, ctx);
  Mat<double> grad;
  const double loss = softmax_cross_entropy(logits, targets, &grad);
  net.backward(grad);
  return loss;
}

namespace detail {

inline double fluent_eval_loss(const Sequential<double>& net, const FeatureMatrix& data) {
  return softmax_cross_entropy<double>(net.predict(data.values), pseudo_label(data.labels), nullptr);
}

inline double disfluent_eval_loss(const Sequential<double>& net, const FeatureMatrix& data) {
  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < data.labels.size(); ++i)
    if (!is_fluent(data.labels[i])) keep.push_back(static_cast<Eigen::Index>(i));
  if (keep.empty()) return 0.0;
  const FeatureMatrix sub = data.subset(keep);
  std::vector<int> targets;
  for (auto l : sub.labels) targets.push_back(code(l));
  return softmax_cross_entropy<double>(net.predict(sub.values), targets, nullptr);
}

}  // namespace detail

/// Trains FluentNet on pseudo-labels and DisfluentNet on disfluent rows over the same shuffled
/// batches, with one early-stopping clock on the validation loss; restores the best epoch.
inline TwoBranchModel train_two_branch(const FeatureMatrix& train, const FeatureMatrix& valid,
                                       const TwoBranchConfig& config = {}) {
  train.check();
  valid.check();
  if (train.rows() < 2 || valid.rows() < 1) fail(ErrorCode::InsufficientData, "training needs train and valid rows");
  if (valid.cols() != train.cols()) fail(ErrorCode::DimensionMismatch, "train and valid widths differ");
  if (config.batch_size < 2 || config.max_epochs < 1 || config.patience < 1)
    fail(ErrorCode::InvalidArgument, "batch_size >= 2, max_epochs >= 1 and patience >= 1 required");
  const auto disfluent_rows = std::count_if(train.labels.begin(), train.labels.end(), [](auto l) { return !is_fluent(l); });
  if (disfluent_rows < 2) fail(ErrorCode::NoDisfluentSamples, "DisfluentNet has no training signal");

  TwoBranchModel model;
  model.config = config;
  model.input_dim = train.cols();
  BranchShape shape{train.cols(), config.hidden1, config.hidden2, 2, config.dropout, config.bn_eps, config.bn_momentum};
  Rng init_rng(derive_seed(config.seed, {1}));
  model.fluent_net = make_branch<double>(shape, init_rng);
  shape.outputs = kNumDisfluent;
  model.disfluent_net = make_branch<double>(shape, init_rng);

  Rng shuffle_rng(derive_seed(config.seed, {2}));
  Rng fluent_dropout(derive_seed(config.seed, {3}));
  Rng disfluent_dropout(derive_seed(config.seed, {4}));
  const typename Adam<double>::Options adam_opts{config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps};
  Adam<double> fluent_opt(model.fluent_net.parameters(), adam_opts);
  Adam<double> disfluent_opt(model.disfluent_net.parameters(), adam_opts);

  Sequential<double> best_fluent = model.fluent_net;
  Sequential<double> best_disfluent = model.disfluent_net;
  EarlyStopping stopper(config.patience);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(train.rows()));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double fl_sum = 0, df_sum = 0;
    int fl_steps = 0, df_steps = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      if (stop - start < 2) continue;
      const std::span<const Eigen::Index> idx(order.data() + start, stop - start);
      const FeatureMatrix batch = train.subset(idx);

      const double fl = fluent_step_gradients(model.fluent_net, batch.values, batch.labels,
                                              ForwardContext{true, &fluent_dropout, true});
      if (!std::isfinite(fl)) fail(ErrorCode::DivergedLoss, "FluentNet loss at epoch " + std::to_string(epoch));
      fluent_opt.step();
      fl_sum += fl;
      ++fl_steps;

      const double df = disfluent_step_gradients(model.disfluent_net, batch.values, batch.labels,
                                                 ForwardContext{true, &disfluent_dropout, true});
      if (std::isnan(df)) continue;
      if (!std::isfinite(df)) fail(ErrorCode::DivergedLoss, "DisfluentNet loss at epoch " + std::to_string(epoch));
      disfluent_opt.step();
      df_sum += df;
      ++df_steps;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.fluent_train = fl_steps ? fl_sum / fl_steps : 0.0;
    rec.disfluent_train = df_steps ? df_sum / df_steps : 0.0;
    rec.fluent_valid = detail::fluent_eval_loss(model.fluent_net, valid);
    rec.disfluent_valid = detail::disfluent_eval_loss(model.disfluent_net, valid);
    if (!std::isfinite(rec.fluent_valid) || !std::isfinite(rec.disfluent_valid))
      fail(ErrorCode::DivergedLoss, "validation loss at epoch " + std::to_string(epoch));
    model.history.push_back(rec);

    const double monitored =
        config.stop_on == StopCriterion::FluentOnly ? rec.fluent_valid : rec.fluent_valid + rec.disfluent_valid;
    if (stopper.observe(monitored)) {
      best_fluent = model.fluent_net;
      best_disfluent = model.disfluent_net;
    }
    model.epochs_run = epoch;
    if (stopper.should_stop()) break;
  }
  model.fluent_net = std::move(best_fluent);
  model.disfluent_net = std::move(best_disfluent);
  model.best_epoch = stopper.best_epoch();
  return model;
}

/// Combines branch outputs. Label: fluent if FluentNet's fluent probability is at least its
/// disfluent probability, else DisfluentNet's argmax. Probabilities: p(fluent) from FluentNet,
/// p(c) = p(disfluent) * DisfluentNet's softmax for c.
inline Prediction combine_branches(double p_fluent, double p_disfluent, std::span<const double> disfluent_probs) {
  Prediction out;
  for (int c = 0; c < kNumDisfluent; ++c) out.proba[c] = p_disfluent * disfluent_probs[c];
  out.proba[kFluentCode] = p_fluent;
  if (p_fluent >= p_disfluent) {
    out.label = ClassLabel::Fluent;
  } else {
    int best = 0;
    for (int c = 1; c < kNumDisfluent; ++c)
      if (disfluent_probs[c] > disfluent_probs[best]) best = c;
    out.label = label_from_code(best);
  }
  return out;
}

inline std::vector<Prediction> two_branch_predict(const TwoBranchModel& model, const Eigen::MatrixXd& queries) {
  if (queries.cols() != model.input_dim)
    fail(ErrorCode::DimensionMismatch, "query width " + std::to_string(queries.cols()) + ", model " +
                                           std::to_string(model.input_dim));
  const Mat<double> pf = softmax_rows<double>(model.fluent_net.predict(queries));
  const Mat<double> pd = softmax_rows<double>(model.disfluent_net.predict(queries));
  std::vector<Prediction> out;
  out.reserve(static_cast<std::size_t>(queries.rows()));
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    const Eigen::RowVectorXd row = pd.row(i);
    out.push_back(combine_branches(pf(i, 0), pf(i, 1), std::span<const double>(row.data(), kNumDisfluent)));
  }
  return out;
}

inline Prediction two_branch_predict(const TwoBranchModel& model, const Eigen::VectorXd& query) {
  return two_branch_predict(model, Eigen::MatrixXd(query.transpose())).front();
}

}  // namespace stutter::nn
