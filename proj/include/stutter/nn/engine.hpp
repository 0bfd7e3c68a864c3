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

// Minimal reverse-mode engine for stacks of fully-connected layers. Each layer caches what its
// backward pass needs during forward; Sequential replays the stack in reverse.

#include <cmath>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "stutter/error.hpp"
#include "stutter/rng.hpp"

namespace stutter::nn {

/// Rows are samples, columns are features.
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

struct ForwardContext {
  bool training = false;
  /// Source of dropout masks. Null disables dropout even in training mode.
  Rng* dropout_rng = nullptr;
  /// Whether training-mode batch norm updates its running statistics.
  bool update_running_stats = true;
};

template <typename Scalar>
struct ParamRef {
  Mat<Scalar>* value;
  Mat<Scalar>* grad;
  std::string name;
};

template <typename Scalar>
struct Linear {
  Mat<Scalar> weight;  // in x out
  Mat<Scalar> bias;    // 1 x out
  Mat<Scalar> grad_weight, grad_bias;
  Mat<Scalar> input;

  Linear() = default;
  Linear(Eigen::Index in, Eigen::Index out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    weight.resize(in, out);
    bias.resize(1, out);
    for (Eigen::Index j = 0; j < out; ++j)
      for (Eigen::Index i = 0; i < in; ++i) weight(i, j) = static_cast<Scalar>(dist(rng));
    for (Eigen::Index j = 0; j < out; ++j) bias(0, j) = static_cast<Scalar>(dist(rng));
    grad_weight = Mat<Scalar>::Zero(in, out);
    grad_bias = Mat<Scalar>::Zero(1, out);
  }

  Mat<Scalar> forward(const Mat<Scalar>& x, const ForwardContext&) {
    if (x.cols() != weight.rows())
      fail(ErrorCode::DimensionMismatch, "linear layer expects " + std::to_string(weight.rows()) + " inputs");
    input = x;
    Mat<Scalar> y = x * weight;
    y.rowwise() += bias.row(0);
    return y;
  }

  Mat<Scalar> infer(const Mat<Scalar>& x) const {
    if (x.cols() != weight.rows())
      fail(ErrorCode::DimensionMismatch, "linear layer expects " + std::to_string(weight.rows()) + " inputs");
    Mat<Scalar> y = x * weight;
    y.rowwise() += bias.row(0);
    return y;
  }

  Mat<Scalar> backward(const Mat<Scalar>& g) {
    grad_weight.noalias() += input.transpose() * g;
    grad_bias += g.colwise().sum();
    return g * weight.transpose();
  }

  void collect(std::vector<ParamRef<Scalar>>& out, const std::string& prefix) {
    out.push_back({&weight, &grad_weight, prefix + "weight"});
    out.push_back({&bias, &grad_bias, prefix + "bias"});
  }
};

template <typename Scalar>
struct Relu {
  Mat<Scalar> mask;

  Mat<Scalar> forward(const Mat<Scalar>& x, const ForwardContext&) {
    mask = (x.array() > Scalar(0)).template cast<Scalar>();
    return x.cwiseProduct(mask);
  }
  Mat<Scalar> infer(const Mat<Scalar>& x) const { return x.cwiseMax(Scalar(0)); }
  Mat<Scalar> backward(const Mat<Scalar>& g) { return g.cwiseProduct(mask); }
  void collect(std::vector<ParamRef<Scalar>>&, const std::string&) {}
};

/// Per-feature batch normalization. Running variance uses the unbiased batch estimate.
template <typename Scalar>
struct BatchNorm {
  Mat<Scalar> gamma, beta;  // 1 x F
  Mat<Scalar> grad_gamma, grad_beta;
  RowVec<Scalar> running_mean, running_var;
  double eps = 1e-5;
  double momentum = 0.1;
  // cache
  Mat<Scalar> normalized;
  RowVec<Scalar> inv_std;
  bool cached_training = false;

  BatchNorm() = default;
  BatchNorm(Eigen::Index features, double eps_, double momentum_) : eps(eps_), momentum(momentum_) {
    gamma = Mat<Scalar>::Ones(1, features);
    beta = Mat<Scalar>::Zero(1, features);
    grad_gamma = Mat<Scalar>::Zero(1, features);
    grad_beta = Mat<Scalar>::Zero(1, features);
    running_mean = RowVec<Scalar>::Zero(features);
    running_var = RowVec<Scalar>::Ones(features);
  }

  Mat<Scalar> forward(const Mat<Scalar>& x, const ForwardContext& ctx) {
    const Eigen::Index n = x.rows();
    cached_training = ctx.training;
    if (ctx.training) {
      const RowVec<Scalar> mean = x.colwise().mean();
      const Mat<Scalar> centered = x.rowwise() - mean;
      const RowVec<Scalar> var = centered.array().square().colwise().mean();
      inv_std = (var.array() + Scalar(eps)).rsqrt();
      normalized = centered.array().rowwise() * inv_std.array();
      if (ctx.update_running_stats && n > 1) {
        const Scalar m(momentum);
        const Scalar unbias = Scalar(n) / Scalar(n - 1);
        running_mean = (Scalar(1) - m) * running_mean + m * mean;
        running_var = (Scalar(1) - m) * running_var + m * unbias * var;
      }
    } else {
      inv_std = (running_var.array() + Scalar(eps)).rsqrt();
      normalized = (x.rowwise() - running_mean).array().rowwise() * inv_std.array();
    }
    Mat<Scalar> y = normalized.array().rowwise() * gamma.row(0).array();
    y.rowwise() += beta.row(0);
    return y;
  }

  /// Inference mode: running statistics, no caching.
  Mat<Scalar> infer(const Mat<Scalar>& x) const {
    const RowVec<Scalar> scale = (running_var.array() + Scalar(eps)).rsqrt() * gamma.row(0).array();
    Mat<Scalar> y = (x.rowwise() - running_mean).array().rowwise() * scale.array();
    y.rowwise() += beta.row(0);
    return y;
  }

  Mat<Scalar> backward(const Mat<Scalar>& g) {
    grad_gamma += (g.cwiseProduct(normalized)).colwise().sum();
    grad_beta += g.colwise().sum();
    const Mat<Scalar> g_hat = g.array().rowwise() * gamma.row(0).array();
    if (!cached_training) return g_hat.array().rowwise() * inv_std.array();
    const Scalar n = Scalar(g.rows());
    const RowVec<Scalar> mean_g = g_hat.colwise().sum() / n;
    const RowVec<Scalar> mean_gx = g_hat.cwiseProduct(normalized).colwise().sum() / n;
    Mat<Scalar> out = g_hat.rowwise() - mean_g;
    out -= (normalized.array().rowwise() * mean_gx.array()).matrix();
    return out.array().rowwise() * inv_std.array();
  }

  void collect(std::vector<ParamRef<Scalar>>& out, const std::string& prefix) {
    out.push_back({&gamma, &grad_gamma, prefix + "gamma"});
    out.push_back({&beta, &grad_beta, prefix + "beta"});
  }
};

/// Inverted dropout: kept activations are scaled by 1/(1-rate) during training.
template <typename Scalar>
struct Dropout {
  double rate = 0.0;
  Mat<Scalar> mask;
  bool active = false;

  Dropout() = default;
  explicit Dropout(double r) : rate(r) {}

  Mat<Scalar> forward(const Mat<Scalar>& x, const ForwardContext& ctx) {
    active = ctx.training && ctx.dropout_rng != nullptr && rate > 0.0;
    if (!active) return x;
    std::bernoulli_distribution keep(1.0 - rate);
    const Scalar scale = Scalar(1.0 / (1.0 - rate));
    mask.resize(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      for (Eigen::Index i = 0; i < x.rows(); ++i) mask(i, j) = keep(*ctx.dropout_rng) ? scale : Scalar(0);
    return x.cwiseProduct(mask);
  }
  Mat<Scalar> infer(const Mat<Scalar>& x) const { return x; }
  Mat<Scalar> backward(const Mat<Scalar>& g) { return active ? Mat<Scalar>(g.cwiseProduct(mask)) : g; }
  void collect(std::vector<ParamRef<Scalar>>&, const std::string&) {}
};

template <typename Scalar>
using Layer = std::variant<Linear<Scalar>, Relu<Scalar>, BatchNorm<Scalar>, Dropout<Scalar>>;

template <typename Scalar>
class Sequential {
 public:
  Sequential() = default;
  explicit Sequential(std::vector<Layer<Scalar>> layers) : layers_(std::move(layers)) {}

  void add(Layer<Scalar> layer) { layers_.push_back(std::move(layer)); }

  Mat<Scalar> forward(const Mat<Scalar>& x, const ForwardContext& ctx) {
    Mat<Scalar> h = x;
    for (auto& layer : layers_) h = std::visit([&](auto& l) { return l.forward(h, ctx); }, layer);
    return h;
  }

  /// Inference-mode forward pass; touches no cached state, so it is safe to share across threads.
  Mat<Scalar> predict(const Mat<Scalar>& x) const {
    Mat<Scalar> h = x;
    for (const auto& layer : layers_) h = std::visit([&](const auto& l) { return l.infer(h); }, layer);
    return h;
  }

  /// Accumulates parameter gradients; returns the gradient with respect to the input.
  Mat<Scalar> backward(const Mat<Scalar>& grad_out) {
    Mat<Scalar> g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
      g = std::visit([&](auto& l) { return l.backward(g); }, *it);
    return g;
  }

  std::vector<ParamRef<Scalar>> parameters() {
    std::vector<ParamRef<Scalar>> out;
    for (std::size_t i = 0; i < layers_.size(); ++i)
      std::visit([&](auto& l) { l.collect(out, std::to_string(i) + "."); }, layers_[i]);
    return out;
  }

  void zero_grad() {
    for (auto& p : parameters()) p.grad->setZero();
  }

  Eigen::Index parameter_count() {
    Eigen::Index n = 0;
    for (auto& p : parameters()) n += p.value->size();
    return n;
  }

  std::vector<Layer<Scalar>>& layers() { return layers_; }
  const std::vector<Layer<Scalar>>& layers() const { return layers_; }

 private:
  std::vector<Layer<Scalar>> layers_;
};

/// Mean (or weighted mean) softmax cross-entropy over rows. Returns the loss and writes dL/dlogits.
/// With weights, the loss is sum_i w_i CE_i / sum_i w_i; a zero total weight yields zero loss.
template <typename Scalar>
Scalar softmax_cross_entropy(const Mat<Scalar>& logits, const std::vector<int>& targets, Mat<Scalar>* grad,
                             const std::vector<Scalar>* weights = nullptr) {
  const Eigen::Index n = logits.rows();
  if (static_cast<Eigen::Index>(targets.size()) != n) fail(ErrorCode::LengthMismatch, "targets vs logits rows");
  if (weights && static_cast<Eigen::Index>(weights->size()) != n) fail(ErrorCode::LengthMismatch, "weights");
  Scalar total_weight(0);
  for (Eigen::Index i = 0; i < n; ++i) total_weight += weights ? (*weights)[i] : Scalar(1);
  if (grad) *grad = Mat<Scalar>::Zero(n, logits.cols());
  if (total_weight == Scalar(0)) return Scalar(0);
  Scalar loss(0);
  using std::exp;
  using std::log;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int t = targets[i];
    if (t < 0 || t >= logits.cols()) fail(ErrorCode::InvalidArgument, "target out of range");
    const Scalar w = weights ? (*weights)[i] : Scalar(1);
    const Scalar peak = logits.row(i).maxCoeff();
    RowVec<Scalar> e = (logits.row(i).array() - peak).exp();
    const Scalar z = e.sum();
    loss += w * (log(z) + peak - logits(i, t));
    if (grad && w != Scalar(0)) {
      grad->row(i) = e / z;
      (*grad)(i, t) -= Scalar(1);
      grad->row(i) *= w / total_weight;
    }
  }
  return loss / total_weight;
}

/// 0.5 * mean over rows of the squared error.
template <typename Scalar>
Scalar squared_error(const Mat<Scalar>& out, const Mat<Scalar>& target, Mat<Scalar>* grad) {
  if (out.rows() != target.rows() || out.cols() != target.cols())
    fail(ErrorCode::DimensionMismatch, "squared_error shapes");
  const Mat<Scalar> diff = out - target;
  const Scalar n = Scalar(out.rows());
  if (grad) *grad = diff / n;
  return Scalar(0.5) * diff.squaredNorm() / n;
}

template <typename Scalar>
Mat<Scalar> softmax_rows(const Mat<Scalar>& logits) {
  Mat<Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const Scalar peak = logits.row(i).maxCoeff();
    RowVec<Scalar> e = (logits.row(i).array() - peak).exp();
    out.row(i) = e / e.sum();
  }
  return out;
}

/// Adam with bias-corrected moments.
template <typename Scalar>
class Adam {
 public:
  struct Options {
    double lr = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam() = default;
  Adam(std::vector<ParamRef<Scalar>> params, Options opts) : params_(std::move(params)), opts_(opts) {
    for (auto& p : params_) {
      m_.push_back(Mat<Scalar>::Zero(p.value->rows(), p.value->cols()));
      v_.push_back(Mat<Scalar>::Zero(p.value->rows(), p.value->cols()));
    }
  }

  void step() {
    ++t_;
    const Scalar b1(opts_.beta1), b2(opts_.beta2);
    const Scalar c1 = Scalar(1) - Scalar(std::pow(opts_.beta1, t_));
    const Scalar c2 = Scalar(1) - Scalar(std::pow(opts_.beta2, t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& g = *params_[i].grad;
      m_[i] = b1 * m_[i] + (Scalar(1) - b1) * g;
      v_[i] = b2 * v_[i] + (Scalar(1) - b2) * g.cwiseProduct(g);
      const auto m_hat = m_[i].array() / c1;
      const auto v_hat = v_[i].array() / c2;
      params_[i].value->array() -= Scalar(opts_.lr) * m_hat / (v_hat.sqrt() + Scalar(opts_.eps));
    }
  }

  long steps() const { return t_; }

 private:
  std::vector<ParamRef<Scalar>> params_;
  Options opts_;
  std::vector<Mat<Scalar>> m_, v_;
  long t_ = 0;
};

}  // namespace stutter::nn
