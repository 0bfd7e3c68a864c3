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
#include <functional>
#include <vector>

#include "stutter/nn/engine.hpp"

namespace stutter::nn {

enum class LossKind { SoftmaxCrossEntropy, SquaredError };

template <typename Scalar>
struct CheckBatch {
  Mat<Scalar> inputs;
  std::vector<int> class_targets;  // SoftmaxCrossEntropy
  Mat<Scalar> value_targets;       // SquaredError
  LossKind loss = LossKind::SoftmaxCrossEntropy;
};

/// Optional hook applied to the analytic gradients before comparison.
template <typename Scalar>
using GradientTamper = std::function<void(std::vector<Mat<Scalar>>&)>;

namespace detail {

template <typename Scalar>
Scalar batch_loss(Sequential<Scalar>& net, const CheckBatch<Scalar>& batch, Mat<Scalar>* grad) {
  // Training-mode batch norm, no dropout, running statistics left untouched.
  const ForwardContext ctx{true, nullptr, false};
  const Mat<Scalar> out = net.forward(batch.inputs, ctx);
  if (batch.loss == LossKind::SquaredError) return squared_error(out, batch.value_targets, grad);
  return softmax_cross_entropy(out, batch.class_targets, grad);
}

}  // namespace detail

/// Compares backprop gradients against central finite differences of the batch loss.
/// Returns max over parameters of |g_a - g_fd| / max(1e-8, |g_a| + |g_fd|).
template <typename Scalar>
double gradient_check(Sequential<Scalar> net, const CheckBatch<Scalar>& batch, double epsilon = 1e-5,
                      const GradientTamper<Scalar>& tamper = {}) {
  net.zero_grad();
  Mat<Scalar> grad_out;
  detail::batch_loss(net, batch, &grad_out);
  net.backward(grad_out);

  auto params = net.parameters();
  std::vector<Mat<Scalar>> analytic;
  for (auto& p : params) analytic.push_back(*p.grad);
  if (tamper) tamper(analytic);

  double worst = 0.0;
  const Scalar eps(epsilon);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Mat<Scalar>& value = *params[pi].value;
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      const Scalar saved = value.data()[i];
      value.data()[i] = saved + eps;
      const Scalar up = detail::batch_loss<Scalar>(net, batch, nullptr);
      value.data()[i] = saved - eps;
      const Scalar down = detail::batch_loss<Scalar>(net, batch, nullptr);
      value.data()[i] = saved;
      const double numeric = static_cast<double>((up - down) / (Scalar(2) * eps));
      const double exact = static_cast<double>(analytic[pi].data()[i]);
      const double rel = std::abs(exact - numeric) / std::max(1e-8, std::abs(exact) + std::abs(numeric));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace stutter::nn
