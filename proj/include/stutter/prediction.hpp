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

#include "stutter/labels.hpp"

namespace stutter {

using ProbaVector = std::array<double, kNumClasses>;

struct Prediction {
  ClassLabel label = ClassLabel::Fluent;
  ProbaVector proba{};
};

/// Argmax with ties broken by the lower class code.
inline int argmax_lowest(const ProbaVector& p) {
  int best = 0;
  for (int c = 1; c < kNumClasses; ++c)
    if (p[c] > p[best]) best = c;
  return best;
}

}  // namespace stutter
