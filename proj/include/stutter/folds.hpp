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
#include <set>
#include <string>
#include <vector>

#include "stutter/error.hpp"
#include "stutter/rng.hpp"

namespace stutter {

inline constexpr int kNumFolds = 10;

struct FoldSplit {
  std::set<std::string> train, valid, eval;
};

struct FoldPlan {
  std::vector<FoldSplit> folds;
};

/// Podcast-level 10-fold rotation: podcasts are shuffled with the seed and cut into 10
/// contiguous blocks; fold i evaluates on block i, validates on block i+1 (mod 10) and trains
/// on the remaining eight.
inline FoldPlan make_folds(const std::vector<std::string>& podcast_ids, std::uint64_t seed) {
  std::vector<std::string> pods(podcast_ids.begin(), podcast_ids.end());
  std::sort(pods.begin(), pods.end());
  pods.erase(std::unique(pods.begin(), pods.end()), pods.end());
  const std::size_t n = pods.size();
  if (n < static_cast<std::size_t>(kNumFolds))
    fail(ErrorCode::TooFewPodcasts, std::to_string(n) + " podcasts, need at least " + std::to_string(kNumFolds));
  Rng rng(derive_seed(seed, {0xF01D5u}));
  std::shuffle(pods.begin(), pods.end(), rng);

  const auto block_of = [&](std::size_t i) {
    // Largest b with floor(b*n/10) <= i.
    std::size_t b = (i * kNumFolds) / n;
    while (b + 1 < kNumFolds && ((b + 1) * n) / kNumFolds <= i) ++b;
    while (b > 0 && (b * n) / kNumFolds > i) --b;
    return b;
  };
  FoldPlan plan;
  plan.folds.resize(kNumFolds);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t b = block_of(i);
    for (std::size_t f = 0; f < kNumFolds; ++f) {
      auto& split = plan.folds[f];
      if (b == f)
        split.eval.insert(pods[i]);
      else if (b == (f + 1) % kNumFolds)
        split.valid.insert(pods[i]);
      else
        split.train.insert(pods[i]);
    }
  }
  return plan;
}

inline FoldPlan make_folds(const std::set<std::string>& podcast_ids, std::uint64_t seed) {
  return make_folds(std::vector<std::string>(podcast_ids.begin(), podcast_ids.end()), seed);
}

}  // namespace stutter
