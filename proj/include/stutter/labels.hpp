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
#include <optional>
#include <string>
#include <string_view>

#include "stutter/error.hpp"

namespace stutter {

/// The five annotation outcomes, in canonical code order.
enum class ClassLabel : int {
  Repetition = 0,
  Prolongation = 1,
  Block = 2,
  Interjection = 3,
  Fluent = 4,
};

inline constexpr int kNumClasses = 5;
/// Classes handled by the disfluency branch: codes 0..3.
inline constexpr int kNumDisfluent = 4;
inline constexpr int kFluentCode = 4;

inline constexpr std::array<std::string_view, kNumClasses> kLabelNames = {
    "repetition", "prolongation", "block", "interjection", "fluent"};

/// Short column names used in reports (R, P, B, I, F).
inline constexpr std::array<std::string_view, kNumClasses> kLabelShort = {"R", "P", "B", "I", "F"};

constexpr int code(ClassLabel label) { return static_cast<int>(label); }

inline ClassLabel label_from_code(int c) {
  if (c < 0 || c >= kNumClasses) fail(ErrorCode::UnknownLabel, "class code " + std::to_string(c));
  return static_cast<ClassLabel>(c);
}

inline std::string_view to_string(ClassLabel label) { return kLabelNames[code(label)]; }

inline std::optional<ClassLabel> try_parse_label(std::string_view name) {
  for (int c = 0; c < kNumClasses; ++c)
    if (kLabelNames[c] == name) return static_cast<ClassLabel>(c);
  return std::nullopt;
}

inline ClassLabel parse_label(std::string_view name) {
  auto label = try_parse_label(name);
  if (!label) fail(ErrorCode::UnknownLabel, "'" + std::string(name) + "'");
  return *label;
}

constexpr bool is_fluent(ClassLabel label) { return label == ClassLabel::Fluent; }

/// Embedding producer.
enum class Source { Ecapa, W2v2 };

inline constexpr int kEcapaDim = 192;
inline constexpr int kW2v2Dim = 768;
inline constexpr int kNumW2v2Layers = 13;

inline std::string_view to_string(Source s) { return s == Source::Ecapa ? "ecapa" : "w2v2"; }

inline Source parse_source(std::string_view name) {
  if (name == "ecapa") return Source::Ecapa;
  if (name == "w2v2") return Source::W2v2;
  fail(ErrorCode::UnknownSource, "'" + std::string(name) + "'");
}

inline int expected_dim(Source s) { return s == Source::Ecapa ? kEcapaDim : kW2v2Dim; }

}  // namespace stutter
