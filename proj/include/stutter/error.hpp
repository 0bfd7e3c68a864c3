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

#include <stdexcept>
#include <string>
#include <string_view>

namespace stutter {

enum class ErrorCode {
  // dataio
  MissingHeader,
  UnknownLabel,
  UnknownSource,
  DuplicateKey,
  UnresolvablePath,
  HeaderMismatch,
  InconsistentClip,
  BadMagic,
  UnsupportedVersion,
  TruncatedPayload,
  NonFiniteValue,
  IoFailure,
  // features / shapes
  EmptyTensor,
  ZeroVector,
  RowMisalignment,
  DimensionMismatch,
  LengthMismatch,
  // model fitting
  DegenerateScatter,
  MissingClass,
  InsufficientData,
  InvalidOrder,
  NoDisfluentSamples,
  DivergedLoss,
  // fusion / harness
  NotAProbability,
  InvalidAlpha,
  InvalidSpec,
  TooFewPodcasts,
  MissingLayer,
  MissingStream,
  InvalidArgument,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingHeader: return "MissingHeader";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::UnknownSource: return "UnknownSource";
    case ErrorCode::DuplicateKey: return "DuplicateKey";
    case ErrorCode::UnresolvablePath: return "UnresolvablePath";
    case ErrorCode::HeaderMismatch: return "HeaderMismatch";
    case ErrorCode::InconsistentClip: return "InconsistentClip";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::EmptyTensor: return "EmptyTensor";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::RowMisalignment: return "RowMisalignment";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DegenerateScatter: return "DegenerateScatter";
    case ErrorCode::MissingClass: return "MissingClass";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::InvalidOrder: return "InvalidOrder";
    case ErrorCode::NoDisfluentSamples: return "NoDisfluentSamples";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::NotAProbability: return "NotAProbability";
    case ErrorCode::InvalidAlpha: return "InvalidAlpha";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::TooFewPodcasts: return "TooFewPodcasts";
    case ErrorCode::MissingLayer: return "MissingLayer";
    case ErrorCode::MissingStream: return "MissingStream";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Errors that describe bad input (as opposed to a failure while computing).
inline bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingHeader:
    case ErrorCode::UnknownLabel:
    case ErrorCode::UnknownSource:
    case ErrorCode::DuplicateKey:
    case ErrorCode::UnresolvablePath:
    case ErrorCode::HeaderMismatch:
    case ErrorCode::InconsistentClip:
    case ErrorCode::BadMagic:
    case ErrorCode::UnsupportedVersion:
    case ErrorCode::TruncatedPayload:
    case ErrorCode::InvalidSpec:
    case ErrorCode::InvalidAlpha:
    case ErrorCode::TooFewPodcasts:
    case ErrorCode::MissingLayer:
    case ErrorCode::MissingStream:
    case ErrorCode::InvalidArgument:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace stutter
