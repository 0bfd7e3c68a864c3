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
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/QR>

#include "stutter/emb1.hpp"
#include "stutter/error.hpp"
#include "stutter/labels.hpp"
#include "stutter/manifest.hpp"
#include "stutter/rng.hpp"

namespace stutter {

/// Fluent-majority class frequencies (R, P, B, I, F).
inline constexpr std::array<double, kNumClasses> kDefaultClassProfile = {0.12, 0.08, 0.08, 0.14, 0.58};

inline std::vector<int> all_w2v2_layers() {
  std::vector<int> layers(kNumW2v2Layers);
  std::iota(layers.begin(), layers.end(), 1);
  return layers;
}

struct SyntheticOptions {
  int num_podcasts = 10;
  int clips_per_podcast = 20;
  /// Distance between any two class means, in units of the within-class frame std.
  double class_sep = 10.0;
  std::uint64_t seed = 0;
  std::array<double, kNumClasses> class_profile = kDefaultClassProfile;
  std::vector<int> layers = all_w2v2_layers();         // w2v2 layers to emit
  std::vector<int> signal_layers = all_w2v2_layers();  // layers whose class means differ
  bool emit_ecapa = true;
  bool ecapa_signal = true;
  int min_frames = 140;
  int max_frames = 160;
  double noise_std = 1.0;
};

namespace detail {

/// Five orthonormal directions in R^dims, fixed by (seed, stream).
inline Eigen::MatrixXd class_directions(std::uint64_t seed, int stream, int dims) {
  Rng rng(derive_seed(seed, {0xD1u, static_cast<std::uint64_t>(stream)}));
  std::normal_distribution<double> normal;
  Eigen::MatrixXd raw(dims, kNumClasses);
  for (Eigen::Index j = 0; j < raw.cols(); ++j)
    for (Eigen::Index i = 0; i < raw.rows(); ++i) raw(i, j) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
  return qr.householderQ() * Eigen::MatrixXd::Identity(dims, kNumClasses);
}

inline std::string two_digits(int v) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%02d", v);
  return buf;
}

inline std::string zero_pad(int v, int width) {
  std::string s = std::to_string(v);
  return std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

}  // namespace detail

/// Writes a synthetic dataset (EMB1 files under out_dir/emb and out_dir/manifest.csv).
///
/// Frames of a class-c clip are mean_c + noise, noise ~ N(0, noise_std^2) per element, with
/// mean_c = class_sep / sqrt(2) * u_c for orthonormal u_c, so every pair of class means is
/// class_sep apart. Layers outside signal_layers use a zero mean for all classes. Every clip,
/// label and tensor is a function of (seed, clip index, layer) only.
inline DatasetManifest generate_synthetic(const SyntheticOptions& opts, const std::filesystem::path& out_dir) {
  if (opts.num_podcasts < 10) fail(ErrorCode::InvalidArgument, "need at least 10 podcasts for 10 folds");
  if (opts.clips_per_podcast < 1) fail(ErrorCode::InvalidArgument, "clips_per_podcast must be >= 1");
  if (!(opts.class_sep >= 0.0) || !std::isfinite(opts.class_sep)) fail(ErrorCode::InvalidArgument, "class_sep must be >= 0");
  if (!(opts.noise_std > 0.0)) fail(ErrorCode::InvalidArgument, "noise_std must be > 0");
  if (opts.min_frames < 1 || opts.max_frames < opts.min_frames) fail(ErrorCode::InvalidArgument, "frame range");
  double profile_total = 0.0;
  for (double p : opts.class_profile) {
    if (!(p >= 0.0)) fail(ErrorCode::InvalidArgument, "class profile must be non-negative");
    profile_total += p;
  }
  if (!(profile_total > 0.0)) fail(ErrorCode::InvalidArgument, "class profile sums to zero");
  for (int l : opts.layers)
    if (l < 1 || l > kNumW2v2Layers) fail(ErrorCode::InvalidArgument, "layer " + std::to_string(l));

  std::error_code ec;
  std::filesystem::create_directories(out_dir / "emb", ec);
  if (ec) fail(ErrorCode::IoFailure, "cannot create " + (out_dir / "emb").string());

  const double scale = opts.class_sep / std::sqrt(2.0);
  std::vector<Eigen::MatrixXd> w2v2_means(kNumW2v2Layers + 1);
  for (int l : opts.layers) {
    const bool signal = std::find(opts.signal_layers.begin(), opts.signal_layers.end(), l) != opts.signal_layers.end();
    w2v2_means[l] = signal ? Eigen::MatrixXd(scale * detail::class_directions(opts.seed, l, kW2v2Dim))
                           : Eigen::MatrixXd::Zero(kW2v2Dim, kNumClasses);
  }
  const Eigen::MatrixXd ecapa_means = opts.ecapa_signal
                                          ? Eigen::MatrixXd(scale * detail::class_directions(opts.seed, 0, kEcapaDim))
                                          : Eigen::MatrixXd::Zero(kEcapaDim, kNumClasses);

  std::discrete_distribution<int> label_dist(opts.class_profile.begin(), opts.class_profile.end());
  DatasetManifest manifest;
  manifest.base_dir = out_dir;
  Tensor tensor;
  const auto emit = [&](const ManifestRow& proto, Source source, int layer, const Eigen::MatrixXd& means, int frames,
                        std::uint64_t clip_index) {
    const int dims = static_cast<int>(means.rows());
    Rng rng(derive_seed(opts.seed, {clip_index, static_cast<std::uint64_t>(layer) + 1}));
    std::normal_distribution<double> normal(0.0, opts.noise_std);
    tensor.resize(frames, dims);
    const auto mean = means.col(code(proto.label));
    for (int t = 0; t < frames; ++t)
      for (int d = 0; d < dims; ++d) tensor(t, d) = static_cast<float>(mean(d) + normal(rng));
    ManifestRow row = proto;
    row.source = source;
    row.layer = layer;
    row.path = "emb/" + proto.clip_id + (source == Source::Ecapa ? "_ecapa" : "_w2v2_L" + detail::two_digits(layer)) + ".emb";
    row.resolved = out_dir / row.path;
    write_embedding(tensor, row.resolved);
    manifest.rows.push_back(std::move(row));
  };

  for (int p = 0; p < opts.num_podcasts; ++p) {
    for (int c = 0; c < opts.clips_per_podcast; ++c) {
      const auto clip_index = static_cast<std::uint64_t>(p) * static_cast<std::uint64_t>(opts.clips_per_podcast) + c;
      Rng meta_rng(derive_seed(opts.seed, {clip_index, 0}));
      ManifestRow proto;
      proto.podcast_id = "pod" + detail::zero_pad(p, 3);
      proto.clip_id = proto.podcast_id + "_clip" + detail::zero_pad(c, 4);
      proto.label = label_from_code(label_dist(meta_rng));
      const int frames = std::uniform_int_distribution<int>(opts.min_frames, opts.max_frames)(meta_rng);
      if (opts.emit_ecapa) emit(proto, Source::Ecapa, 0, ecapa_means, 1, clip_index);
      for (int l : opts.layers) emit(proto, Source::W2v2, l, w2v2_means[l], frames, clip_index);
    }
  }
  write_manifest(manifest, out_dir / "manifest.csv");
  return manifest;
}

}  // namespace stutter
