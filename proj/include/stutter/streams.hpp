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
#include <atomic>
#include <exception>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "stutter/emb1.hpp"
#include "stutter/error.hpp"
#include "stutter/features.hpp"
#include "stutter/labels.hpp"
#include "stutter/manifest.hpp"

namespace stutter {

/// One embedding stream: ECAPA (layer 0) or a single Wav2Vec2.0 layer.
struct StreamId {
  Source source = Source::W2v2;
  int layer = 11;

  friend bool operator==(const StreamId&, const StreamId&) = default;
  friend auto operator<=>(const StreamId&, const StreamId&) = default;
};

inline StreamId ecapa_stream() { return {Source::Ecapa, 0}; }
inline StreamId w2v2_stream(int layer) { return {Source::W2v2, layer}; }

inline std::string to_string(const StreamId& s) {
  return s.source == Source::Ecapa ? std::string("ecapa") : "w2v2_L" + std::to_string(s.layer);
}

/// Fixed-length features per stream, all sharing the same row order.
struct StreamData {
  std::vector<StreamId> ids;
  std::vector<FeatureMatrix> features;

  const FeatureMatrix& at(const StreamId& id) const {
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (ids[i] == id) return features[i];
    fail(ErrorCode::MissingStream, to_string(id));
  }
  bool has(const StreamId& id) const { return std::find(ids.begin(), ids.end(), id) != ids.end(); }
  Eigen::Index rows() const { return features.empty() ? 0 : features.front().rows(); }
};

/// ECAPA vectors (T=1) pass through unchanged; everything else is mean+std pooled.
inline Eigen::VectorXd clip_features(const Tensor& tensor, Source source) {
  if (source == Source::Ecapa && tensor.rows() == 1) return tensor.row(0).transpose().cast<double>();
  return statistical_pool(tensor);
}

/// Reads and pools the requested streams for every clip, in manifest first-appearance order.
/// Every clip must provide every requested stream.
inline StreamData load_streams(const DatasetManifest& manifest, const std::vector<StreamId>& wanted, int jobs = 1) {
  std::vector<std::string> clip_order;
  std::map<std::string, std::size_t> clip_index;
  std::vector<const ManifestRow*> first_row;
  std::map<std::pair<std::size_t, StreamId>, const ManifestRow*> lookup;
  for (const auto& row : manifest.rows) {
    auto [it, inserted] = clip_index.emplace(row.clip_id, clip_order.size());
    if (inserted) {
      clip_order.push_back(row.clip_id);
      first_row.push_back(&row);
    } else {
      const auto& first = *first_row[it->second];
      if (first.label != row.label || first.podcast_id != row.podcast_id)
        fail(ErrorCode::InconsistentClip, "clip " + row.clip_id + " has conflicting label or podcast");
    }
    lookup[{it->second, StreamId{row.source, row.layer}}] = &row;
  }

  StreamData data;
  data.ids = wanted;
  const std::size_t n = clip_order.size();
  for (const auto& id : wanted) {
    FeatureMatrix m;
    m.clip_ids = clip_order;
    for (std::size_t i = 0; i < n; ++i) {
      if (!lookup.count({i, id})) fail(ErrorCode::MissingStream, "clip " + clip_order[i] + " lacks " + to_string(id));
      m.labels.push_back(first_row[i]->label);
      m.podcast_ids.push_back(first_row[i]->podcast_id);
    }
    data.features.push_back(std::move(m));
  }

  // Units of work: (stream, clip). Results land in fixed slots, so output is independent of jobs.
  std::vector<std::vector<Eigen::VectorXd>> pooled(wanted.size(), std::vector<Eigen::VectorXd>(n));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  const auto worker = [&] {
    for (std::size_t u = next++; u < wanted.size() * n; u = next++) {
      const std::size_t s = u / n, i = u % n;
      try {
        const ManifestRow* row = lookup.at({i, wanted[s]});
        pooled[s][i] = clip_features(read_embedding(row->resolved), row->source);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, jobs);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  for (std::size_t s = 0; s < wanted.size(); ++s) {
    const Eigen::Index width = n ? pooled[s][0].size() : 0;
    auto& values = data.features[s].values;
    values.resize(static_cast<Eigen::Index>(n), width);
    for (std::size_t i = 0; i < n; ++i) {
      if (pooled[s][i].size() != width)
        fail(ErrorCode::DimensionMismatch, "clip " + clip_order[i] + " has a different feature width");
      values.row(static_cast<Eigen::Index>(i)) = pooled[s][i].transpose();
    }
  }
  return data;
}

/// Distinct streams present in a manifest, sorted.
inline std::vector<StreamId> available_streams(const DatasetManifest& manifest) {
  std::vector<StreamId> out;
  for (const auto& row : manifest.rows) {
    StreamId id{row.source, row.layer};
    if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace stutter
