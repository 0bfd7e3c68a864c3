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

#include <atomic>
#include <exception>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "stutter/error.hpp"
#include "stutter/folds.hpp"
#include "stutter/fusion.hpp"
#include "stutter/manifest.hpp"
#include "stutter/metrics.hpp"
#include "stutter/streams.hpp"

namespace stutter {

struct ExperimentOptions {
  std::uint64_t seed = 0;
  int repeats = 1;
  int jobs = 1;
  /// Draw a fresh fold plan per repeat instead of reusing the repeat-0 plan.
  bool reshuffle_folds = false;
  /// Keep every fitted pipeline in the result (for serialization).
  bool keep_models = false;
};

struct FoldReport {
  int fold = 0;
  int repeat = 0;
  MetricsRow metrics;
  Confusion confusion{};
  std::size_t n_train = 0, n_valid = 0, n_eval = 0;
  // Podcasts actually present in the rows handed to each role.
  std::set<std::string> train_podcasts, valid_podcasts, eval_podcasts;
  std::vector<Prediction> predictions;
  std::vector<ClassLabel> truths;
  std::vector<Eigen::Index> classifier_inputs;
  std::vector<std::vector<nn::EpochRecord>> curves;  // per NN classifier
  std::optional<FittedPipeline> model;
};

struct ExperimentResult {
  PipelineSpec spec;
  ExperimentOptions options;
  std::vector<FoldPlan> plans;     // one per repeat
  std::vector<FoldReport> reports;  // repeat-major, then fold
  MetricsTable table;
};

namespace detail {

inline std::vector<std::vector<nn::EpochRecord>> training_curves(const FittedPipeline& fitted) {
  std::vector<std::vector<nn::EpochRecord>> out;
  for (const auto& c : fitted.classifiers)
    if (const auto* m = std::get_if<nn::TwoBranchModel>(&c)) out.push_back(m->history);
  return out;
}

template <typename Fn>
void run_parallel(std::size_t units, int jobs, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  const auto worker = [&] {
    for (std::size_t u = next++; u < units; u = next++) {
      try {
        fn(u);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

inline std::string fold_context(int repeat, int fold) {
  return "repeat " + std::to_string(repeat) + ", fold " + std::to_string(fold) + ": ";
}

}  // namespace detail

/// Runs the pipeline through podcast-level 10-fold cross-validation, `repeats` times.
/// Every fit sees only that fold's train (and, for NN early stopping, valid) rows.
inline ExperimentResult run_experiment(const StreamData& data, const PipelineSpec& spec, const ExperimentOptions& options) {
  const Pipeline pipeline = build_pipeline(spec);
  if (options.repeats < 1) fail(ErrorCode::InvalidArgument, "repeats must be >= 1");
  std::vector<const FeatureMatrix*> streams;
  for (const auto& id : spec.streams) {
    if (!data.has(id)) fail(ErrorCode::MissingStream, "dataset lacks " + to_string(id));
    streams.push_back(&data.at(id));
  }
  const FeatureMatrix& anchor = *streams.front();
  for (const auto* s : streams)
    if (s->clip_ids != anchor.clip_ids) fail(ErrorCode::RowMisalignment, "streams disagree on clip order");

  ExperimentResult result;
  result.spec = spec;
  result.options = options;
  for (int r = 0; r < options.repeats; ++r) {
    const bool fresh = options.reshuffle_folds && r > 0;
    result.plans.push_back(
        make_folds(anchor.podcast_ids, fresh ? derive_seed(options.seed, {static_cast<std::uint64_t>(r)}) : options.seed));
  }

  const std::size_t units = static_cast<std::size_t>(options.repeats) * kNumFolds;
  result.reports.resize(units);
  detail::run_parallel(units, options.jobs, [&](std::size_t u) {
    const int repeat = static_cast<int>(u / kNumFolds);
    const int fold = static_cast<int>(u % kNumFolds);
    const FoldSplit& split = result.plans[static_cast<std::size_t>(repeat)].folds[static_cast<std::size_t>(fold)];
    std::vector<Eigen::Index> train_idx, valid_idx, eval_idx;
    for (Eigen::Index i = 0; i < anchor.rows(); ++i) {
      const auto& pod = anchor.podcast_ids[static_cast<std::size_t>(i)];
      if (split.eval.count(pod))
        eval_idx.push_back(i);
      else if (split.valid.count(pod))
        valid_idx.push_back(i);
      else
        train_idx.push_back(i);
    }
    std::vector<FeatureMatrix> train, valid, eval;
    for (const auto* s : streams) {
      train.push_back(s->subset(train_idx));
      valid.push_back(s->subset(valid_idx));
      eval.push_back(s->subset(eval_idx));
    }
    FoldReport report;
    report.fold = fold;
    report.repeat = repeat;
    report.n_train = train_idx.size();
    report.n_valid = valid_idx.size();
    report.n_eval = eval_idx.size();
    report.train_podcasts.insert(train.front().podcast_ids.begin(), train.front().podcast_ids.end());
    report.valid_podcasts.insert(valid.front().podcast_ids.begin(), valid.front().podcast_ids.end());
    report.eval_podcasts.insert(eval.front().podcast_ids.begin(), eval.front().podcast_ids.end());
    try {
      const auto seed = derive_seed(options.seed, {static_cast<std::uint64_t>(repeat), static_cast<std::uint64_t>(fold), 0x7u});
      FittedPipeline fitted = pipeline.fit(train, valid, seed);
      report.predictions = fitted.predict(eval);
      report.classifier_inputs = fitted.classifier_inputs;
      report.curves = detail::training_curves(fitted);
      if (options.keep_models) report.model = std::move(fitted);
    } catch (const Error& e) {
      throw Error(e.code(), detail::fold_context(repeat, fold) + e.what());
    }
    report.truths = eval.front().labels;
    std::vector<ClassLabel> predicted;
    for (const auto& p : report.predictions) predicted.push_back(p.label);
    report.metrics = per_class_accuracy(predicted, report.truths);
    report.confusion = confusion_matrix(predicted, report.truths);
    result.reports[u] = std::move(report);
  });

  std::vector<std::vector<MetricsRow>> rows(static_cast<std::size_t>(options.repeats));
  for (const auto& rep : result.reports) rows[static_cast<std::size_t>(rep.repeat)].push_back(rep.metrics);
  result.table = aggregate(rows);
  return result;
}

inline ExperimentResult run_experiment(const DatasetManifest& manifest, const PipelineSpec& spec,
                                       const ExperimentOptions& options) {
  validate(spec);
  return run_experiment(load_streams(manifest, spec.streams, options.jobs), spec, options);
}

struct LayerSweepEntry {
  int layer = 0;
  MetricsTable table;
};

/// One single-stream experiment per w2v2 layer 1..13, sharing the base spec's settings.
inline std::vector<LayerSweepEntry> layer_sweep(const StreamData& data, const PipelineSpec& base,
                                                const ExperimentOptions& options,
                                                std::vector<ExperimentResult>* details = nullptr) {
  std::vector<LayerSweepEntry> out;
  for (int layer = 1; layer <= kNumW2v2Layers; ++layer) {
    if (!data.has(w2v2_stream(layer))) fail(ErrorCode::MissingLayer, "w2v2 layer " + std::to_string(layer));
  }
  for (int layer = 1; layer <= kNumW2v2Layers; ++layer) {
    PipelineSpec spec = base;
    spec.streams = {w2v2_stream(layer)};
    spec.fusion = FusionMode::None;
    auto result = run_experiment(data, spec, options);
    out.push_back({layer, result.table});
    if (details) details->push_back(std::move(result));
  }
  return out;
}

inline std::vector<LayerSweepEntry> layer_sweep(const DatasetManifest& manifest, const PipelineSpec& base,
                                                const ExperimentOptions& options,
                                                std::vector<ExperimentResult>* details = nullptr) {
  const auto present = available_streams(manifest);
  std::vector<StreamId> layers;
  for (int layer = 1; layer <= kNumW2v2Layers; ++layer) {
    const StreamId id = w2v2_stream(layer);
    if (std::find(present.begin(), present.end(), id) == present.end())
      fail(ErrorCode::MissingLayer, "manifest has no w2v2 layer " + std::to_string(layer));
    layers.push_back(id);
  }
  return layer_sweep(load_streams(manifest, layers, options.jobs), base, options, details);
}

}  // namespace stutter
