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
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "stutter/error.hpp"
#include "stutter/features.hpp"
#include "stutter/gnb.hpp"
#include "stutter/knn.hpp"
#include "stutter/lda.hpp"
#include "stutter/nn/branch.hpp"
#include "stutter/prediction.hpp"
#include "stutter/rng.hpp"
#include "stutter/streams.hpp"

namespace stutter {

inline constexpr double kDefaultAlpha = 0.9;

/// p = alpha * p_w2v2 + (1 - alpha) * p_ecapa.
inline ProbaVector score_fuse(const ProbaVector& p_w2v2, const ProbaVector& p_ecapa, double alpha = kDefaultAlpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail(ErrorCode::InvalidAlpha, "alpha must be in [0,1]");
  for (const auto* p : {&p_w2v2, &p_ecapa}) {
    double total = 0.0;
    for (double v : *p) {
      if (!(v >= 0.0) || !std::isfinite(v)) fail(ErrorCode::NotAProbability, "negative or non-finite entry");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) fail(ErrorCode::NotAProbability, "entries sum to " + std::to_string(total));
  }
  ProbaVector out{};
  for (int c = 0; c < kNumClasses; ++c) out[c] = alpha * p_w2v2[c] + (1.0 - alpha) * p_ecapa[c];
  return out;
}

enum class ClassifierFamily { Knn, Gnb, Nn };
enum class FusionMode { None, Score, Concat };

inline std::string_view to_string(ClassifierFamily f) {
  switch (f) {
    case ClassifierFamily::Knn: return "knn";
    case ClassifierFamily::Gnb: return "gnb";
    case ClassifierFamily::Nn: return "nn";
  }
  return "?";
}

inline std::string_view to_string(FusionMode m) {
  switch (m) {
    case FusionMode::None: return "none";
    case FusionMode::Score: return "score";
    case FusionMode::Concat: return "concat";
  }
  return "?";
}

inline ClassifierFamily parse_family(std::string_view s) {
  if (s == "knn") return ClassifierFamily::Knn;
  if (s == "gnb" || s == "nbc") return ClassifierFamily::Gnb;
  if (s == "nn") return ClassifierFamily::Nn;
  fail(ErrorCode::InvalidSpec, "unknown classifier '" + std::string(s) + "'");
}

inline FusionMode parse_fusion(std::string_view s) {
  if (s == "none") return FusionMode::None;
  if (s == "score") return FusionMode::Score;
  if (s == "concat") return FusionMode::Concat;
  fail(ErrorCode::InvalidSpec, "unknown fusion mode '" + std::string(s) + "'");
}

/// Everything needed to reproduce one table row: streams, preprocessing, back-end, fusion.
struct PipelineSpec {
  std::vector<StreamId> streams = {w2v2_stream(11)};
  bool normalize = false;   // magnitude normalization, ECAPA streams only
  int lda_components = 0;   // 0 = no LDA; otherwise one LDA per stream
  double lda_shrinkage = kDefaultLdaShrinkage;
  ClassifierFamily classifier = ClassifierFamily::Gnb;
  FusionMode fusion = FusionMode::None;
  double alpha = kDefaultAlpha;
  int knn_k = kDefaultKnnK;
  double knn_p = kDefaultMinkowskiP;
  GnbOptions gnb;
  nn::TwoBranchConfig nn;  // seed is replaced per fold and repeat

  /// key=value lines, in a fixed order.
  std::string describe() const {
    std::ostringstream os;
    os << "streams=";
    for (std::size_t i = 0; i < streams.size(); ++i) os << (i ? "," : "") << to_string(streams[i]);
    os << "\nnormalize=" << (normalize ? 1 : 0) << "\nlda_components=" << lda_components
       << "\nlda_shrinkage=" << lda_shrinkage << "\nlda_placement=per_stream_before_fusion"
       << "\nclassifier=" << to_string(classifier) << "\nfusion=" << to_string(fusion) << "\nalpha=" << alpha
       << "\nknn_k=" << knn_k << "\nknn_p=" << knn_p << "\ngnb_var_floor_scale=" << gnb.var_floor_scale
       << "\ngnb_priors=" << (gnb.uniform_priors ? "uniform" : "empirical") << "\nnn_hidden=" << nn.hidden1 << ','
       << nn.hidden2 << "\nnn_dropout=" << nn.dropout << "\nnn_learning_rate=" << nn.learning_rate
       << "\nnn_batch_size=" << nn.batch_size << "\nnn_max_epochs=" << nn.max_epochs << "\nnn_patience=" << nn.patience
       << "\nnn_adam=" << nn.adam_beta1 << ',' << nn.adam_beta2 << ',' << nn.adam_eps << "\nnn_bn=" << nn.bn_eps << ','
       << nn.bn_momentum << "\nnn_stop_on="
       << (nn.stop_on == nn::StopCriterion::FluentOnly ? "fluent_only" : "sum_of_branches")
       << "\nnn_branches=separate\nnn_disfluent_outputs=4\nscore_fusion_pairing=same_family\n";
    return os.str();
  }

  /// Short row name in the style of the results table.
  std::string model_name() const {
    std::ostringstream os;
    const auto stream_label = [](const StreamId& s) {
      return s.source == Source::Ecapa ? std::string("ECAPA") : "W2V2-L" + std::to_string(s.layer);
    };
    if (fusion == FusionMode::Score) os << "Score fusion ";
    if (fusion == FusionMode::Concat) os << "Embedding fusion ";
    for (std::size_t i = 0; i < streams.size(); ++i) os << (i ? "+" : "") << stream_label(streams[i]);
    if (normalize) os << " (norm)";
    std::string family(to_string(classifier));
    std::transform(family.begin(), family.end(), family.begin(), ::toupper);
    os << " " << (classifier == ClassifierFamily::Gnb ? "NBC" : family);
    if (lda_components > 0) os << " + LDA" << lda_components;
    return os.str();
  }
};

inline void validate(const PipelineSpec& spec) {
  if (spec.streams.empty()) fail(ErrorCode::InvalidSpec, "no streams");
  std::set<StreamId> seen;
  int ecapa = 0, w2v2 = 0;
  for (const auto& s : spec.streams) {
    if (!seen.insert(s).second) fail(ErrorCode::InvalidSpec, "stream listed twice: " + to_string(s));
    if (s.source == Source::Ecapa) {
      ++ecapa;
      if (s.layer != 0) fail(ErrorCode::InvalidSpec, "ecapa stream must use layer 0");
    } else {
      ++w2v2;
      if (s.layer < 1 || s.layer > kNumW2v2Layers) fail(ErrorCode::InvalidSpec, "w2v2 layer must be in [1,13]");
    }
  }
  switch (spec.fusion) {
    case FusionMode::None:
      if (spec.streams.size() != 1) fail(ErrorCode::InvalidSpec, "fusion 'none' takes exactly one stream");
      break;
    case FusionMode::Score:
      if (ecapa != 1 || w2v2 != 1)
        fail(ErrorCode::InvalidSpec, "score fusion needs exactly one ecapa and one w2v2 stream");
      break;
    case FusionMode::Concat:
      if (spec.streams.size() < 2) fail(ErrorCode::InvalidSpec, "concat fusion needs at least two streams");
      break;
  }
  if (!(spec.alpha >= 0.0 && spec.alpha <= 1.0)) fail(ErrorCode::InvalidAlpha, "alpha must be in [0,1]");
  if (spec.lda_components < 0 || spec.lda_components > kMaxLdaComponents)
    fail(ErrorCode::InvalidSpec, "lda components must be 0 (off) or 1..4");
  if (spec.knn_k < 1) fail(ErrorCode::InvalidSpec, "knn k must be >= 1");
  if (!(spec.knn_p >= 1.0)) fail(ErrorCode::InvalidSpec, "Minkowski order must be >= 1");
}

/// Decision over a fused probability vector. Exact ties go to the dominant stream's own label
/// when it is among the tied classes, else to the lower code. For the two-branch family the
/// fluent gate compares p(fluent) with the summed disfluent mass (near-ties also defer).
inline ClassLabel fused_decision(const ProbaVector& p, ClassifierFamily family, ClassLabel dominant) {
  const auto argmax_in = [&](int lo, int hi) {
    double peak = p[lo];
    for (int c = lo + 1; c < hi; ++c) peak = std::max(peak, p[c]);
    const int dom = code(dominant);
    if (dom >= lo && dom < hi && p[dom] == peak) return dom;
    for (int c = lo; c < hi; ++c)
      if (p[c] == peak) return c;
    return lo;
  };
  if (family != ClassifierFamily::Nn) return label_from_code(argmax_in(0, kNumClasses));
  double disfluent_mass = 0.0;
  for (int c = 0; c < kNumDisfluent; ++c) disfluent_mass += p[c];
  const double margin = p[kFluentCode] - disfluent_mass;
  bool fluent = margin >= 0.0;
  if (std::abs(margin) <= 1e-12) fluent = is_fluent(dominant);
  return fluent ? ClassLabel::Fluent : label_from_code(argmax_in(0, kNumDisfluent));
}

using FittedClassifier = std::variant<KnnModel, GnbModel, nn::TwoBranchModel>;

/// Per-stream preprocessing fitted on the training rows.
struct StreamStage {
  StreamId id;
  bool normalize = false;
  std::optional<LdaModel> lda;

  FeatureMatrix apply(const FeatureMatrix& raw) const {
    FeatureMatrix out = normalize ? magnitude_normalize(raw) : raw;
    if (lda) out = lda_transform(*lda, out);
    return out;
  }
};

struct FittedPipeline {
  PipelineSpec spec;
  std::vector<StreamStage> stages;
  std::vector<FittedClassifier> classifiers;  // one, or one per stream for score fusion
  std::vector<Eigen::Index> classifier_inputs;

  /// Predictions for every row of the given per-stream matrices (same order as spec.streams).
  std::vector<Prediction> predict(const std::vector<FeatureMatrix>& streams) const {
    if (streams.size() != stages.size()) fail(ErrorCode::InvalidSpec, "stream count differs from fitted pipeline");
    std::vector<FeatureMatrix> prepared;
    for (std::size_t s = 0; s < stages.size(); ++s) prepared.push_back(stages[s].apply(streams[s]));
    if (spec.fusion != FusionMode::Score) {
      const FeatureMatrix input = spec.fusion == FusionMode::Concat ? concat_features(prepared) : prepared.front();
      return predict_with(classifiers.front(), input.values);
    }
    const std::size_t w = spec.streams[0].source == Source::W2v2 ? 0 : 1;
    const auto pw = predict_with(classifiers[w], prepared[w].values);
    const auto pe = predict_with(classifiers[1 - w], prepared[1 - w].values);
    std::vector<Prediction> out(pw.size());
    for (std::size_t i = 0; i < pw.size(); ++i) {
      out[i].proba = score_fuse(pw[i].proba, pe[i].proba, spec.alpha);
      const ClassLabel dominant = spec.alpha >= 0.5 ? pw[i].label : pe[i].label;
      out[i].label = fused_decision(out[i].proba, spec.classifier, dominant);
    }
    return out;
  }

  static std::vector<Prediction> predict_with(const FittedClassifier& model, const Eigen::MatrixXd& x) {
    return std::visit(
        [&](const auto& m) {
          using M = std::decay_t<decltype(m)>;
          std::vector<Prediction> out;
          if constexpr (std::is_same_v<M, nn::TwoBranchModel>) {
            out = nn::two_branch_predict(m, x);
          } else {
            out.reserve(static_cast<std::size_t>(x.rows()));
            for (Eigen::Index i = 0; i < x.rows(); ++i) {
              if constexpr (std::is_same_v<M, KnnModel>)
                out.push_back(knn_predict_proba(m, x.row(i).transpose()));
              else
                out.push_back(gnb_predict_proba(m, x.row(i).transpose()));
            }
          }
          return out;
        },
        model);
  }
};

/// A validated spec, ready to be fitted on each fold.
class Pipeline {
 public:
  explicit Pipeline(PipelineSpec spec) : spec_(std::move(spec)) { validate(spec_); }

  const PipelineSpec& spec() const { return spec_; }

  /// Fits preprocessing and back-end(s) on train; valid is used only for NN early stopping.
  FittedPipeline fit(const std::vector<FeatureMatrix>& train, const std::vector<FeatureMatrix>& valid,
                     std::uint64_t seed) const {
    if (train.size() != spec_.streams.size() || valid.size() != spec_.streams.size())
      fail(ErrorCode::InvalidSpec, "stream count differs from spec");
    FittedPipeline fitted;
    fitted.spec = spec_;
    std::vector<FeatureMatrix> train_ready, valid_ready;
    for (std::size_t s = 0; s < spec_.streams.size(); ++s) {
      StreamStage stage;
      stage.id = spec_.streams[s];
      stage.normalize = spec_.normalize && stage.id.source == Source::Ecapa;
      const FeatureMatrix base = stage.normalize ? magnitude_normalize(train[s]) : train[s];
      if (spec_.lda_components > 0) stage.lda = lda_fit(base, spec_.lda_components, spec_.lda_shrinkage);
      train_ready.push_back(stage.lda ? lda_transform(*stage.lda, base) : base);
      valid_ready.push_back(stage.apply(valid[s]));
      fitted.stages.push_back(std::move(stage));
    }
    if (spec_.fusion == FusionMode::Score) {
      for (std::size_t s = 0; s < train_ready.size(); ++s) {
        fitted.classifiers.push_back(fit_classifier(train_ready[s], valid_ready[s], classifier_seed(seed, {spec_.streams[s]})));
        fitted.classifier_inputs.push_back(train_ready[s].cols());
      }
    } else {
      const FeatureMatrix tr = spec_.fusion == FusionMode::Concat ? concat_features(train_ready) : train_ready.front();
      const FeatureMatrix va = spec_.fusion == FusionMode::Concat ? concat_features(valid_ready) : valid_ready.front();
      fitted.classifiers.push_back(fit_classifier(tr, va, classifier_seed(seed, spec_.streams)));
      fitted.classifier_inputs.push_back(tr.cols());
    }
    return fitted;
  }

 private:
  /// Depends only on the streams a classifier sees, so a stream trained inside a score-fusion
  /// run gets the same seed as the same stream trained alone.
  static std::uint64_t classifier_seed(std::uint64_t seed, const std::vector<StreamId>& streams) {
    std::uint64_t key = 0;
    for (const auto& s : streams) key = mix64(key ^ static_cast<std::uint64_t>(s.source == Source::Ecapa ? 0 : s.layer));
    return derive_seed(seed, {key, streams.size()});
  }

  FittedClassifier fit_classifier(const FeatureMatrix& train, const FeatureMatrix& valid, std::uint64_t seed) const {
    switch (spec_.classifier) {
      case ClassifierFamily::Knn:
        return knn_fit(train, spec_.knn_k, spec_.knn_p);
      case ClassifierFamily::Gnb:
        return gnb_fit(train, spec_.gnb);
      case ClassifierFamily::Nn: {
        nn::TwoBranchConfig cfg = spec_.nn;
        cfg.seed = seed;
        return nn::train_two_branch(train, valid, cfg);
      }
    }
    fail(ErrorCode::InvalidSpec, "unknown classifier");
  }

  PipelineSpec spec_;
};

inline Pipeline build_pipeline(PipelineSpec spec) { return Pipeline(std::move(spec)); }

}  // namespace stutter
