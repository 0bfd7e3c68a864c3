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

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "stutter/emb1.hpp"
#include "stutter/error.hpp"
#include "stutter/experiment.hpp"
#include "stutter/fusion.hpp"
#include "stutter/gnb.hpp"
#include "stutter/knn.hpp"
#include "stutter/lda.hpp"
#include "stutter/nn/branch.hpp"

namespace stutter {

namespace fs = std::filesystem;

inline std::string format_metric(double v) {
  if (std::isnan(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

namespace detail {

inline std::ofstream open_out(const fs::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot write " + path.string());
  return out;
}

inline std::string join_doubles(const std::vector<double>& v) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ";" : "") << v[i];
  return os.str();
}

inline std::vector<double> split_doubles(const std::string& s) {
  std::vector<double> out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ';'))
    if (!tok.empty()) out.push_back(std::stod(tok));
  return out;
}

inline void write_scalars(const fs::path& path, const std::vector<std::pair<std::string, std::string>>& kv) {
  auto out = open_out(path);
  out << "key,value\n";
  for (const auto& [k, v] : kv) out << k << ',' << v << '\n';
}

inline std::map<std::string, std::string> read_scalars(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot read " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma != std::string::npos) kv[line.substr(0, comma)] = line.substr(comma + 1);
  }
  return kv;
}

inline std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::string present_string(const std::array<bool, kNumClasses>& present) {
  std::string s;
  for (int c = 0; c < kNumClasses; ++c) s += std::string(c ? ";" : "") + (present[c] ? "1" : "0");
  return s;
}

inline std::array<bool, kNumClasses> parse_present(const std::string& s) {
  const auto v = split_doubles(s);
  if (v.size() != kNumClasses) fail(ErrorCode::InvalidArgument, "present flags");
  std::array<bool, kNumClasses> out{};
  for (int c = 0; c < kNumClasses; ++c) out[c] = v[c] != 0.0;
  return out;
}

}  // namespace detail

// ---- model serialization: EMB1 tensors plus a key,value CSV of scalars -------------------

inline void save_lda(const LdaModel& m, const fs::path& dir, const std::string& prefix) {
  fs::create_directories(dir);
  write_embedding(m.projection, dir / (prefix + "lda_projection.emb"));
  Eigen::MatrixXd means(1 + kNumClasses, m.global_mean.size());
  means.row(0) = m.global_mean.transpose();
  means.bottomRows(kNumClasses) = m.class_means;
  write_embedding(means, dir / (prefix + "lda_means.emb"));
  detail::write_scalars(dir / (prefix + "lda_scalars.csv"),
                        {{"input_dim", std::to_string(m.input_dim())},
                         {"components", std::to_string(m.components())},
                         {"shrinkage", detail::num(m.shrinkage)},
                         {"present", detail::present_string(m.present)},
                         {"eigenvalues", detail::join_doubles({m.eigenvalues.data(), m.eigenvalues.data() + m.eigenvalues.size()})}});
}

inline LdaModel load_lda(const fs::path& dir, const std::string& prefix) {
  LdaModel m;
  m.projection = read_embedding(dir / (prefix + "lda_projection.emb")).cast<double>();
  const Eigen::MatrixXd means = read_embedding(dir / (prefix + "lda_means.emb")).cast<double>();
  m.global_mean = means.row(0).transpose();
  m.class_means = means.bottomRows(kNumClasses);
  const auto kv = detail::read_scalars(dir / (prefix + "lda_scalars.csv"));
  m.shrinkage = std::stod(kv.at("shrinkage"));
  m.present = detail::parse_present(kv.at("present"));
  const auto ev = detail::split_doubles(kv.at("eigenvalues"));
  m.eigenvalues = Eigen::Map<const Eigen::VectorXd>(ev.data(), static_cast<Eigen::Index>(ev.size()));
  return m;
}

inline void save_gnb(const GnbModel& m, const fs::path& dir, const std::string& prefix) {
  fs::create_directories(dir);
  write_embedding(m.means, dir / (prefix + "gnb_means.emb"));
  write_embedding(m.variances, dir / (prefix + "gnb_variances.emb"));
  detail::write_scalars(dir / (prefix + "gnb_scalars.csv"),
                        {{"var_floor", detail::num(m.var_floor)},
                         {"priors", detail::join_doubles({m.priors.begin(), m.priors.end()})},
                         {"present", detail::present_string(m.present)}});
}

inline GnbModel load_gnb(const fs::path& dir, const std::string& prefix) {
  GnbModel m;
  m.means = read_embedding(dir / (prefix + "gnb_means.emb")).cast<double>();
  m.variances = read_embedding(dir / (prefix + "gnb_variances.emb")).cast<double>();
  const auto kv = detail::read_scalars(dir / (prefix + "gnb_scalars.csv"));
  m.var_floor = std::stod(kv.at("var_floor"));
  const auto priors = detail::split_doubles(kv.at("priors"));
  if (priors.size() != kNumClasses) fail(ErrorCode::InvalidArgument, "gnb priors");
  std::copy(priors.begin(), priors.end(), m.priors.begin());
  m.present = detail::parse_present(kv.at("present"));
  return m;
}

inline void save_knn(const KnnModel& m, const fs::path& dir, const std::string& prefix) {
  fs::create_directories(dir);
  write_embedding(m.store, dir / (prefix + "knn_store.emb"));
  std::vector<double> labels(m.store_labels.begin(), m.store_labels.end());
  detail::write_scalars(dir / (prefix + "knn_scalars.csv"),
                        {{"k", std::to_string(m.k)}, {"p", detail::num(m.p)}, {"labels", detail::join_doubles(labels)}});
}

inline KnnModel load_knn(const fs::path& dir, const std::string& prefix) {
  KnnModel m;
  m.store = read_embedding(dir / (prefix + "knn_store.emb")).cast<double>();
  const auto kv = detail::read_scalars(dir / (prefix + "knn_scalars.csv"));
  m.k = std::stoi(kv.at("k"));
  m.p = std::stod(kv.at("p"));
  for (double c : detail::split_doubles(kv.at("labels"))) m.store_labels.push_back(static_cast<int>(c));
  return m;
}

namespace detail {

/// Every tensor of a branch, named "<layer>.<tensor>".
inline std::vector<std::pair<std::string, Eigen::MatrixXd*>> branch_tensors(nn::Sequential<double>& net) {
  std::vector<std::pair<std::string, Eigen::MatrixXd*>> out;
  auto& layers = net.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string p = std::to_string(i) + ".";
    if (auto* l = std::get_if<nn::Linear<double>>(&layers[i])) {
      out.emplace_back(p + "weight", &l->weight);
      out.emplace_back(p + "bias", &l->bias);
    } else if (auto* b = std::get_if<nn::BatchNorm<double>>(&layers[i])) {
      out.emplace_back(p + "gamma", &b->gamma);
      out.emplace_back(p + "beta", &b->beta);
    }
  }
  return out;
}

inline std::vector<std::pair<std::string, nn::RowVec<double>*>> branch_running_stats(nn::Sequential<double>& net) {
  std::vector<std::pair<std::string, nn::RowVec<double>*>> out;
  auto& layers = net.layers();
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (auto* b = std::get_if<nn::BatchNorm<double>>(&layers[i])) {
      out.emplace_back(std::to_string(i) + ".running_mean", &b->running_mean);
      out.emplace_back(std::to_string(i) + ".running_var", &b->running_var);
    }
  return out;
}

}  // namespace detail

/// Checkpoint: one EMB1 file per tensor plus an index CSV (branch,tensor,file,rows,cols).
inline void save_two_branch(const nn::TwoBranchModel& model, const fs::path& dir, const std::string& prefix) {
  fs::create_directories(dir);
  nn::TwoBranchModel copy = model;
  auto index = detail::open_out(dir / (prefix + "nn_index.csv"));
  index << "branch,tensor,file,rows,cols\n";
  const auto dump = [&](const std::string& branch, nn::Sequential<double>& net) {
    for (auto& [name, t] : detail::branch_tensors(net)) {
      const std::string file = prefix + "nn_" + branch + "_" + name + ".emb";
      write_embedding(*t, dir / file);
      index << branch << ',' << name << ',' << file << ',' << t->rows() << ',' << t->cols() << '\n';
    }
    for (auto& [name, t] : detail::branch_running_stats(net)) {
      const std::string file = prefix + "nn_" + branch + "_" + name + ".emb";
      write_embedding(Eigen::MatrixXd(*t), dir / file);
      index << branch << ',' << name << ',' << file << ",1," << t->cols() << '\n';
    }
  };
  dump("fluent", copy.fluent_net);
  dump("disfluent", copy.disfluent_net);
  const auto& c = model.config;
  detail::write_scalars(dir / (prefix + "nn_scalars.csv"),
                        {{"input_dim", std::to_string(model.input_dim)},
                         {"hidden1", std::to_string(c.hidden1)},
                         {"hidden2", std::to_string(c.hidden2)},
                         {"dropout", detail::num(c.dropout)},
                         {"bn_eps", detail::num(c.bn_eps)},
                         {"bn_momentum", detail::num(c.bn_momentum)},
                         {"best_epoch", std::to_string(model.best_epoch)},
                         {"epochs_run", std::to_string(model.epochs_run)}});
}

inline nn::TwoBranchModel load_two_branch(const fs::path& dir, const std::string& prefix) {
  const auto kv = detail::read_scalars(dir / (prefix + "nn_scalars.csv"));
  nn::TwoBranchModel model;
  model.input_dim = std::stol(kv.at("input_dim"));
  model.config.hidden1 = std::stol(kv.at("hidden1"));
  model.config.hidden2 = std::stol(kv.at("hidden2"));
  model.config.dropout = std::stod(kv.at("dropout"));
  model.config.bn_eps = std::stod(kv.at("bn_eps"));
  model.config.bn_momentum = std::stod(kv.at("bn_momentum"));
  model.best_epoch = std::stoi(kv.at("best_epoch"));
  model.epochs_run = std::stoi(kv.at("epochs_run"));
  Rng rng(0);
  nn::BranchShape shape{model.input_dim, model.config.hidden1, model.config.hidden2, 2,
                        model.config.dropout, model.config.bn_eps, model.config.bn_momentum};
  model.fluent_net = nn::make_branch<double>(shape, rng);
  shape.outputs = kNumDisfluent;
  model.disfluent_net = nn::make_branch<double>(shape, rng);
  const auto fill = [&](const std::string& branch, nn::Sequential<double>& net) {
    for (auto& [name, t] : detail::branch_tensors(net)) {
      const Eigen::MatrixXd v = read_embedding(dir / (prefix + "nn_" + branch + "_" + name + ".emb")).cast<double>();
      if (v.rows() != t->rows() || v.cols() != t->cols()) fail(ErrorCode::DimensionMismatch, "checkpoint tensor " + name);
      *t = v;
    }
    for (auto& [name, t] : detail::branch_running_stats(net)) {
      const Eigen::MatrixXd v = read_embedding(dir / (prefix + "nn_" + branch + "_" + name + ".emb")).cast<double>();
      if (v.cols() != t->cols()) fail(ErrorCode::DimensionMismatch, "checkpoint tensor " + name);
      *t = v.row(0);
    }
  };
  fill("fluent", model.fluent_net);
  fill("disfluent", model.disfluent_net);
  return model;
}

inline void save_pipeline(const FittedPipeline& fitted, const fs::path& dir, const std::string& prefix) {
  for (const auto& stage : fitted.stages)
    if (stage.lda) save_lda(*stage.lda, dir, prefix + to_string(stage.id) + "_");
  for (std::size_t i = 0; i < fitted.classifiers.size(); ++i) {
    const std::string p = prefix + "clf" + std::to_string(i) + "_";
    std::visit(
        [&](const auto& m) {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, KnnModel>) save_knn(m, dir, p);
          else if constexpr (std::is_same_v<M, GnbModel>) save_gnb(m, dir, p);
          else save_two_branch(m, dir, p);
        },
        fitted.classifiers[i]);
  }
}

// ---- run directory ------------------------------------------------------------------------

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline constexpr std::string_view kRunReadme = R"(Run directory layout
====================

metrics.csv                 aggregate table. Columns stat,R,P,B,I,F,TA (percent).
                            Rows: mean (mean over folds, then over repeats), std (population
                            std over all fold x repeat values), pooled (from summed counts).
                            Per-class values are class-wise recall; NA = class never evaluated.
folds/fold_<i>_repeat_<j>.csv
                            one row per fold: R,P,B,I,F,TA,n_train,n_valid,n_eval,correct
confusion_<i>.csv           fold i confusion counts summed over repeats; rows = truth,
                            columns = prediction, class order R,P,B,I,F
curves/fold_<i>_repeat_<j>_clf<k>.csv
                            NN training curves: epoch and per-branch train/valid loss
run_meta.txt                key=value record of the command, spec, seeds and every default
models/                     (with --save-models) fitted state per fold and repeat, prefixed
                            fold<i>_repeat<j>_:
  <stream>_lda_projection.emb   K x m projection (EMB1, float32)
  <stream>_lda_means.emb        row 0 = global mean, rows 1..5 = class means R..F
  <stream>_lda_scalars.csv      key,value: input_dim, components, shrinkage, present, eigenvalues
  clf<k>_gnb_means.emb / clf<k>_gnb_variances.emb   5 x K, class order R..F
  clf<k>_gnb_scalars.csv        var_floor, priors, present
  clf<k>_knn_store.emb + clf<k>_knn_scalars.csv     training rows, k, p, labels
  clf<k>_nn_index.csv           branch,tensor,file,rows,cols for every NN tensor
  clf<k>_nn_scalars.csv         network shape, best epoch, epochs run
)";

/// Writes metrics.csv, per-fold CSVs, confusion matrices, curves, run_meta.txt and README.txt.
inline void write_experiment(const ExperimentResult& result, const fs::path& dir,
                             const std::vector<std::pair<std::string, std::string>>& extra_meta = {},
                             bool save_models = false) {
  fs::create_directories(dir);
  {
    auto out = detail::open_out(dir / "metrics.csv");
    out << "stat";
    for (auto n : kMetricNames) out << ',' << n;
    out << '\n';
    const std::pair<const char*, const MetricValues*> rows[] = {
        {"mean", &result.table.mean}, {"std", &result.table.stddev}, {"pooled", &result.table.pooled}};
    for (const auto& [name, values] : rows) {
      out << name;
      for (double v : *values) out << ',' << format_metric(v);
      out << '\n';
    }
  }
  std::map<int, Confusion> confusion;
  for (const auto& rep : result.reports) {
    auto out = detail::open_out(dir / "folds" /
                                ("fold_" + std::to_string(rep.fold) + "_repeat_" + std::to_string(rep.repeat) + ".csv"));
    out << "R,P,B,I,F,TA,n_train,n_valid,n_eval,correct\n";
    for (double v : rep.metrics.values) out << format_metric(v) << ',';
    out << rep.n_train << ',' << rep.n_valid << ',' << rep.n_eval << ',' << rep.metrics.correct << '\n';
    auto& cm = confusion[rep.fold];
    for (int t = 0; t < kNumClasses; ++t)
      for (int p = 0; p < kNumClasses; ++p) cm[t][p] += rep.confusion[t][p];
    for (std::size_t k = 0; k < rep.curves.size(); ++k) {
      auto curve = detail::open_out(dir / "curves" /
                                    ("fold_" + std::to_string(rep.fold) + "_repeat_" + std::to_string(rep.repeat) +
                                     "_clf" + std::to_string(k) + ".csv"));
      curve << "epoch,fluent_train_loss,disfluent_train_loss,fluent_valid_loss,disfluent_valid_loss\n";
      for (const auto& e : rep.curves[k])
        curve << e.epoch << ',' << detail::num(e.fluent_train) << ',' << detail::num(e.disfluent_train) << ','
              << detail::num(e.fluent_valid) << ',' << detail::num(e.disfluent_valid) << '\n';
    }
    if (save_models && rep.model)
      save_pipeline(*rep.model, dir / "models",
                    "fold" + std::to_string(rep.fold) + "_repeat" + std::to_string(rep.repeat) + "_");
  }
  for (const auto& [fold, cm] : confusion) {
    auto out = detail::open_out(dir / ("confusion_" + std::to_string(fold) + ".csv"));
    out << "truth\\pred,R,P,B,I,F\n";
    for (int t = 0; t < kNumClasses; ++t) {
      out << kLabelShort[t];
      for (int p = 0; p < kNumClasses; ++p) out << ',' << cm[t][p];
      out << '\n';
    }
  }
  {
    auto out = detail::open_out(dir / "run_meta.txt");
    out << "created_utc=" << utc_timestamp() << '\n';
    for (const auto& [k, v] : extra_meta) out << k << '=' << v << '\n';
    out << "model_name=" << result.spec.model_name() << '\n';
    out << result.spec.describe();
    const auto& o = result.options;
    out << "seed=" << o.seed << "\nrepeats=" << o.repeats << "\njobs=" << o.jobs
        << "\nreshuffle_folds=" << (o.reshuffle_folds ? 1 : 0) << "\nfolds=" << kNumFolds
        << "\nfold_scheme=rotation(eval=block_i,valid=block_i+1,train=rest)"
        << "\npooling=mean+population_std\necapa_pooling=bypass_when_T=1"
        << "\nper_class_metric=class_recall\naggregate=mean_over_folds_then_repeats"
        << "\nknn_gnb_fit_rows=train_only\nnn_early_stopping_rows=valid\n";
    if (!result.reports.empty()) {
      out << "classifier_input_dims=";
      const auto& dims = result.reports.front().classifier_inputs;
      for (std::size_t i = 0; i < dims.size(); ++i) out << (i ? "," : "") << dims[i];
      out << '\n';
    }
  }
  auto readme = detail::open_out(dir / "README.txt");
  readme << kRunReadme;
}

inline void write_layer_sweep(const std::vector<LayerSweepEntry>& sweep, const fs::path& path) {
  auto out = detail::open_out(path);
  out << "layer";
  for (auto n : kMetricNames) out << ',' << n;
  out << '\n';
  for (const auto& e : sweep) {
    out << e.layer;
    for (double v : e.table.mean) out << ',' << format_metric(v);
    out << '\n';
  }
}

}  // namespace stutter
