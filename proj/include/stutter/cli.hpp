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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stutter/artifacts.hpp"
#include "stutter/error.hpp"
#include "stutter/experiment.hpp"
#include "stutter/fusion.hpp"
#include "stutter/manifest.hpp"
#include "stutter/report.hpp"
#include "stutter/synthetic.hpp"

namespace stutter {

namespace fs = std::filesystem;

/// Flags shared by `run` and `sweep`, before they become a PipelineSpec.
struct RunConfig {
  std::string subcommand;
  std::string manifest;
  std::vector<std::string> sources;
  int layer = 11;
  std::vector<int> layers;
  bool normalize = false;
  int lda = 0;
  double shrinkage = kDefaultLdaShrinkage;
  std::string classifier = "gnb";
  std::string fusion = "none";
  double alpha = kDefaultAlpha;
  int knn_k = kDefaultKnnK;
  double knn_p = kDefaultMinkowskiP;
  bool uniform_priors = false;
  std::string nn_stop = "sum";
  int nn_max_epochs = 200;
  std::uint64_t seed = 0;
  int repeats = 1;
  int jobs = 1;
  bool reshuffle_folds = false;
  bool save_models = false;
  std::string out;
};

inline PipelineSpec spec_from_config(const RunConfig& cfg) {
  PipelineSpec spec;
  spec.streams.clear();
  const std::vector<std::string> sources = cfg.sources.empty() ? std::vector<std::string>{"w2v2"} : cfg.sources;
  for (const auto& s : sources) {
    const Source src = parse_source(s);
    if (src == Source::Ecapa) {
      spec.streams.push_back(ecapa_stream());
    } else if (cfg.layers.empty()) {
      spec.streams.push_back(w2v2_stream(cfg.layer));
    } else {
      for (int l : cfg.layers) spec.streams.push_back(w2v2_stream(l));
    }
  }
  for (const auto& id : spec.streams)
    if (id.source == Source::W2v2 && (id.layer < 1 || id.layer > kNumW2v2Layers))
      fail(ErrorCode::InvalidSpec, "w2v2 layer must be in 1..13, got " + std::to_string(id.layer));
  spec.normalize = cfg.normalize;
  spec.lda_components = cfg.lda;
  spec.lda_shrinkage = cfg.shrinkage;
  spec.classifier = parse_family(cfg.classifier);
  spec.fusion = parse_fusion(cfg.fusion);
  spec.alpha = cfg.alpha;
  spec.knn_k = cfg.knn_k;
  spec.knn_p = cfg.knn_p;
  spec.gnb.uniform_priors = cfg.uniform_priors;
  if (cfg.nn_stop == "fluent") spec.nn.stop_on = nn::StopCriterion::FluentOnly;
  else if (cfg.nn_stop != "sum") fail(ErrorCode::InvalidSpec, "--nn-stop must be sum or fluent");
  spec.nn.max_epochs = cfg.nn_max_epochs;
  validate(spec);
  return spec;
}

namespace detail {

inline std::string joined_argv(int argc, const char* const* argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) s += (i ? " " : "") + std::string(argv[i]);
  return s;
}

inline ExperimentOptions options_from_config(const RunConfig& cfg) {
  ExperimentOptions o;
  o.seed = cfg.seed;
  o.repeats = cfg.repeats;
  o.jobs = cfg.jobs;
  o.reshuffle_folds = cfg.reshuffle_folds;
  o.keep_models = cfg.save_models;
  if (o.repeats < 1) fail(ErrorCode::InvalidArgument, "--repeats must be >= 1");
  if (o.jobs < 1) fail(ErrorCode::InvalidArgument, "--jobs must be >= 1");
  return o;
}

inline void add_pipeline_flags(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--manifest", cfg.manifest, "dataset manifest CSV")->required();
  cmd->add_option("--clf", cfg.classifier, "classifier family")->check(CLI::IsMember({"knn", "gnb", "nn"}));
  cmd->add_option("--lda", cfg.lda, "LDA components per stream (0 = none)")->check(CLI::Range(0, 4));
  cmd->add_option("--shrinkage", cfg.shrinkage, "LDA within-class scatter shrinkage")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--knn-k", cfg.knn_k, "KNN neighbours")->check(CLI::PositiveNumber);
  cmd->add_option("--knn-p", cfg.knn_p, "Minkowski order");
  cmd->add_flag("--uniform-priors", cfg.uniform_priors, "GNB uniform class priors");
  cmd->add_option("--nn-stop", cfg.nn_stop, "NN early stopping signal")->check(CLI::IsMember({"sum", "fluent"}));
  cmd->add_option("--nn-max-epochs", cfg.nn_max_epochs, "NN epoch cap")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", cfg.seed, "base seed");
  cmd->add_option("--repeats", cfg.repeats, "training repeats per fold")->check(CLI::PositiveNumber);
  cmd->add_flag("--reshuffle-folds", cfg.reshuffle_folds, "draw a fresh fold plan per repeat");
  cmd->add_option("--out", cfg.out, "output run directory")->required();
}

inline int exit_code_for(const Error& e) { return is_validation_error(e.code()) ? 1 : 2; }

}  // namespace detail

/// Entry point. Returns 0 on success, 1 on validation or usage errors, 2 on runtime failures.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"stutterkit: stuttering detection experiments on precomputed embeddings"};
  app.require_subcommand(1);
  int jobs = 1;
  app.add_option("--jobs,-j", jobs, "parallel fold workers")->check(CLI::PositiveNumber);

  std::string validate_path;
  auto* validate_cmd = app.add_subcommand("validate", "check a manifest and every referenced EMB1 file");
  validate_cmd->add_option("manifest", validate_path, "manifest CSV")->required();

  SyntheticOptions synth;
  std::string synth_out;
  bool synth_no_ecapa = false, synth_flat_ecapa = false;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
  synth_cmd->add_option("--podcasts", synth.num_podcasts, "number of podcasts")->check(CLI::Range(10, 100000));
  synth_cmd->add_option("--clips", synth.clips_per_podcast, "clips per podcast")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--sep", synth.class_sep, "distance between class means")->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--seed", synth.seed, "generator seed");
  synth_cmd->add_option("--layers", synth.layers, "w2v2 layers to emit")->delimiter(',')->check(CLI::Range(1, 13));
  synth_cmd->add_option("--signal-layers", synth.signal_layers, "layers carrying class signal")
      ->delimiter(',')
      ->check(CLI::Range(1, 13));
  synth_cmd->add_flag("--no-ecapa", synth_no_ecapa, "skip ECAPA files");
  synth_cmd->add_flag("--flat-ecapa", synth_flat_ecapa, "ECAPA files without class signal");
  synth_cmd->add_option("--min-frames", synth.min_frames, "minimum w2v2 frames")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--max-frames", synth.max_frames, "maximum w2v2 frames")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--out", synth_out, "output directory")->required();

  RunConfig run;
  auto* run_cmd = app.add_subcommand("run", "cross-validated experiment for one pipeline");
  detail::add_pipeline_flags(run_cmd, run);
  run_cmd->add_option("--source", run.sources, "ecapa and/or w2v2")->check(CLI::IsMember({"ecapa", "w2v2"}));
  run_cmd->add_option("--layer", run.layer, "w2v2 layer")->check(CLI::Range(1, 13));
  run_cmd->add_option("--layers", run.layers, "w2v2 layer list")->delimiter(',')->check(CLI::Range(1, 13));
  run_cmd->add_flag("--normalize", run.normalize, "magnitude-normalize ECAPA embeddings");
  run_cmd->add_option("--fuse", run.fusion, "fusion mode")->check(CLI::IsMember({"none", "score", "concat"}));
  run_cmd->add_option("--alpha", run.alpha, "score fusion weight on w2v2")->check(CLI::Range(0.0, 1.0));
  run_cmd->add_flag("--save-models", run.save_models, "write fitted models under models/");

  RunConfig sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "one experiment per w2v2 layer 1..13");
  detail::add_pipeline_flags(sweep_cmd, sweep);

  std::vector<std::string> report_dirs;
  auto* report_cmd = app.add_subcommand("report", "render report.txt and layersweep.svg for run directories");
  report_cmd->add_option("--run", report_dirs, "run or sweep directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return 1;
  }

  const std::string argv_line = detail::joined_argv(argc, argv);
  try {
    if (*validate_cmd) {
      try {
        const std::size_t rows = validate_manifest(validate_path);
        out << "OK: " << rows << " rows\n";
        return 0;
      } catch (const Error& e) {
        err << e.what() << '\n';
        return 1;
      }
    }
    if (*synth_cmd) {
      synth.emit_ecapa = !synth_no_ecapa;
      synth.ecapa_signal = !synth_flat_ecapa;
      const auto manifest = generate_synthetic(synth, synth_out);
      out << "wrote " << manifest.rows.size() << " manifest rows to " << (fs::path(synth_out) / "manifest.csv").string()
          << '\n';
      return 0;
    }
    if (*run_cmd) {
      run.subcommand = "run";
      run.jobs = jobs;
      const PipelineSpec spec = spec_from_config(run);
      const ExperimentOptions options = detail::options_from_config(run);
      const DatasetManifest manifest = load_manifest(run.manifest);
      const ExperimentResult result = run_experiment(manifest, spec, options);
      write_experiment(result, run.out,
                       {{"subcommand", "run"}, {"argv", argv_line}, {"manifest", run.manifest}}, run.save_models);
      out << spec.model_name() << ": TA " << format_metric(result.table.mean[kNumMetrics - 1]) << " (pooled "
          << format_metric(result.table.pooled[kNumMetrics - 1]) << ")\n";
      return 0;
    }
    if (*sweep_cmd) {
      sweep.subcommand = "sweep";
      sweep.jobs = jobs;
      const PipelineSpec spec = spec_from_config(sweep);
      const ExperimentOptions options = detail::options_from_config(sweep);
      const DatasetManifest manifest = load_manifest(sweep.manifest);
      std::vector<ExperimentResult> details;
      const auto series = layer_sweep(manifest, spec, options, &details);
      const fs::path dir(sweep.out);
      fs::create_directories(dir);
      write_layer_sweep(series, dir / "layersweep.csv");
      for (const auto& result : details) {
        char name[16];
        std::snprintf(name, sizeof(name), "layer_%02d", result.spec.streams.front().layer);
        write_experiment(result, dir / name, {{"subcommand", "sweep"}, {"argv", argv_line}, {"manifest", sweep.manifest}},
                         sweep.save_models);
      }
      {
        auto meta = detail::open_out(dir / "run_meta.txt");
        meta << "created_utc=" << utc_timestamp() << "\nsubcommand=sweep\nargv=" << argv_line
             << "\nmanifest=" << sweep.manifest << "\nlayers=1..13\nseed=" << options.seed
             << "\nrepeats=" << options.repeats << '\n'
             << spec.describe();
      }
      for (const auto& e : series)
        out << "L" << e.layer << ": TA " << format_metric(e.table.mean[kNumMetrics - 1]) << '\n';
      return 0;
    }
    if (*report_cmd) {
      for (const auto& d : report_dirs) {
        const fs::path dir(d);
        std::vector<fs::path> runs;
        if (fs::exists(dir / "metrics.csv")) runs.push_back(dir);
        for (int l = 1; l <= kNumW2v2Layers; ++l) {
          char name[16];
          std::snprintf(name, sizeof(name), "layer_%02d", l);
          if (fs::exists(dir / name / "metrics.csv")) runs.push_back(dir / name);
        }
        const bool has_sweep = fs::exists(dir / "layersweep.csv");
        if (runs.empty() && !has_sweep) fail(ErrorCode::IoFailure, "no metrics.csv or layersweep.csv under " + d);
        std::string text;
        if (!runs.empty()) text = render_table(runs);
        if (has_sweep) {
          auto svg = detail::open_out(dir / "layersweep.svg");
          svg << render_layer_sweep_svg(read_layer_sweep(dir / "layersweep.csv"));
          text += "layer sweep chart: " + (dir / "layersweep.svg").string() + "\n";
        }
        auto report = detail::open_out(dir / "report.txt");
        report << text;
        out << text;
      }
      return 0;
    }
  } catch (const Error& e) {
    err << e.what() << '\n';
    return detail::exit_code_for(e);
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace stutter
