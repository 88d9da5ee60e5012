// Copyright 2026 The pssl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pssl/experiments/cli.h"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "pssl/dinn/train.h"
#include "pssl/experiments/histogram.h"
#include "pssl/experiments/studies.h"
#include "pssl/scene/dataset.h"
#include "pssl/scene/independence.h"
#include "pssl/signal/wav.h"
#include "pssl/tdoa/tdoa.h"

namespace pssl {
namespace {

namespace fs = std::filesystem;

// A manifest path may be a dataset directory or a single .jsonl file.
DatasetManifest Manifest(const std::string& path, const std::string& split = "") {
  DatasetManifest m = ReadManifest(path);
  return split.empty() ? m : m.Filter(ParseSplit(split));
}

std::vector<double> ParseDoubles(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

std::vector<std::string> ParseList(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void LogSummary(const char* tag, const EvalReport& r) {
  std::fprintf(stderr, "[%s] samples=%zu metric=%s mean=%.6f median=%.6f std=%.6f\n", tag,
               r.errors.size(), MetricName(r.metric), r.mean, r.median, r.stddev);
}

// Reads `--config` items for [global] and the active subcommand and turns
// them into trailing "--key=value" arguments.
std::vector<std::string> ConfigArgs(const std::string& path, const std::string& subcommand) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path);
  std::vector<std::string> out;
  for (const CLI::ConfigItem& item : CLI::ConfigTOML().from_config(in)) {
    if (item.name.empty() || item.name == "++" || item.name == "--") continue;
    const bool global = item.parents.empty() || (item.parents.size() == 1 && item.parents[0] == "global");
    const bool mine = item.parents.size() == 1 && item.parents[0] == subcommand;
    if (!global && !mine) continue;
    std::string value;
    for (size_t i = 0; i < item.inputs.size(); ++i) value += (i ? "," : "") + item.inputs[i];
    out.push_back("--" + item.name + "=" + value);
  }
  return out;
}

struct Options {
  uint64_t seed = 0;
  bool seed_set = false;
  std::string config;

  // generate
  std::string profile = "toy-anechoic";
  std::string out;
  std::string wav_folder;
  long long n_train = -1, n_val = -1, n_test = -1;
  // shared data inputs
  std::string manifest, split, data, train_manifest, val_manifest, ckpt, cache;
  // localize-ls / heatmap
  double resolution = 0.02;
  bool no_interpolate = false;
  std::string id;
  // train
  std::string arch = "dinn", scale = "toy", mask = "full", resume;
  long long epochs = -1, batch_size = -1;
  double lr = -1.0;
  bool bn_after_relu = false;
  bool raw_input = false;
  // eval
  std::string metric = "euclidean", expect_mask;
  // compare
  std::string methods = "ls,crnn,dinn,dinn-embedding";
  size_t repeats = 4;
  // sensitivity
  std::string mic_std = "0.01,0.1,0.5", rt60_std = "0.2";
  size_t seeds = 1;
  // histogram
  std::string errors_csv;
  double bin_width = 0.15, range = 0.0;
  double distance_bin = 0.05;
};

TrainConfig MakeTrainConfig(const Options& o, Scale scale) {
  TrainConfig tc = TrainConfig::Defaults(scale);
  if (o.epochs >= 0) tc.epochs = static_cast<size_t>(o.epochs);
  if (o.batch_size >= 0) tc.batch_size = static_cast<size_t>(o.batch_size);
  if (o.lr >= 0.0) tc.lr = o.lr;
  tc.seed = o.seed;
  return tc;
}

int CmdGenerate(const Options& o) {
  DatasetProfile p = ProfileByName(o.profile);
  if (o.seed_set) p.seed = o.seed;
  if (!o.wav_folder.empty()) {
    p.source = SourceKind::kWavFolder;
    p.wav_folder = o.wav_folder;
  }
  if (o.n_train >= 0) p.counts.train = static_cast<size_t>(o.n_train);
  if (o.n_val >= 0) p.counts.val = static_cast<size_t>(o.n_val);
  if (o.n_test >= 0) p.counts.test = static_cast<size_t>(o.n_test);
  std::fprintf(stderr, "[generate] profile=%s seed=%llu train=%zu val=%zu test=%zu out=%s\n",
               p.name.c_str(), static_cast<unsigned long long>(p.seed), p.counts.train,
               p.counts.val, p.counts.test, o.out.c_str());
  const DatasetManifest m = GenerateDataset(p, o.out);
  std::fprintf(stderr, "[generate] wrote %zu records\n", m.records.size());
  return kExitOk;
}

int CmdLocalizeLs(const Options& o) {
  LsOptions ls;
  ls.resolution = o.resolution;
  ls.interpolate = !o.no_interpolate;
  const EvalReport r = EvaluateLs(Manifest(o.manifest, o.split), ls, ParseMetric(o.metric));
  WriteEvalCsv(r, o.out);
  LogSummary("localize-ls", r);
  return kExitOk;
}

int CmdHeatmap(const Options& o) {
  const DatasetManifest m = Manifest(o.manifest);
  for (const auto& r : m.records) {
    if (r.id != o.id) continue;
    LsOptions ls;
    ls.resolution = o.resolution;
    ls.interpolate = !o.no_interpolate;
    const LsResult res = LocalizeLs(ReadWav(m.AudioPath(r)), r.scene, ls);
    ExportHeatmap(res.grid, o.out);
    std::fprintf(stderr, "[heatmap] id=%s estimate=(%.4f, %.4f) truth=(%.4f, %.4f)\n",
                 r.id.c_str(), res.estimate.position.x, res.estimate.position.y,
                 r.scene.source.x, r.scene.source.y);
    return kExitOk;
  }
  throw std::invalid_argument("no record '" + o.id + "' in " + o.manifest);
}

int CmdTrain(const Options& o) {
  const FeatureSet train = LoadFeatures(Manifest(o.train_manifest, o.split.empty() ? "" : "train"));
  const FeatureSet val = LoadFeatures(Manifest(o.val_manifest, o.split.empty() ? "" : "val"));
  TrainOptions opts;
  opts.log = &std::cerr;
  Checkpoint ckpt;
  if (!o.resume.empty()) {
    ckpt = ResumeTraining(LoadCheckpoint(o.resume), train, val, opts,
                          o.epochs > 0 ? static_cast<size_t>(o.epochs) : 0);
  } else {
    const Scale scale = ParseScale(o.scale);
    const size_t mics = train.scenes.empty() ? 4 : train.scenes[0].mics.size();
    ArchitectureConfig arch =
        ArchitectureConfig::Make(ParseVariant(o.arch), scale, mics, MetadataMask::Parse(o.mask));
    arch.num_frames = train.frames;
    arch.num_bins = train.bins;
    arch.batch_norm_after_relu = o.bn_after_relu;
    arch.normalize_input = !o.raw_input;
    ckpt = Train(arch, MakeTrainConfig(o, scale), train, val, opts);
  }
  SaveCheckpoint(ckpt, o.out);
  const auto h = TrainingHistory(ckpt);
  std::fprintf(stderr, "[train] wrote %s after %zu epochs\n", o.out.c_str(), h.size());
  return kExitOk;
}

int CmdEval(const Options& o) {
  const Checkpoint ckpt = LoadCheckpoint(o.ckpt);
  const FeatureSet set = LoadFeatures(Manifest(o.manifest, o.split));
  MetadataMask expected;
  if (!o.expect_mask.empty()) expected = MetadataMask::Parse(o.expect_mask);
  const EvalReport r = EvaluateCheckpoint(ckpt, set, ParseMetric(o.metric),
                                          o.expect_mask.empty() ? nullptr : &expected);
  WriteEvalCsv(r, o.out);
  LogSummary("eval", r);
  return kExitOk;
}

int CmdCompare(const Options& o) {
  const DatasetFeatures data = LoadDatasetFeatures(ReadManifest(o.data));
  ComparisonConfig cfg;
  cfg.methods = ParseList(o.methods);
  cfg.repeats = o.repeats;
  cfg.seed = o.seed;
  cfg.scale = ParseScale(o.scale);
  cfg.train = MakeTrainConfig(o, cfg.scale);
  cfg.ls.resolution = o.resolution;
  cfg.ls.interpolate = !o.no_interpolate;
  cfg.cache_dir = o.cache.empty() ? fs::path(o.out) / "checkpoints" : fs::path(o.cache);
  cfg.log = &std::cerr;
  const ComparisonReport r = RunComparison(data, cfg);
  WriteComparison(r, data, o.out, o.bin_width);
  for (const auto& s : r.summaries) {
    std::fprintf(stderr, "[compare] method=%s runs=%zu mean=%.6f std=%.6f\n", s.method.c_str(),
                 s.run_means.size(), s.mean, s.stddev);
  }
  return kExitOk;
}

int CmdSensitivity(const Options& o) {
  Model<float> model = LoadModel(LoadCheckpoint(o.ckpt));
  const FeatureSet test = LoadFeatures(Manifest(o.manifest, o.split));
  std::vector<PerturbationSpec> specs;
  for (size_t k = 0; k < o.seeds; ++k) {
    for (double s : ParseDoubles(o.mic_std)) {
      specs.push_back({PerturbTarget::kMicCoords, s, o.seed + k});
    }
    for (double s : ParseDoubles(o.rt60_std)) specs.push_back({PerturbTarget::kRt60, s, o.seed + k});
  }
  const SensitivityReport r = RunSensitivity(model, test, specs);
  WriteSensitivityCsv(r, o.out);
  std::fprintf(stderr, "[sensitivity] baseline=%.6f\n", r.baseline_error);
  for (const auto& row : r.rows) {
    std::fprintf(stderr, "[sensitivity] target=%s std=%g seed=%llu mean=%.6f increase_pct=%.3f\n",
                 PerturbTargetName(row.spec.target), row.spec.stddev,
                 static_cast<unsigned long long>(row.spec.seed), row.mean_error, row.increase_pct);
  }
  return kExitOk;
}

int CmdRelevance(const Options& o) {
  const DatasetFeatures data = LoadDatasetFeatures(ReadManifest(o.data));
  const Scale scale = ParseScale(o.scale);
  ArchitectureConfig base = ArchitectureConfig::Make(
      Variant::kDinn, scale, data.train.scenes.empty() ? 4 : data.train.scenes[0].mics.size());
  base.num_frames = data.train.frames;
  base.num_bins = data.train.bins;
  const fs::path cache = o.cache.empty() ? fs::path(o.out).parent_path() / "checkpoints"
                                         : fs::path(o.cache);
  const auto rows = RunRelevance(data, base, MakeTrainConfig(o, scale), cache, &std::cerr);
  WriteRelevanceCsv(rows, o.out);
  bool failed = false;
  for (const auto& r : rows) {
    std::fprintf(stderr, "[relevance] mask=%s mean=%.6f performance_pct=%.2f%s%s\n",
                 r.mask.ToString().c_str(), r.mean_error, r.performance_pct,
                 r.error.empty() ? "" : " error=", r.error.c_str());
    failed |= !r.error.empty();
  }
  return failed ? kExitFailure : kExitOk;
}

int CmdValidateIndependence(const Options& o) {
  DatasetManifest train, test;
  if (!o.data.empty()) {
    const DatasetManifest all = ReadManifest(o.data);
    train = all.Filter(Split::kTrain);
    test = all.Filter(Split::kTest);
  } else {
    train = ReadManifest(o.train_manifest);
    test = ReadManifest(o.manifest);
  }
  const IndependenceReport r = ComputeIndependence(test, train, o.distance_bin);
  WriteIndependenceReport(r, o.out);
  std::fprintf(stderr, "[independence] test=%zu train=%zu mean=%.6f duplicates=%zu\n",
               test.records.size(), train.records.size(), r.mean(), r.duplicates.size());
  for (const auto& id : r.duplicates) std::fprintf(stderr, "[independence] duplicate=%s\n", id.c_str());
  return r.independent() ? kExitOk : kExitFailure;
}

int CmdIngest(const Options& o) {
  const DatasetManifest m = IngestRecorded(o.data);
  WriteManifest(m, o.out);
  std::fprintf(stderr, "[ingest] wrote %zu records to %s\n", m.records.size(), o.out.c_str());
  return kExitOk;
}

int CmdHistogram(const Options& o) {
  std::ifstream in(o.errors_csv);
  if (!in) throw std::runtime_error("cannot read " + o.errors_csv);
  std::string line;
  std::getline(in, line);
  std::vector<double> errors;
  while (std::getline(in, line)) {
    const size_t comma = line.rfind(',');
    if (comma != std::string::npos) errors.push_back(std::stod(line.substr(comma + 1)));
  }
  const ErrorHistogram h = ComputeHistogram(errors, o.bin_width, o.range);
  WriteHistogramCsv(h, o.out + ".csv");
  const HistogramSeries s{fs::path(o.errors_csv).stem().string(), h};
  WriteHistogramSvg(std::span<const HistogramSeries>(&s, 1), o.out + ".svg");
  std::fprintf(stderr, "[histogram] samples=%zu bins=%zu\n", h.total, h.num_bins());
  return kExitOk;
}

}  // namespace

int RunCli(const std::vector<std::string>& args) {
  Options o;
  CLI::App app{"Positional sound source localization workbench"};
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.add_option("--seed", o.seed, "Master seed");
  app.add_option("--config", o.config, "TOML file; values override flags");

  auto* gen = app.add_subcommand("generate", "Render a synthetic dataset");
  gen->add_option("--profile", o.profile,
                  "toy-anechoic, toy-reverberant, anechoic or reverberant");
  gen->add_option("--out", o.out, "Output directory")->required();
  gen->add_option("--wav-folder", o.wav_folder, "Use speech excerpts from this folder");
  gen->add_option("--train", o.n_train, "Override the train count");
  gen->add_option("--val", o.n_val, "Override the validation count");
  gen->add_option("--test", o.n_test, "Override the test count");

  auto* ls = app.add_subcommand("localize-ls", "GCC-PHAT + least-squares grid search");
  ls->add_option("--manifest", o.manifest, "Dataset directory or .jsonl")->required();
  ls->add_option("--split", o.split, "Restrict to train, val or test");
  ls->add_option("--out", o.out, "Per-sample CSV")->required();
  ls->add_option("--resolution", o.resolution, "Grid spacing (m)");
  ls->add_flag("--no-interpolate", o.no_interpolate, "Integer-lag TDOAs");
  ls->add_option("--metric", o.metric, "euclidean or l1");

  auto* hm = app.add_subcommand("heatmap", "Export the LS error grid of one sample");
  hm->add_option("--manifest", o.manifest, "Dataset directory or .jsonl")->required();
  hm->add_option("--id", o.id, "Sample id")->required();
  hm->add_option("--out", o.out, "Output stem (.csv and .svg)")->required();
  hm->add_option("--resolution", o.resolution, "Grid spacing (m)");
  hm->add_flag("--no-interpolate", o.no_interpolate, "Integer-lag TDOAs");

  auto* tr = app.add_subcommand("train", "Train a DI-NN, DI-NN-Embedding or CRNN");
  tr->add_option("--arch", o.arch, "dinn, dinn-embedding or crnn");
  tr->add_option("--scale", o.scale, "toy or full");
  tr->add_option("--train", o.train_manifest, "Training manifest")->required();
  tr->add_option("--val", o.val_manifest, "Validation manifest")->required();
  tr->add_option("--out", o.out, "Checkpoint path")->required();
  tr->add_option("--mask", o.mask, "Metadata fields, e.g. mic+room or full");
  tr->add_option("--epochs", o.epochs, "Override the epoch count");
  tr->add_option("--batch-size", o.batch_size, "Override the batch size");
  tr->add_option("--lr", o.lr, "Override the learning rate");
  tr->add_option("--resume", o.resume, "Continue from a checkpoint");
  tr->add_flag("--bn-after-relu", o.bn_after_relu, "Batch norm after the activation");
  tr->add_flag("--raw-input", o.raw_input, "Skip per-sample input level normalization");
  tr->add_option("--split", o.split, "Filter --train/--val by split (for dataset directories)");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->add_option("--ckpt", o.ckpt, "Checkpoint")->required();
  ev->add_option("--manifest", o.manifest, "Dataset directory or .jsonl")->required();
  ev->add_option("--split", o.split, "Restrict to train, val or test");
  ev->add_option("--metric", o.metric, "euclidean or l1");
  ev->add_option("--mask", o.expect_mask, "Fail unless the checkpoint used this metadata");
  ev->add_option("--out", o.out, "Per-sample CSV")->required();

  auto* cmp = app.add_subcommand("compare", "LS vs neural methods over repeated runs");
  cmp->add_option("--data", o.data, "Dataset directory")->required();
  cmp->add_option("--out", o.out, "Report directory")->required();
  cmp->add_option("--methods", o.methods, "Comma-separated subset of ls,crnn,dinn,dinn-embedding");
  cmp->add_option("--repeats", o.repeats, "Runs per neural method");
  cmp->add_option("--scale", o.scale, "toy or full");
  cmp->add_option("--epochs", o.epochs, "Override the epoch count");
  cmp->add_option("--cache", o.cache, "Checkpoint cache directory");
  cmp->add_option("--resolution", o.resolution, "LS grid spacing (m)");
  cmp->add_flag("--no-interpolate", o.no_interpolate, "Integer-lag TDOAs for LS");
  cmp->add_option("--bin-width", o.bin_width, "Histogram bin width (m)");

  auto* sen = app.add_subcommand("sensitivity", "Test-time metadata perturbation");
  sen->add_option("--ckpt", o.ckpt, "Checkpoint trained on clean metadata")->required();
  sen->add_option("--manifest", o.manifest, "Test manifest")->required();
  sen->add_option("--split", o.split, "Restrict to train, val or test");
  sen->add_option("--out", o.out, "CSV")->required();
  sen->add_option("--mic-std", o.mic_std, "Microphone coordinate noise levels (m)");
  sen->add_option("--rt60-std", o.rt60_std, "RT60 noise levels (s)");
  sen->add_option("--seeds", o.seeds, "Noise draws per level");

  auto* rel = app.add_subcommand("relevance", "One training per metadata subset");
  rel->add_option("--data", o.data, "Dataset directory")->required();
  rel->add_option("--out", o.out, "CSV")->required();
  rel->add_option("--scale", o.scale, "toy or full");
  rel->add_option("--epochs", o.epochs, "Override the epoch count");
  rel->add_option("--cache", o.cache, "Checkpoint cache directory");

  auto* ind = app.add_subcommand("validate-independence", "Train/test configuration distances");
  ind->add_option("--data", o.data, "Dataset directory");
  ind->add_option("--train", o.train_manifest, "Training manifest");
  ind->add_option("--manifest", o.manifest, "Test manifest");
  ind->add_option("--out", o.out, "Histogram CSV path")->required();
  ind->add_option("--bin-width", o.distance_bin, "Histogram bin width (m)");

  auto* ing = app.add_subcommand("ingest", "Manifest for recorded audio");
  ing->add_option("--dir", o.data, "Folder with geometry.jsonl and <id>.wav")->required();
  ing->add_option("--out", o.out, "Manifest path")->required();

  auto* his = app.add_subcommand("histogram", "Histogram and CDF of an error CSV");
  his->add_option("--errors", o.errors_csv, "CSV whose last column is the error")->required();
  his->add_option("--out", o.out, "Output stem")->required();
  his->add_option("--bin-width", o.bin_width, "Bin width (m)");
  his->add_option("--range", o.range, "Cover at least [0, range]");

  std::vector<std::string> argv = args;
  try {
    // The subcommand and config path are needed before the final parse.
    std::string sub, config;
    for (size_t i = 1; i < args.size(); ++i) {
      if (sub.empty() && app.get_subcommand_no_throw(args[i]) != nullptr) sub = args[i];
      if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
      if (args[i].rfind("--config=", 0) == 0) config = args[i].substr(9);
    }
    if (!config.empty() && !sub.empty()) {
      for (auto& a : ConfigArgs(config, sub)) argv.push_back(a);
    }
    std::vector<const char*> cargs;
    for (const auto& a : argv) cargs.push_back(a.c_str());
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  o.seed_set = app.count("--seed") > 0;
  if (o.epochs < -1 || o.batch_size < -1) {
    std::fprintf(stderr, "error: negative counts\n");
    return kExitUsage;
  }

  try {
    if (*gen) return CmdGenerate(o);
    if (*ls) return CmdLocalizeLs(o);
    if (*hm) return CmdHeatmap(o);
    if (*tr) return CmdTrain(o);
    if (*ev) return CmdEval(o);
    if (*cmp) return CmdCompare(o);
    if (*sen) return CmdSensitivity(o);
    if (*rel) return CmdRelevance(o);
    if (*ind) {
      if (o.data.empty() && (o.train_manifest.empty() || o.manifest.empty())) {
        std::fprintf(stderr, "error: give --data or both --train and --manifest\n");
        return kExitUsage;
      }
      return CmdValidateIndependence(o);
    }
    if (*ing) return CmdIngest(o);
    if (*his) return CmdHistogram(o);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace pssl
