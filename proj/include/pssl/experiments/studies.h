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

#ifndef PSSL_EXPERIMENTS_STUDIES_H_
#define PSSL_EXPERIMENTS_STUDIES_H_

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pssl/dinn/features.h"
#include "pssl/dinn/train.h"
#include "pssl/scene/dataset.h"
#include "pssl/tdoa/tdoa.h"

namespace pssl {

struct DatasetFeatures {
  DatasetManifest manifest;
  FeatureSet train;
  FeatureSet val;
  FeatureSet test;
};

// Splits `manifest` by record split and loads each part.
DatasetFeatures LoadDatasetFeatures(const DatasetManifest& manifest,
                                    const FeatureOptions& options = {});

// Loads `cache` when it holds a finished run of the same configuration,
// otherwise trains and writes it there (when `cache` is non-empty).
Checkpoint TrainOrLoad(const ArchitectureConfig& arch, const TrainConfig& config,
                       const FeatureSet& train, const FeatureSet& val,
                       const std::filesystem::path& cache, std::ostream* log = nullptr);

// Least-squares localisation of every record, in manifest order.
EvalReport EvaluateLs(const DatasetManifest& manifest, const LsOptions& options, Metric metric,
                      size_t num_threads = 0);

struct ComparisonConfig {
  std::vector<std::string> methods = {"ls", "crnn", "dinn", "dinn-embedding"};
  size_t repeats = 4;
  uint64_t seed = 0;  // run k of a neural method trains with seed + k
  Scale scale = Scale::kToy;
  TrainConfig train;
  LsOptions ls;
  std::filesystem::path cache_dir;  // checkpoints; empty disables caching
  std::ostream* log = nullptr;
};

struct MethodRun {
  std::string method;
  uint64_t seed = 0;
  EvalReport report;
};

struct MethodSummary {
  std::string method;
  std::vector<double> run_means;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation over runs; 0 for one run
};

struct ComparisonReport {
  std::vector<MethodSummary> summaries;
  std::vector<MethodRun> runs;

  // Throws std::invalid_argument for a method that was not run.
  const MethodSummary& summary(std::string_view method) const;
  // Per-sample errors of every run of `method`, concatenated.
  std::vector<double> pooled_errors(std::string_view method) const;
};

// Neural methods run `repeats` times with distinct seeds; LS is
// deterministic and runs once. Test-split euclidean errors.
ComparisonReport RunComparison(const DatasetFeatures& data, const ComparisonConfig& config);

// out_dir/summary.csv, out_dir/errors_<method>_<seed>.csv, and per-method
// histogram CSVs plus histogram.svg with 15 cm bins over the room diagonal.
void WriteComparison(const ComparisonReport& report, const DatasetFeatures& data,
                     const std::filesystem::path& out_dir, double bin_width = 0.15);

enum class PerturbTarget { kMicCoords, kRt60 };
const char* PerturbTargetName(PerturbTarget t);
PerturbTarget ParsePerturbTarget(std::string_view name);

struct PerturbationSpec {
  PerturbTarget target = PerturbTarget::kMicCoords;
  double stddev = 0.0;  // metres or seconds
  uint64_t seed = 0;
};

// Adds zero-mean Gaussian noise to the target's fields of a row-major
// [N, mask.Dimension(M)] metadata matrix. Throws std::invalid_argument for a
// negative std or a target the mask leaves out.
std::vector<float> PerturbMetadata(std::span<const float> phi, const MetadataMask& mask,
                                   size_t num_mics, const PerturbationSpec& spec);

struct SensitivityRow {
  PerturbationSpec spec;
  double mean_error = 0.0;
  double increase_pct = 0.0;  // relative to the unperturbed mean error
};

struct SensitivityReport {
  double baseline_error = 0.0;
  std::vector<SensitivityRow> rows;
};

// Test-time perturbation of a trained metadata model.
SensitivityReport RunSensitivity(Model<float>& model, const FeatureSet& test,
                                 std::span<const PerturbationSpec> specs);

// target,std,seed,mean_error,increase_pct
void WriteSensitivityCsv(const SensitivityReport& report, const std::filesystem::path& path);

// The full mask first, then every other non-empty subset.
std::vector<MetadataMask> RelevanceMasks();

struct RelevanceRow {
  MetadataMask mask;
  double mean_error = 0.0;
  double performance_pct = 0.0;  // full-mask error / this error * 100
  std::string error;             // training failure, if any
};

// One training per mask of RelevanceMasks() on `data`, checkpoints cached
// under cache_dir/relevance-<mask>-seed<seed>.ckpt.
std::vector<RelevanceRow> RunRelevance(const DatasetFeatures& data, const ArchitectureConfig& base,
                                       const TrainConfig& train,
                                       const std::filesystem::path& cache_dir,
                                       std::ostream* log = nullptr);

// mask,mean_error,performance_pct,error
void WriteRelevanceCsv(std::span<const RelevanceRow> rows, const std::filesystem::path& path);

}  // namespace pssl

#endif  // PSSL_EXPERIMENTS_STUDIES_H_
