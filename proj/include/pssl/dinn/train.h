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

#ifndef PSSL_DINN_TRAIN_H_
#define PSSL_DINN_TRAIN_H_

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pssl/autodiff/checkpoint.h"
#include "pssl/dinn/features.h"
#include "pssl/dinn/model.h"

namespace pssl {

struct TrainConfig {
  double lr = 5e-4;
  size_t batch_size = 32;
  size_t epochs = 15;
  uint64_t seed = 0;
  double input_duration_s = 0.5;

  // Full scale runs 40 epochs, toy scale 15.
  static TrainConfig Defaults(Scale scale);
  std::string ToText() const;
  static TrainConfig FromText(std::string_view text);
};

struct EpochLog {
  size_t epoch = 0;
  double train_loss = 0.0;  // mean minibatch L1 loss
  double val_error = 0.0;   // mean euclidean error, metres
};

struct TrainOptions {
  std::ostream* log = nullptr;
  // Stop (with a resumable checkpoint) after this epoch; 0 runs them all.
  size_t stop_after_epoch = 0;
  // Cap on optimizer steps; 0 means no cap.
  size_t max_steps = 0;
};

// Minibatch Adam on the L1 loss with per-epoch validation. The returned
// checkpoint holds the best-validation weights under "model/", the last
// epoch's resumable state under "state/" and the epoch history. Deterministic
// given the seed. Throws std::invalid_argument on empty or mis-shaped inputs
// and std::runtime_error on a non-finite loss.
Checkpoint Train(const ArchitectureConfig& arch, const TrainConfig& config, const FeatureSet& train,
                 const FeatureSet& val, const TrainOptions& options = {});

// Continues a run from its "state/" arrays up to the configured epoch count.
// The result is bit-identical to an uninterrupted run.
// `epochs` raises the stored epoch budget; 0 keeps it.
Checkpoint ResumeTraining(const Checkpoint& ckpt, const FeatureSet& train, const FeatureSet& val,
                          const TrainOptions& options = {}, size_t epochs = 0);

ArchitectureConfig CheckpointArchitecture(const Checkpoint& ckpt);
TrainConfig CheckpointTrainConfig(const Checkpoint& ckpt);
std::vector<EpochLog> TrainingHistory(const Checkpoint& ckpt);
// The best-validation model.
Model<float> LoadModel(const Checkpoint& ckpt);

// Metadata rows for a model; empty for crnn.
std::vector<float> ModelMetadata(const ArchitectureConfig& arch, const FeatureSet& set);

// Evaluation-mode predictions in feature-set order. `phi` is row-major
// [N, metadata_dim] (empty for crnn).
std::vector<Point2> Predict(Model<float>& model, const FeatureSet& set, std::span<const float> phi,
                            size_t batch_size = 64);

enum class Metric { kEuclidean, kL1 };
const char* MetricName(Metric m);
Metric ParseMetric(std::string_view name);

struct EvalReport {
  Metric metric = Metric::kEuclidean;
  std::vector<std::string> ids;
  std::vector<Point2> predicted;
  std::vector<Point2> truth;
  std::vector<double> errors;
  double mean = 0.0;
  double median = 0.0;
  double stddev = 0.0;  // population
};

EvalReport Summarize(std::vector<std::string> ids, std::vector<Point2> predicted,
                     std::vector<Point2> truth, Metric metric);

// Evaluates against the set's true source positions with the metadata the
// model was trained on, or `phi` when given.
EvalReport Evaluate(Model<float>& model, const FeatureSet& set, Metric metric,
                    std::span<const float> phi = {});

// Throws std::invalid_argument if `expected_mask` differs from the mask the
// checkpoint was trained with.
EvalReport EvaluateCheckpoint(const Checkpoint& ckpt, const FeatureSet& set, Metric metric,
                              const MetadataMask* expected_mask = nullptr);

// id,pred_x,pred_y,true_x,true_y,error
void WriteEvalCsv(const EvalReport& report, const std::filesystem::path& path);

}  // namespace pssl

#endif  // PSSL_DINN_TRAIN_H_
