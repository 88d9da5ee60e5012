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

#include "pssl/dinn/train.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "pssl/autodiff/adam.h"
#include "pssl/signal/random.h"

namespace pssl {

TrainConfig TrainConfig::Defaults(Scale scale) {
  TrainConfig c;
  c.epochs = scale == Scale::kFull ? 40 : 15;
  return c;
}

namespace {

std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string TrainConfig::ToText() const {
  std::ostringstream os;
  os << "lr=" << FormatDouble(lr) << "\n";
  os << "batch_size=" << batch_size << "\n";
  os << "epochs=" << epochs << "\n";
  os << "seed=" << seed << "\n";
  os << "input_duration_s=" << FormatDouble(input_duration_s) << "\n";
  return os.str();
}

TrainConfig TrainConfig::FromText(std::string_view text) {
  TrainConfig c;
  std::istringstream is{std::string(text)};
  std::string line;
  while (std::getline(is, line)) {
    const size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq), v = line.substr(eq + 1);
    if (key == "lr") c.lr = std::stod(v);
    if (key == "batch_size") c.batch_size = std::stoull(v);
    if (key == "epochs") c.epochs = std::stoull(v);
    if (key == "seed") c.seed = std::stoull(v);
    if (key == "input_duration_s") c.input_duration_s = std::stod(v);
  }
  return c;
}

ArchitectureConfig CheckpointArchitecture(const Checkpoint& ckpt) {
  return ArchitectureConfig::FromText(ckpt.config);
}

TrainConfig CheckpointTrainConfig(const Checkpoint& ckpt) {
  return TrainConfig::FromText(ckpt.config);
}

std::vector<EpochLog> TrainingHistory(const Checkpoint& ckpt) {
  std::vector<EpochLog> out;
  if (!ckpt.Has("history")) return out;
  const auto v = ckpt.Get("history").AsDoubles();
  for (size_t i = 0; i + 2 < v.size(); i += 3) {
    out.push_back({static_cast<size_t>(v[i]), v[i + 1], v[i + 2]});
  }
  return out;
}

Model<float> LoadModel(const Checkpoint& ckpt) {
  Model<float> model(CheckpointArchitecture(ckpt), 0);
  model.Import("model/", ckpt);
  return model;
}

std::vector<float> ModelMetadata(const ArchitectureConfig& arch, const FeatureSet& set) {
  if (!arch.uses_metadata()) return {};
  return MetadataMatrix(set.scenes, arch.mask);
}

namespace {

void CheckInputs(const ArchitectureConfig& arch, const FeatureSet& set, const char* what) {
  if (set.size() == 0) throw std::invalid_argument(std::string(what) + " set is empty");
  if (set.channels != arch.input_channels() || set.frames != arch.num_frames ||
      set.bins != arch.num_bins) {
    throw std::invalid_argument(std::string(what) + " features [" + std::to_string(set.channels) +
                                ", " + std::to_string(set.frames) + ", " +
                                std::to_string(set.bins) + "] do not match the architecture [" +
                                std::to_string(arch.input_channels()) + ", " +
                                std::to_string(arch.num_frames) + ", " +
                                std::to_string(arch.num_bins) + "]");
  }
}

// Gathers rows `idx` of the feature and metadata matrices into batch tensors.
void MakeBatch(const FeatureSet& set, std::span<const float> phi, size_t phi_dim,
               std::span<const size_t> idx, Tensor<float>& x, Tensor<float>& p) {
  const size_t n = idx.size(), ss = set.sample_size();
  std::vector<float> xv(n * ss);
  for (size_t b = 0; b < n; ++b) {
    const auto s = set.sample(idx[b]);
    std::copy(s.begin(), s.end(), xv.begin() + b * ss);
  }
  x = Tensor<float>({n, set.channels, set.frames, set.bins}, std::move(xv));
  if (phi_dim == 0) {
    p = Tensor<float>();
    return;
  }
  std::vector<float> pv(n * phi_dim);
  for (size_t b = 0; b < n; ++b) {
    std::copy_n(phi.begin() + idx[b] * phi_dim, phi_dim, pv.begin() + b * phi_dim);
  }
  p = Tensor<float>({n, phi_dim}, std::move(pv));
}

Checkpoint RunTraining(const ArchitectureConfig& arch, const TrainConfig& cfg,
                       const FeatureSet& train, const FeatureSet& val,
                       const TrainOptions& options, const Checkpoint* resume) {
  CheckInputs(arch, train, "training");
  CheckInputs(arch, val, "validation");
  if (cfg.batch_size < 2) throw std::invalid_argument("batch size must be at least 2");
  if (!(cfg.lr >= 0.0) || !std::isfinite(cfg.lr)) {
    throw std::invalid_argument("learning rate must be finite and >= 0");
  }

  Model<float> model(arch, DeriveSeed(cfg.seed, {0}));
  std::vector<Tensor<float>> params = model.parameter_tensors();
  AdamState<float> adam;
  adam.lr = cfg.lr;
  std::vector<EpochLog> history;
  std::vector<NamedArray> best;
  size_t first_epoch = 1, best_epoch = 0, steps = 0;
  double best_val = std::numeric_limits<double>::infinity();

  if (resume) {
    model.Import("state/", *resume);
    adam.step = resume->Get("state/adam_step").AsInts().at(0);
    for (const auto& p : model.parameters()) {
      adam.m.push_back(resume->Get("state/adam.m/" + p.name).AsFloats());
      adam.v.push_back(resume->Get("state/adam.v/" + p.name).AsFloats());
    }
    const auto meta = resume->Get("state/progress").AsInts();
    first_epoch = static_cast<size_t>(meta.at(0)) + 1;
    best_epoch = static_cast<size_t>(meta.at(1));
    steps = static_cast<size_t>(meta.at(2));
    best_val = resume->Get("state/best_val").AsDoubles().at(0);
    history = TrainingHistory(*resume);
    for (const auto& a : resume->arrays) {
      if (a.name.starts_with("model/")) best.push_back(a);
    }
  }

  const size_t phi_dim = arch.metadata_dim();
  const std::vector<float> phi_train = ModelMetadata(arch, train);
  const std::vector<float> phi_val = ModelMetadata(arch, val);
  std::vector<float> target;
  for (const Scene& s : train.scenes) {
    target.push_back(static_cast<float>(s.source.x));
    target.push_back(static_cast<float>(s.source.y));
  }

  const size_t last_epoch =
      options.stop_after_epoch ? std::min(options.stop_after_epoch, cfg.epochs) : cfg.epochs;
  size_t epoch = first_epoch;
  for (; epoch <= last_epoch; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(DeriveSeed(cfg.seed, {1, epoch}));
    for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);

    double loss_sum = 0.0;
    size_t loss_count = 0;
    bool capped = false;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t n = std::min(cfg.batch_size, order.size() - start);
      if (n < 2) break;  // batch statistics need two samples
      if (options.max_steps && steps >= options.max_steps) {
        capped = true;
        break;
      }
      const std::span<const size_t> idx(order.data() + start, n);
      Tensor<float> x, phi;
      MakeBatch(train, phi_train, phi_dim, idx, x, phi);
      std::vector<float> tv(2 * n);
      for (size_t b = 0; b < n; ++b) {
        tv[2 * b] = target[2 * idx[b]];
        tv[2 * b + 1] = target[2 * idx[b] + 1];
      }
      model.ZeroGrad();
      Tape<float> tape;
      const Tensor<float> loss =
          ad::L1Loss(tape, model.Forward(tape, x, phi, true), Tensor<float>({n, 2}, tv));
      if (!std::isfinite(loss.item())) {
        std::ostringstream os;
        os << "non-finite training loss at epoch " << epoch << ", step " << steps + 1
           << "; batch starts with sample '" << train.ids[idx[0]] << "'";
        throw std::runtime_error(os.str());
      }
      tape.Backward(loss);
      for (const auto& p : model.parameters()) {
        for (float g : p.tensor.grad()) {
          if (std::isfinite(g)) continue;
          std::ostringstream os;
          os << "non-finite gradient of '" << p.name << "' at epoch " << epoch << ", step "
             << steps + 1 << " (loss " << loss.item() << "); batch starts with sample '"
             << train.ids[idx[0]] << "'";
          throw std::runtime_error(os.str());
        }
      }
      AdamStep<float>(params, adam);
      loss_sum += static_cast<double>(loss.item()) * static_cast<double>(n);
      loss_count += n;
      ++steps;
    }
    if (loss_count == 0) break;

    const std::vector<Point2> pred = Predict(model, val, phi_val);
    double err = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
      err += std::hypot(pred[i].x - val.scenes[i].source.x, pred[i].y - val.scenes[i].source.y);
    }
    const EpochLog log{epoch, loss_sum / static_cast<double>(loss_count),
                       err / static_cast<double>(pred.size())};
    history.push_back(log);
    if (!(log.val_error >= best_val)) {  // also replaces a NaN best
      best_val = log.val_error;
      best_epoch = epoch;
      best.clear();
      model.Export("model/", best);
    }
    if (options.log) {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      *options.log << "[train] arch=" << VariantName(arch.variant) << " seed=" << cfg.seed
                   << " epoch=" << epoch << "/" << cfg.epochs << " train_loss=" << log.train_loss
                   << " val_error=" << log.val_error << " best_epoch=" << best_epoch
                   << " seconds=" << secs << std::endl;
    }
    if (capped) {
      ++epoch;
      break;
    }
  }

  Checkpoint ckpt;
  ckpt.config = arch.ToText() + cfg.ToText();
  ckpt.config_hash = HashConfig(ckpt.config);
  ckpt.arrays = std::move(best);
  model.Export("state/", ckpt.arrays);
  const auto& named = model.parameters();
  for (size_t i = 0; i < named.size(); ++i) {
    const std::vector<uint64_t> dims(named[i].tensor.shape().begin(),
                                     named[i].tensor.shape().end());
    const bool has = i < adam.m.size();
    std::vector<float> zeros(named[i].tensor.size(), 0.0f);
    ckpt.arrays.push_back(
        NamedArray::Floats("state/adam.m/" + named[i].name, dims, has ? adam.m[i] : zeros));
    ckpt.arrays.push_back(
        NamedArray::Floats("state/adam.v/" + named[i].name, dims, has ? adam.v[i] : zeros));
  }
  const int64_t adam_step = adam.step;
  ckpt.arrays.push_back(NamedArray::Ints("state/adam_step", std::span<const int64_t>(&adam_step, 1)));
  const std::vector<int64_t> progress = {static_cast<int64_t>(epoch - 1),
                                         static_cast<int64_t>(best_epoch),
                                         static_cast<int64_t>(steps)};
  ckpt.arrays.push_back(NamedArray::Ints("state/progress", progress));
  ckpt.arrays.push_back(NamedArray::Doubles("state/best_val", {1}, std::span<const double>(&best_val, 1)));
  std::vector<double> h;
  for (const auto& e : history) {
    h.push_back(static_cast<double>(e.epoch));
    h.push_back(e.train_loss);
    h.push_back(e.val_error);
  }
  ckpt.arrays.push_back(NamedArray::Doubles("history", {history.size(), 3}, h));
  if (best_epoch == 0) {
    // No epoch completed: the initial weights stand in for the best ones.
    model.Export("model/", ckpt.arrays);
  }
  return ckpt;
}

}  // namespace

Checkpoint Train(const ArchitectureConfig& arch, const TrainConfig& config, const FeatureSet& train,
                 const FeatureSet& val, const TrainOptions& options) {
  return RunTraining(arch, config, train, val, options, nullptr);
}

Checkpoint ResumeTraining(const Checkpoint& ckpt, const FeatureSet& train, const FeatureSet& val,
                          const TrainOptions& options, size_t epochs) {
  TrainConfig config = CheckpointTrainConfig(ckpt);
  if (epochs > 0) config.epochs = epochs;
  return RunTraining(CheckpointArchitecture(ckpt), config, train, val, options, &ckpt);
}

std::vector<Point2> Predict(Model<float>& model, const FeatureSet& set, std::span<const float> phi,
                            size_t batch_size) {
  const auto& arch = model.config();
  CheckInputs(arch, set, "evaluation");
  const size_t dim = arch.metadata_dim();
  if (phi.size() != set.size() * dim) {
    throw std::invalid_argument("metadata has " + std::to_string(phi.size()) +
                                " values, expected " + std::to_string(set.size() * dim));
  }
  std::vector<Point2> out;
  out.reserve(set.size());
  std::vector<size_t> idx;
  for (size_t start = 0; start < set.size(); start += batch_size) {
    const size_t n = std::min(batch_size, set.size() - start);
    idx.resize(n);
    for (size_t b = 0; b < n; ++b) idx[b] = start + b;
    Tensor<float> x, p;
    MakeBatch(set, phi, dim, idx, x, p);
    Tape<float> tape(false);
    const Tensor<float> y = model.Forward(tape, x, p, false);
    for (size_t b = 0; b < n; ++b) out.push_back({y.value()[2 * b], y.value()[2 * b + 1]});
  }
  return out;
}

const char* MetricName(Metric m) { return m == Metric::kEuclidean ? "euclidean" : "l1"; }

Metric ParseMetric(std::string_view name) {
  if (name == "euclidean") return Metric::kEuclidean;
  if (name == "l1") return Metric::kL1;
  throw std::invalid_argument("unknown metric '" + std::string(name) +
                              "' (expected euclidean, l1)");
}

EvalReport Summarize(std::vector<std::string> ids, std::vector<Point2> predicted,
                     std::vector<Point2> truth, Metric metric) {
  if (ids.size() != predicted.size() || ids.size() != truth.size()) {
    throw std::invalid_argument("evaluation inputs differ in length");
  }
  EvalReport r;
  r.metric = metric;
  for (size_t i = 0; i < ids.size(); ++i) {
    const double dx = predicted[i].x - truth[i].x, dy = predicted[i].y - truth[i].y;
    r.errors.push_back(metric == Metric::kEuclidean ? std::hypot(dx, dy)
                                                    : std::abs(dx) + std::abs(dy));
  }
  r.ids = std::move(ids);
  r.predicted = std::move(predicted);
  r.truth = std::move(truth);
  if (r.errors.empty()) return r;
  double s = 0.0;
  for (double e : r.errors) s += e;
  r.mean = s / static_cast<double>(r.errors.size());
  double ss = 0.0;
  for (double e : r.errors) ss += (e - r.mean) * (e - r.mean);
  r.stddev = std::sqrt(ss / static_cast<double>(r.errors.size()));
  std::vector<double> sorted = r.errors;
  std::sort(sorted.begin(), sorted.end());
  const size_t n = sorted.size();
  r.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  return r;
}

EvalReport Evaluate(Model<float>& model, const FeatureSet& set, Metric metric,
                    std::span<const float> phi) {
  std::vector<float> own;
  if (phi.empty() && model.config().uses_metadata()) {
    own = ModelMetadata(model.config(), set);
    phi = own;
  }
  std::vector<Point2> truth;
  for (const Scene& s : set.scenes) truth.push_back(s.source);
  return Summarize(set.ids, Predict(model, set, phi), std::move(truth), metric);
}

EvalReport EvaluateCheckpoint(const Checkpoint& ckpt, const FeatureSet& set, Metric metric,
                              const MetadataMask* expected_mask) {
  Model<float> model = LoadModel(ckpt);
  const auto& arch = model.config();
  const MetadataMask trained = arch.uses_metadata() ? arch.mask : MetadataMask::None();
  if (expected_mask && !(*expected_mask == trained)) {
    throw std::invalid_argument("checkpoint was trained with metadata '" + trained.ToString() +
                                "', not '" + expected_mask->ToString() + "'");
  }
  if (!set.scenes.empty() && set.scenes[0].mics.size() != arch.num_mics) {
    throw std::invalid_argument("checkpoint expects " + std::to_string(arch.num_mics) +
                                " microphones, manifest has " +
                                std::to_string(set.scenes[0].mics.size()));
  }
  return Evaluate(model, set, metric);
}

void WriteEvalCsv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "id,pred_x,pred_y,true_x,true_y," << MetricName(report.metric) << "_error\n";
  char buf[256];
  for (size_t i = 0; i < report.ids.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%s,%.9g,%.9g,%.9g,%.9g,%.9g\n", report.ids[i].c_str(),
                  report.predicted[i].x, report.predicted[i].y, report.truth[i].x,
                  report.truth[i].y, report.errors[i]);
    out << buf;
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace pssl
