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

#include "pssl/experiments/studies.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "pssl/experiments/histogram.h"
#include "pssl/signal/random.h"
#include "pssl/signal/wav.h"

namespace pssl {

namespace fs = std::filesystem;

DatasetFeatures LoadDatasetFeatures(const DatasetManifest& manifest,
                                    const FeatureOptions& options) {
  DatasetFeatures d;
  d.manifest = manifest;
  d.train = LoadFeatures(manifest.Filter(Split::kTrain), options);
  d.val = LoadFeatures(manifest.Filter(Split::kVal), options);
  d.test = LoadFeatures(manifest.Filter(Split::kTest), options);
  return d;
}

Checkpoint TrainOrLoad(const ArchitectureConfig& arch, const TrainConfig& config,
                       const FeatureSet& train, const FeatureSet& val, const fs::path& cache,
                       std::ostream* log) {
  const std::string wanted = arch.ToText() + config.ToText();
  TrainOptions opts;
  opts.log = log;
  if (!cache.empty() && fs::exists(cache)) {
    Checkpoint c = LoadCheckpoint(cache);
    if (c.config == wanted) {
      if (TrainingHistory(c).size() >= config.epochs) {
        if (log) *log << "[cache] reusing " << cache.string() << std::endl;
        return c;
      }
      if (log) *log << "[cache] resuming " << cache.string() << std::endl;
      c = ResumeTraining(c, train, val, opts);
      SaveCheckpoint(c, cache);
      return c;
    }
    if (log) *log << "[cache] stale " << cache.string() << ", retraining" << std::endl;
  }
  Checkpoint c = Train(arch, config, train, val, opts);
  if (!cache.empty()) {
    fs::create_directories(cache.parent_path());
    const fs::path tmp = cache.string() + ".tmp";
    SaveCheckpoint(c, tmp);
    fs::rename(tmp, cache);
  }
  return c;
}

EvalReport EvaluateLs(const DatasetManifest& manifest, const LsOptions& options, Metric metric,
                      size_t num_threads) {
  const size_t n = manifest.records.size();
  std::vector<Point2> pred(n);
  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  auto work = [&] {
    for (size_t i = next++; i < n; i = next++) {
      try {
        const ManifestRecord& r = manifest.records[i];
        pred[i] = LocalizeLs(ReadWav(manifest.AudioPath(r)), r.scene, options).estimate.position;
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  size_t threads = num_threads ? num_threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::max<size_t>(1, std::min(threads, n));
  std::vector<std::thread> pool;
  for (size_t t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  std::vector<std::string> ids;
  std::vector<Point2> truth;
  for (const auto& r : manifest.records) {
    ids.push_back(r.id);
    truth.push_back(r.scene.source);
  }
  return Summarize(std::move(ids), std::move(pred), std::move(truth), metric);
}

const MethodSummary& ComparisonReport::summary(std::string_view method) const {
  for (const auto& s : summaries) {
    if (s.method == method) return s;
  }
  throw std::invalid_argument("method '" + std::string(method) + "' was not compared");
}

std::vector<double> ComparisonReport::pooled_errors(std::string_view method) const {
  std::vector<double> out;
  for (const auto& r : runs) {
    if (r.method == method) out.insert(out.end(), r.report.errors.begin(), r.report.errors.end());
  }
  return out;
}

ComparisonReport RunComparison(const DatasetFeatures& data, const ComparisonConfig& config) {
  if (config.repeats == 0) throw std::invalid_argument("comparison needs at least one repeat");
  ComparisonReport report;
  for (const std::string& method : config.methods) {
    MethodSummary summary;
    summary.method = method;
    if (method == "ls") {
      if (config.log) *config.log << "[compare] ls on " << data.test.size() << " samples" << std::endl;
      report.runs.push_back(
          {method, 0, EvaluateLs(data.manifest.Filter(Split::kTest), config.ls, Metric::kEuclidean)});
      summary.run_means.push_back(report.runs.back().report.mean);
    } else {
      const Variant v = ParseVariant(method);
      const size_t mics = data.test.scenes.empty() ? 4 : data.test.scenes[0].mics.size();
      ArchitectureConfig arch = ArchitectureConfig::Make(v, config.scale, mics);
      arch.num_frames = data.train.frames;
      arch.num_bins = data.train.bins;
      for (size_t k = 0; k < config.repeats; ++k) {
        TrainConfig tc = config.train;
        tc.seed = config.seed + k;
        const fs::path cache =
            config.cache_dir.empty()
                ? fs::path()
                : config.cache_dir / (method + "-seed" + std::to_string(tc.seed) + ".ckpt");
        const Checkpoint ckpt = TrainOrLoad(arch, tc, data.train, data.val, cache, config.log);
        report.runs.push_back({method, tc.seed, EvaluateCheckpoint(ckpt, data.test, Metric::kEuclidean)});
        summary.run_means.push_back(report.runs.back().report.mean);
        if (config.log) {
          *config.log << "[compare] " << method << " seed=" << tc.seed
                      << " test_mean=" << summary.run_means.back() << std::endl;
        }
      }
    }
    double s = 0.0;
    for (double m : summary.run_means) s += m;
    summary.mean = s / static_cast<double>(summary.run_means.size());
    if (summary.run_means.size() > 1) {
      double ss = 0.0;
      for (double m : summary.run_means) ss += (m - summary.mean) * (m - summary.mean);
      summary.stddev = std::sqrt(ss / static_cast<double>(summary.run_means.size() - 1));
    }
    report.summaries.push_back(std::move(summary));
  }
  return report;
}

void WriteComparison(const ComparisonReport& report, const DatasetFeatures& data,
                     const fs::path& out_dir, double bin_width) {
  fs::create_directories(out_dir);
  {
    std::ofstream out(out_dir / "summary.csv");
    if (!out) throw std::runtime_error("cannot write " + (out_dir / "summary.csv").string());
    out << "method,runs,mean_error,std_error,run_means\n";
    char buf[64];
    for (const auto& s : report.summaries) {
      std::snprintf(buf, sizeof(buf), "%.9g,%.9g", s.mean, s.stddev);
      out << s.method << "," << s.run_means.size() << "," << buf << ",";
      for (size_t i = 0; i < s.run_means.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%s%.9g", i ? ";" : "", s.run_means[i]);
        out << buf;
      }
      out << "\n";
    }
  }
  for (const auto& r : report.runs) {
    WriteEvalCsv(r.report, out_dir / ("errors_" + r.method + "_" + std::to_string(r.seed) + ".csv"));
  }
  double diagonal = 0.0;
  for (const Scene& s : data.test.scenes) {
    diagonal = std::max(diagonal, std::hypot(s.room.width, s.room.length));
  }
  std::vector<HistogramSeries> series;
  for (const auto& s : report.summaries) {
    const auto errors = report.pooled_errors(s.method);
    if (errors.empty()) continue;
    series.push_back({s.method, ComputeHistogram(errors, bin_width, diagonal)});
    WriteHistogramCsv(series.back().hist, out_dir / ("histogram_" + s.method + ".csv"));
  }
  if (!series.empty()) WriteHistogramSvg(series, out_dir / "histogram.svg");
}

const char* PerturbTargetName(PerturbTarget t) {
  return t == PerturbTarget::kMicCoords ? "mic-coords" : "rt60";
}

PerturbTarget ParsePerturbTarget(std::string_view name) {
  if (name == "mic-coords" || name == "mic") return PerturbTarget::kMicCoords;
  if (name == "rt60") return PerturbTarget::kRt60;
  throw std::invalid_argument("unknown perturbation target '" + std::string(name) +
                              "' (expected mic-coords, rt60)");
}

std::vector<float> PerturbMetadata(std::span<const float> phi, const MetadataMask& mask,
                                   size_t num_mics, const PerturbationSpec& spec) {
  if (!(spec.stddev >= 0.0) || !std::isfinite(spec.stddev)) {
    throw std::invalid_argument("perturbation std must be finite and >= 0");
  }
  const bool present = spec.target == PerturbTarget::kMicCoords ? mask.mic_coords : mask.rt60;
  if (!present) {
    throw std::invalid_argument(std::string("perturbation targets ") +
                                PerturbTargetName(spec.target) + ", which metadata '" +
                                mask.ToString() + "' leaves out");
  }
  const size_t dim = mask.Dimension(num_mics);
  if (dim == 0 || phi.size() % dim != 0) throw std::invalid_argument("metadata matrix shape");
  // Column range of the target within a row.
  size_t first = 0, count = 0;
  if (spec.target == PerturbTarget::kMicCoords) {
    count = 2 * num_mics;
  } else {
    first = dim - 1;
    count = 1;
  }
  std::vector<float> out(phi.begin(), phi.end());
  if (spec.stddev == 0.0) return out;
  Rng rng(spec.seed);
  for (size_t row = 0; row < phi.size() / dim; ++row) {
    for (size_t k = 0; k < count; ++k) {
      out[row * dim + first + k] += static_cast<float>(spec.stddev * StandardNormal(rng));
    }
  }
  return out;
}

SensitivityReport RunSensitivity(Model<float>& model, const FeatureSet& test,
                                 std::span<const PerturbationSpec> specs) {
  const ArchitectureConfig& arch = model.config();
  if (!arch.uses_metadata()) throw std::invalid_argument("sensitivity needs a metadata model");
  const std::vector<float> phi = ModelMetadata(arch, test);
  SensitivityReport report;
  report.baseline_error = Evaluate(model, test, Metric::kEuclidean, phi).mean;
  for (const auto& spec : specs) {
    const std::vector<float> noisy = PerturbMetadata(phi, arch.mask, arch.num_mics, spec);
    SensitivityRow row;
    row.spec = spec;
    row.mean_error = Evaluate(model, test, Metric::kEuclidean, noisy).mean;
    row.increase_pct = (row.mean_error - report.baseline_error) / report.baseline_error * 100.0;
    report.rows.push_back(row);
  }
  return report;
}

void WriteSensitivityCsv(const SensitivityReport& report, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  char buf[160];
  std::snprintf(buf, sizeof(buf), "none,0,0,%.9g,0\n", report.baseline_error);
  out << "target,std,seed,mean_error,increase_pct\n" << buf;
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.6g,%llu,%.9g,%.9g\n", PerturbTargetName(r.spec.target),
                  r.spec.stddev, static_cast<unsigned long long>(r.spec.seed), r.mean_error,
                  r.increase_pct);
    out << buf;
  }
}

std::vector<MetadataMask> RelevanceMasks() {
  std::vector<MetadataMask> out = {MetadataMask::Full()};
  for (int bits = 6; bits >= 1; --bits) {
    out.push_back({(bits & 4) != 0, (bits & 2) != 0, (bits & 1) != 0});
  }
  return out;
}

std::vector<RelevanceRow> RunRelevance(const DatasetFeatures& data, const ArchitectureConfig& base,
                                       const TrainConfig& train, const fs::path& cache_dir,
                                       std::ostream* log) {
  std::vector<RelevanceRow> rows;
  for (const MetadataMask& mask : RelevanceMasks()) {
    RelevanceRow row;
    row.mask = mask;
    try {
      ArchitectureConfig arch = base;
      arch.mask = mask;
      const fs::path cache =
          cache_dir.empty() ? fs::path()
                            : cache_dir / ("relevance-" + mask.ToString() + "-seed" +
                                           std::to_string(train.seed) + ".ckpt");
      const Checkpoint ckpt = TrainOrLoad(arch, train, data.train, data.val, cache, log);
      row.mean_error = EvaluateCheckpoint(ckpt, data.test, Metric::kEuclidean).mean;
      if (log) {
        *log << "[relevance] mask=" << mask.ToString() << " test_mean=" << row.mean_error
             << std::endl;
      }
    } catch (const std::exception& e) {
      row.mean_error = std::numeric_limits<double>::quiet_NaN();
      row.error = e.what();
      if (log) *log << "[relevance] mask=" << mask.ToString() << " failed: " << e.what() << std::endl;
    }
    rows.push_back(row);
  }
  const double full = rows[0].mean_error;
  for (auto& r : rows) r.performance_pct = full / r.mean_error * 100.0;
  return rows;
}

void WriteRelevanceCsv(std::span<const RelevanceRow> rows, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "mask,mean_error,performance_pct,error\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.9g,%.9g,", r.mask.ToString().c_str(), r.mean_error,
                  r.performance_pct);
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out << buf << err << "\n";
  }
}

}  // namespace pssl
