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

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits 1 if any criterion fails. Datasets and checkpoints are cached under
// --work so a second run only re-evaluates.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pssl/autodiff/gradcheck.h"
#include "pssl/dinn/model.h"
#include "pssl/experiments/cli.h"
#include "pssl/experiments/histogram.h"
#include "pssl/experiments/studies.h"
#include "pssl/room/room.h"
#include "pssl/scene/dataset.h"
#include "pssl/scene/independence.h"
#include "pssl/scene/sampling.h"
#include "pssl/tdoa/tdoa.h"

namespace pssl {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

constexpr uint64_t kSeed = 1;  // neural runs use kSeed, kSeed + 1, kSeed + 2
constexpr size_t kRuns = 3;

double Seconds(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

template <typename... Args>
std::string Fmt(const char* f, Args... args) {
  const int n = std::snprintf(nullptr, 0, f, args...);
  std::string out(static_cast<size_t>(n) + 1, '\0');
  std::snprintf(out.data(), out.size(), f, args...);
  out.pop_back();
  return out;
}

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

MultichannelAudio RenderWgn(const Scene& s, uint64_t seed) {
  Rng rng(seed);
  const MonoSignal src = WhiteNoise(8000, rng);
  return RenderScene(s, src, rng);
}

Outcome GccPhatOracle() {
  const auto start = Clock::now();
  Rng rng(101);
  size_t exact = 0, sub_ok = 0;
  double worst_sub = 0.0;
  const size_t trials = 200, n = 8000;
  for (size_t k = 0; k < trials; ++k) {
    const int delay = static_cast<int>(std::floor(Uniform(rng, -64.0, 65.0)));
    const MonoSignal base = WhiteNoise(n + 200, rng);
    std::vector<double> a(n), b(n);
    for (size_t t = 0; t < n; ++t) {
      a[t] = base.samples()[t + 100 - delay];
      b[t] = base.samples()[t + 100];
    }
    MultichannelAudio pair({MonoSignal(a, 16000), MonoSignal(b, 16000)});
    pair = AddNoiseAtSnr(pair, 30.0, rng);
    const double tau_int = GccPhat(pair.channel(0), pair.channel(1), 64, false) * 16000;
    const double tau_sub = GccPhat(pair.channel(0), pair.channel(1), 64, true) * 16000;
    exact += std::abs(tau_int - delay) < 1e-9;
    worst_sub = std::max(worst_sub, std::abs(tau_sub - delay));
    sub_ok += std::abs(tau_sub - delay) <= 0.25;
  }
  const double secs = Seconds(start);
  const double frac = static_cast<double>(exact) / trials;
  return {frac >= 0.99 && sub_ok == trials && secs < 30,
          Fmt("integer exact %zu/%zu (>= 99%%), sub-sample worst %.3f samples (<= 0.25), %.1f s "
              "(< 30 s)",
              exact, trials, worst_sub, secs)};
}

Outcome LsAnechoicGeometry() {
  const auto start = Clock::now();
  const double bound = 0.02 * std::sqrt(2.0) + kSpeedOfSound / 16000;
  Rng rng(202);
  size_t within = 0;
  double worst = 0.0;
  const size_t scenes = 100;
  for (size_t k = 0; k < scenes; ++k) {
    Scene s = SampleAnechoicScene(rng);
    s.snr_db = kNoiselessSnr;
    const LsResult r = LocalizeLs(RenderWgn(s, 5000 + k), s);
    const double e = Distance(r.estimate.position, s.source);
    within += e <= bound;
    worst = std::max(worst, e);
  }
  const double secs = Seconds(start);
  return {within >= 95 && secs < 300,
          Fmt("%zu/%zu scenes within %.4f m (>= 95), worst %.4f m, %.1f s (< 300 s)", within,
              scenes, bound, worst, secs)};
}

Outcome LsReverberation() {
  const auto start = Clock::now();
  const double levels[] = {0.0, 0.3, 0.6};
  Rng rng(303);
  std::vector<Scene> geometry;
  for (int k = 0; k < 50; ++k) geometry.push_back(SampleReverberantScene(rng));
  std::vector<double> medians;
  for (double rt60 : levels) {
    std::vector<double> errors;
    for (size_t k = 0; k < geometry.size(); ++k) {
      Scene s = geometry[k];
      s.room.rt60 = rt60;
      const LsResult r = LocalizeLs(RenderWgn(s, 7000 + k), s);
      errors.push_back(Distance(r.estimate.position, s.source));
    }
    medians.push_back(Median(errors));
  }
  const double secs = Seconds(start);
  const bool increasing = medians[0] < medians[1] && medians[1] < medians[2];
  return {increasing && secs < 600,
          Fmt("median error %.4f / %.4f / %.4f m at rt60 0 / 0.3 / 0.6 s (strictly increasing), "
              "%.1f s (< 600 s)",
              medians[0], medians[1], medians[2], secs)};
}

Outcome IsmFidelity() {
  const auto start = Clock::now();
  Rng rng(404);
  size_t ok = 0;
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Scene s = SampleReverberantScene(rng);
    const double est = MeasureRt60(SimulateRir(s.room, s.source3(), s.mic3(k % 4)));
    const double rel = est / s.room.rt60 - 1.0;
    ok += std::abs(rel) <= 0.2;
    if (std::abs(rel) > std::abs(worst)) worst = rel;
  }
  const double secs = Seconds(start);
  return {ok == 20 && secs < 120,
          Fmt("%zu/20 within +-20%%, worst %+.1f%%, %.1f s (< 120 s)", ok, 100 * worst, secs)};
}

// --- criterion 5 ------------------------------------------------------------

using TD = Tensor<double>;

TD RandomTensor(Shape shape, Rng& rng, double scale = 1.0) {
  std::vector<double> v(NumElements(shape));
  for (auto& x : v) x = scale * StandardNormal(rng);
  return TD(std::move(shape), std::move(v), true);
}

std::vector<double> Projection(size_t n, Rng& rng) {
  std::vector<double> w(n);
  for (auto& x : w) x = StandardNormal(rng);
  return w;
}

// Projects `op`'s output to a scalar and checks every coordinate.
GradCheckReport CheckOp(const std::function<TD(Tape<double>&)>& op, std::vector<NamedTensor> params,
                        Rng& rng) {
  Tape<double> probe(false);
  const auto w = Projection(op(probe).size(), rng);
  return FiniteDiffCheck([&](Tape<double>& t) { return ad::WeightedSum<double>(t, op(t), w); },
                         std::move(params));
}

Outcome AutodiffCorrectness() {
  const auto start = Clock::now();
  Rng rng(505);
  std::vector<std::pair<std::string, GradCheckReport>> checks;
  for (int pad : {0, 1}) {
    const TD x = RandomTensor({2, 3, 5, 6}, rng), w = RandomTensor({4, 3, 2, 2}, rng),
             b = RandomTensor({4}, rng);
    checks.emplace_back(Fmt("conv2d(pad=%d)", pad),
                        CheckOp([&](auto& t) { return ad::Conv2d(t, x, w, b, pad); },
                                {{"x", x}, {"w", w}, {"b", b}}, rng));
  }
  {
    const TD x = RandomTensor({2, 3, 5, 7}, rng);
    checks.emplace_back("avgpool2d", CheckOp([&](auto& t) { return ad::AvgPool2d(t, x); },
                                             {{"x", x}}, rng));
  }
  {
    const TD x = RandomTensor({3, 4, 5}, rng);
    for (size_t axis = 0; axis < 3; ++axis) {
      checks.emplace_back(Fmt("mean(axis=%zu)", axis),
                          CheckOp([&](auto& t) { return ad::MeanOverAxis(t, x, axis); }, {{"x", x}},
                                  rng));
    }
    checks.emplace_back("swapaxes", CheckOp([&](auto& t) { return ad::SwapAxes(t, x, 0, 2); },
                                            {{"x", x}}, rng));
    checks.emplace_back("relu", CheckOp([&](auto& t) { return ad::Relu(t, x); }, {{"x", x}}, rng));
  }
  for (bool training : {true, false}) {
    const TD x = RandomTensor({4, 3, 3, 5}, rng);
    ad::BatchNormParams<double> bn(3);
    for (auto& v : bn.gamma.data()->value) v = 1.0 + 0.3 * StandardNormal(rng);
    for (auto& v : bn.beta.data()->value) v = 0.3 * StandardNormal(rng);
    for (auto& v : bn.running_var) v = 0.5 + Uniform(rng, 0.0, 1.0);
    checks.emplace_back(training ? "batchnorm(train)" : "batchnorm(eval)",
                        CheckOp(
                            [&](auto& t) {
                              ad::BatchNormParams<double> local = bn;
                              return ad::BatchNorm(t, x, local, training);
                            },
                            {{"x", x}, {"gamma", bn.gamma}, {"beta", bn.beta}}, rng));
  }
  {
    const TD x = RandomTensor({3, 5}, rng), w = RandomTensor({4, 5}, rng),
             b = RandomTensor({4}, rng), y = RandomTensor({3, 2}, rng);
    checks.emplace_back("linear", CheckOp([&](auto& t) { return ad::Linear(t, x, w, b); },
                                          {{"x", x}, {"w", w}, {"b", b}}, rng));
    checks.emplace_back("concat", CheckOp([&](auto& t) { return ad::Concat(t, x, y); },
                                          {{"x", x}, {"y", y}}, rng));
    const TD p = RandomTensor({3, 2}, rng);
    checks.emplace_back("l1", FiniteDiffCheck([&](auto& t) { return ad::L1Loss(t, p, y); },
                                              {{"pred", p}, {"target", y}}));
  }
  {
    const size_t d = 3, h = 4;
    auto gru = [&] {
      return ad::GruParams<double>{RandomTensor({3 * h, d}, rng, 0.5),
                                   RandomTensor({3 * h, h}, rng, 0.5),
                                   RandomTensor({3 * h}, rng, 0.5), RandomTensor({3 * h}, rng, 0.5)};
    };
    const auto fwd = gru(), bwd = gru();
    const TD x = RandomTensor({2, 5, d}, rng);
    checks.emplace_back(
        "bigru", CheckOp([&](auto& t) { return ad::BidirectionalGru(t, x, fwd, bwd); },
                         {{"x", x}, {"fwd.w_ih", fwd.w_ih}, {"fwd.w_hh", fwd.w_hh},
                          {"fwd.b_ih", fwd.b_ih}, {"fwd.b_hh", fwd.b_hh}, {"bwd.w_ih", bwd.w_ih},
                          {"bwd.w_hh", bwd.w_hh}, {"bwd.b_ih", bwd.b_ih}, {"bwd.b_hh", bwd.b_hh}},
                         rng));
  }
  for (Variant v : {Variant::kDinn, Variant::kDinnEmbedding, Variant::kCrnn}) {
    Model<double> m(ArchitectureConfig::Make(v, Scale::kToy), 11);
    TD x = RandomTensor({2, 8, 14, 513}, rng);
    x.set_requires_grad(false);
    std::vector<double> pv(22);
    for (auto& p : pv) p = Uniform(rng, 0.5, 5.0);
    const TD phi = v == Variant::kCrnn ? TD() : TD({2, 11}, pv, true);
    const TD target({2, 2}, {1.0, 2.0, 3.0, 1.5});
    std::vector<NamedTensor> params;
    for (const auto& p : m.parameters()) params.push_back({p.name, p.tensor});
    if (phi.defined()) params.push_back({"phi", phi});
    GradCheckOptions opts;
    opts.max_coords_per_param = 3;
    opts.seed = 13;
    checks.emplace_back(std::string("model:") + VariantName(v),
                        FiniteDiffCheck(
                            [&](Tape<double>& t) {
                              return ad::L1Loss(t, m.Forward(t, x, phi, true), target);
                            },
                            params, opts));
  }
  double worst = 0.0;
  std::string worst_name;
  size_t skipped = 0;
  bool all_checked = true;
  for (const auto& [name, r] : checks) {
    if (r.max_relative_error >= worst) {
      worst = r.max_relative_error;
      worst_name = name + "/" + r.worst_param;
    }
    skipped += r.skipped_at_kinks;
    all_checked &= r.checked > 0;
  }
  const double secs = Seconds(start);
  return {worst < 1e-4 && all_checked && secs < 120,
          Fmt("%zu checks, worst relative error %.2e at %s (< 1e-4), %zu kink skips, %.1f s "
              "(< 120 s)",
              checks.size(), worst, worst_name.c_str(), skipped, secs)};
}

// --- datasets shared by 6-9 ---------------------------------------------------

// Generates `profile` into `dir` unless an existing manifest there matches a
// fresh sampling of the profile's scenes.
DatasetManifest EnsureDataset(const std::string& profile, const fs::path& dir) {
  const DatasetProfile p = ProfileByName(profile);
  if (fs::exists(dir / "test.jsonl")) {
    const DatasetManifest m = ReadManifest(dir);
    bool fresh = true;
    for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
      const auto scenes = SampleProfileScenes(p, s);
      const auto recs = m.Filter(s).records;
      fresh &= recs.size() == scenes.size();
      for (size_t i = 0; fresh && i < recs.size(); ++i) {
        fresh &= ConfigDistance(recs[i].scene, scenes[i]) == 0.0 &&
                 recs[i].scene.source.x == scenes[i].source.x &&
                 recs[i].scene.room.rt60 == scenes[i].room.rt60;
      }
    }
    if (fresh) return m;
    std::fprintf(stderr, "[acceptance] regenerating stale %s\n", dir.c_str());
  }
  const auto start = Clock::now();
  fs::remove_all(dir);
  DatasetManifest m = GenerateDataset(p, dir);
  std::fprintf(stderr, "[acceptance] generated %s in %.0f s\n", profile.c_str(), Seconds(start));
  return m;
}

struct Context {
  fs::path work;
  bool have_anechoic = false, have_reverberant = false;
  DatasetFeatures anechoic, reverberant;
  ComparisonReport reverberant_runs;
  bool reverberant_done = false;

  const DatasetFeatures& Anechoic() {
    if (!have_anechoic) {
      anechoic = LoadDatasetFeatures(EnsureDataset("toy-anechoic", work / "toy-anechoic"));
      have_anechoic = true;
    }
    return anechoic;
  }
  const DatasetFeatures& Reverberant() {
    if (!have_reverberant) {
      reverberant = LoadDatasetFeatures(EnsureDataset("toy-reverberant", work / "toy-reverberant"));
      have_reverberant = true;
    }
    return reverberant;
  }
  fs::path Cache() const { return work / "checkpoints"; }
};

ComparisonConfig NeuralRuns(const Context& ctx, std::vector<std::string> methods,
                            const std::string& tag) {
  ComparisonConfig cfg;
  cfg.methods = std::move(methods);
  cfg.repeats = kRuns;
  cfg.seed = kSeed;
  cfg.scale = Scale::kToy;
  cfg.train = TrainConfig::Defaults(Scale::kToy);
  cfg.cache_dir = ctx.Cache() / tag;
  cfg.log = &std::cerr;
  return cfg;
}

Outcome ToyComparison(Context& ctx) {
  const auto start = Clock::now();
  const ComparisonReport an = RunComparison(ctx.Anechoic(), NeuralRuns(ctx, {"crnn", "dinn"}, "anechoic"));
  WriteComparison(an, ctx.Anechoic(), ctx.work / "reports" / "anechoic");
  ctx.reverberant_runs =
      RunComparison(ctx.Reverberant(), NeuralRuns(ctx, {"ls", "crnn", "dinn"}, "reverberant"));
  ctx.reverberant_done = true;
  WriteComparison(ctx.reverberant_runs, ctx.Reverberant(), ctx.work / "reports" / "reverberant");
  const double d = an.summary("dinn").mean, c = an.summary("crnn").mean;
  const double rd = ctx.reverberant_runs.summary("dinn").mean;
  const double rl = ctx.reverberant_runs.summary("ls").mean;
  const double rc = ctx.reverberant_runs.summary("crnn").mean;
  // CDF dominance at 15 and 45 cm, reported alongside.
  const auto hd = ComputeHistogram(ctx.reverberant_runs.pooled_errors("dinn"));
  const auto hc = ComputeHistogram(ctx.reverberant_runs.pooled_errors("crnn"));
  const double secs = Seconds(start);
  return {d <= 0.75 * c && rd < rl,
          Fmt("anechoic dinn %.4f m vs crnn %.4f m (ratio %.3f <= 0.75); reverberant dinn %.4f m "
              "vs ls %.4f m (<), crnn %.4f m; reverberant CDF dinn/crnn at 15 cm %.2f/%.2f, at 45 "
              "cm %.2f/%.2f; %.0f s this run",
              d, c, d / c, rd, rl, rc, hd.CdfAt(0.15), hc.CdfAt(0.15), hd.CdfAt(0.45),
              hc.CdfAt(0.45), secs)};
}

Checkpoint ReverberantDinn(Context& ctx) {
  const auto cfg = NeuralRuns(ctx, {"dinn"}, "reverberant");
  const auto& data = ctx.Reverberant();
  TrainConfig train = cfg.train;
  train.seed = kSeed;
  ArchitectureConfig arch = ArchitectureConfig::Make(Variant::kDinn, Scale::kToy);
  arch.num_frames = data.train.frames;
  arch.num_bins = data.train.bins;
  return TrainOrLoad(arch, train, data.train, data.val,
                     cfg.cache_dir / ("dinn-seed" + std::to_string(kSeed) + ".ckpt"), &std::cerr);
}

Outcome Sensitivity(Context& ctx) {
  const auto start = Clock::now();
  Model<float> model = LoadModel(ReverberantDinn(ctx));
  const double levels[] = {0.01, 0.1, 0.5};
  std::vector<PerturbationSpec> specs;
  for (uint64_t s = 0; s < 3; ++s) {
    for (double l : levels) specs.push_back({PerturbTarget::kMicCoords, l, 100 + s});
    specs.push_back({PerturbTarget::kRt60, 0.2, 100 + s});
  }
  const auto t0 = Clock::now();
  const SensitivityReport r = RunSensitivity(model, ctx.Reverberant().test, specs);
  const double eval_secs = Seconds(t0);
  fs::create_directories(ctx.work / "reports");
  WriteSensitivityCsv(r, ctx.work / "reports" / "sensitivity.csv");
  double mic[3] = {0, 0, 0}, rt = 0;
  size_t per_seed_monotone = 0;
  for (size_t s = 0; s < 3; ++s) {
    const auto* row = &r.rows[4 * s];
    for (size_t l = 0; l < 3; ++l) mic[l] += row[l].increase_pct / 3;
    rt += row[3].increase_pct / 3;
    per_seed_monotone += row[0].increase_pct <= row[1].increase_pct &&
                         row[1].increase_pct <= row[2].increase_pct;
  }
  const bool monotone = mic[0] <= mic[1] && mic[1] <= mic[2];
  return {monotone && mic[0] < 5 && mic[2] > 15 && rt < 5 && eval_secs < 600,
          Fmt("increase over 3 seeds: mic 0.01/0.1/0.5 m %+.2f%%/%+.2f%%/%+.2f%% (monotone, < 5, "
              "> 15), rt60 0.2 s %+.2f%% (< 5); monotone in %zu/3 individual seeds; baseline "
              "%.4f m; %.1f s evaluation, %.0f s total",
              mic[0], mic[1], mic[2], rt, per_seed_monotone, r.baseline_error, eval_secs,
              Seconds(start))};
}

Outcome Relevance(Context& ctx) {
  const auto start = Clock::now();
  const auto& data = ctx.Reverberant();
  ArchitectureConfig base = ArchitectureConfig::Make(Variant::kDinn, Scale::kToy);
  base.num_frames = data.train.frames;
  base.num_bins = data.train.bins;
  TrainConfig train = TrainConfig::Defaults(Scale::kToy);
  train.seed = kSeed;
  const fs::path cache = ctx.Cache() / "relevance";
  fs::create_directories(cache);
  // The full-metadata run is the same training as the comparison's first
  // DI-NN run on this dataset.
  const fs::path full = cache / ("relevance-mic+room+rt60-seed" + std::to_string(kSeed) + ".ckpt");
  if (!fs::exists(full)) SaveCheckpoint(ReverberantDinn(ctx), full);
  const auto rows = RunRelevance(data, base, train, cache, &std::cerr);
  WriteRelevanceCsv(rows, ctx.work / "reports" / "relevance.csv");
  bool ok = rows[0].performance_pct == 100.0;
  double rt60_only = 0, min_other = 1e9, min_mic = 1e9, max_nomic = 0;
  std::string table;
  for (const auto& r : rows) {
    ok &= r.error.empty();
    table += Fmt(" %s=%.1f", r.mask.ToString().c_str(), r.performance_pct);
    if (r.mask.mic_coords) {
      min_mic = std::min(min_mic, r.performance_pct);
    } else {
      max_nomic = std::max(max_nomic, r.performance_pct);
    }
    if (r.mask == MetadataMask::Parse("rt60")) {
      rt60_only = r.performance_pct;
    } else {
      min_other = std::min(min_other, r.performance_pct);
    }
  }
  ok &= min_mic >= 90 && max_nomic <= 80 && rt60_only < min_other;
  return {ok, Fmt("performance %%:%s; mic masks >= 90 (min %.1f), others <= 80 (max %.1f), rt60 "
                  "minimum; %.0f s this run",
                  table.c_str(), min_mic, max_nomic, Seconds(start))};
}

Outcome Independence(Context& ctx) {
  const auto start = Clock::now();
  std::string detail;
  bool ok = true;
  for (const char* name : {"toy-anechoic", "toy-reverberant"}) {
    const auto& m = std::string(name) == "toy-anechoic" ? ctx.Anechoic().manifest
                                                        : ctx.Reverberant().manifest;
    const auto r = ComputeIndependence(m.Filter(Split::kTest), m.Filter(Split::kTrain));
    const double min_d = *std::min_element(r.min_distance.begin(), r.min_distance.end());
    ok &= r.independent() && min_d > 0;
    detail += Fmt("%s min D %.4f m mean %.4f m; ", name, min_d, r.mean());
    DatasetManifest test = m.Filter(Split::kTest);
    const DatasetManifest train = m.Filter(Split::kTrain);
    ManifestRecord dup = train.records[17];
    dup.id = "injected-duplicate";
    test.records.push_back(dup);
    const auto inj = ComputeIndependence(test, train);
    const bool flagged = inj.duplicates == std::vector<std::string>{"injected-duplicate"};
    ok &= flagged;
    detail += flagged ? "duplicate flagged; " : "duplicate NOT flagged; ";
  }
  const DatasetProfile full = ProfileByName("anechoic");
  const auto train = SampleProfileScenes(full, Split::kTrain);
  const auto test = SampleProfileScenes(full, Split::kTest);
  std::vector<std::string> ids(test.size());
  const auto r = ComputeIndependence(ids, test, train);
  const bool full_ok = std::abs(r.mean() - 0.3) <= 0.1;
  detail += Fmt("full-scale (%zu/%zu) mean D %.3f m (0.3 +- 0.1)", train.size(), test.size(),
                r.mean());
  return {ok && full_ok, detail + Fmt("; %.1f s", Seconds(start))};
}

Outcome Determinism(Context& ctx) {
  const auto start = Clock::now();
  const fs::path root = ctx.work / "determinism";
  fs::remove_all(root);
  std::vector<std::string> mismatches;
  size_t compared = 0;
  for (const char* run : {"a", "b"}) {
    const fs::path w = root / run;
    const std::string d = (w / "data").string();
    auto cli = [&](std::vector<std::string> args) {
      args.insert(args.begin(), "pssl");
      if (RunCli(args) != kExitOk) throw std::runtime_error("cli failed: " + args[1]);
    };
    cli({"--seed", "21", "generate", "--profile", "toy-reverberant", "--out", d, "--train", "24",
         "--val", "8", "--test", "8"});
    cli({"--seed", "3", "train", "--train", d + "/train.jsonl", "--val", d + "/val.jsonl",
         "--epochs", "2", "--batch-size", "8", "--out", (w / "m.ckpt").string()});
    cli({"eval", "--ckpt", (w / "m.ckpt").string(), "--manifest", d, "--split", "test", "--out",
         (w / "eval.csv").string()});
    cli({"localize-ls", "--manifest", d, "--split", "test", "--out", (w / "ls.csv").string()});
    cli({"heatmap", "--manifest", d, "--id", "test-000000", "--out", (w / "heatmap").string()});
    cli({"sensitivity", "--ckpt", (w / "m.ckpt").string(), "--manifest", d, "--split", "test",
         "--seeds", "2", "--out", (w / "sensitivity.csv").string()});
    cli({"validate-independence", "--data", d, "--out", (w / "independence.csv").string()});
    cli({"histogram", "--errors", (w / "eval.csv").string(), "--out", (w / "hist").string()});
    cli({"--seed", "3", "compare", "--data", d, "--methods", "ls,crnn,dinn,dinn-embedding",
         "--repeats", "2", "--epochs", "1", "--out", (w / "compare").string()});
    cli({"--seed", "3", "relevance", "--data", d, "--epochs", "1", "--out",
         (w / "relevance.csv").string(), "--cache", (w / "relevance").string()});
  }
  for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), root / "a");
    ++compared;
    if (Slurp(e.path()) != Slurp(root / "b" / rel)) mismatches.push_back(rel.string());
  }
  std::string first = mismatches.empty() ? "" : " first mismatch " + mismatches.front();
  return {mismatches.empty() && compared > 0,
          Fmt("%zu files compared across two runs, %zu differ%s; %.0f s", compared,
              mismatches.size(), first.c_str(), Seconds(start))};
}

}  // namespace
}  // namespace pssl

int main(int argc, char** argv) {
  using namespace pssl;
  CLI::App app{"Acceptance run"};
  std::string work = "acceptance-work";
  std::vector<int> only;
  app.add_option("--work", work, "Cache directory for datasets, checkpoints and reports");
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  Context ctx;
  ctx.work = fs::absolute(work);
  fs::create_directories(ctx.work);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gcc-phat oracle", GccPhatOracle},
      {"ls anechoic geometry", LsAnechoicGeometry},
      {"ls reverberation degradation", LsReverberation},
      {"image-source rt60 fidelity", IsmFidelity},
      {"autodiff gradient checks", AutodiffCorrectness},
      {"toy comparison", [&] { return ToyComparison(ctx); }},
      {"metadata sensitivity", [&] { return Sensitivity(ctx); }},
      {"metadata relevance", [&] { return Relevance(ctx); }},
      {"independence validator", [&] { return Independence(ctx); }},
      {"determinism", [&] { return Determinism(ctx); }},
  };
  bool all = true;
  std::vector<std::string> lines;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    all &= o.pass;
    const std::string line = Fmt("criterion %2d %s  %s: ", id, o.pass ? "PASS" : "FAIL",
                                 criteria[i].first) + o.detail;
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    lines.push_back(line);
  }
  std::ofstream summary(ctx.work / "acceptance.txt");
  for (const auto& l : lines) summary << l << "\n";
  return all ? 0 : 1;
}
