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

#include "pssl/scene/dataset.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "pssl/signal/wav.h"

namespace pssl {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

const char* SplitName(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "?";
}

Split ParseSplit(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw std::invalid_argument("unknown split '" + std::string(name) + "'");
}

DatasetProfile ProfileByName(std::string_view name) {
  DatasetProfile p;
  p.name = std::string(name);
  if (name == "anechoic" || name == "toy-anechoic") {
    p.kind = DatasetKind::kAnechoic;
    p.source = SourceKind::kWgn;
  } else if (name == "reverberant" || name == "toy-reverberant") {
    p.kind = DatasetKind::kReverberant;
    p.source = SourceKind::kModulatedNoise;
  } else {
    throw std::invalid_argument("unknown dataset profile '" + std::string(name) +
                                "' (expected anechoic, reverberant, toy-anechoic, "
                                "toy-reverberant)");
  }
  if (name.starts_with("toy-")) {
    p.counts = {2000, 500, 500};
    p.seed = 7;
  } else {
    p.counts = {10000, 2500, 2500};
    p.seed = 1;
  }
  if (p.kind == DatasetKind::kReverberant) p.seed += 1000;
  return p;
}

DatasetManifest DatasetManifest::Filter(Split split) const {
  DatasetManifest out;
  out.base_dir = base_dir;
  for (const auto& r : records) {
    if (r.split == split) out.records.push_back(r);
  }
  return out;
}

uint64_t SampleSeed(uint64_t master_seed, Split split, size_t index) {
  return DeriveSeed(master_seed, {static_cast<uint64_t>(split), static_cast<uint64_t>(index)});
}

Scene SampleProfileScene(const DatasetProfile& profile, uint64_t sample_seed) {
  Rng rng(sample_seed);
  switch (profile.kind) {
    case DatasetKind::kAnechoic:
      return SampleAnechoicScene(rng, profile.ranges);
    case DatasetKind::kReverberant:
      return SampleReverberantScene(rng, profile.ranges);
    case DatasetKind::kRecorded:
      break;
  }
  throw std::invalid_argument("recorded profiles have no scene sampler");
}

std::vector<Scene> SampleProfileScenes(const DatasetProfile& profile, Split split) {
  const size_t n = profile.counts.Get(split);
  std::vector<Scene> scenes;
  scenes.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    scenes.push_back(SampleProfileScene(profile, SampleSeed(profile.seed, split, i)));
  }
  return scenes;
}

namespace {

constexpr double kSpeechFloorDbfs = -35.0;

size_t ExcerptLength(const DatasetProfile& profile) {
  const double n = std::round(profile.duration_s * profile.sample_rate);
  if (!(n >= 1.0)) throw std::invalid_argument("source duration must be positive");
  return static_cast<size_t>(n);
}

// White noise under a slowly varying log-normal envelope with syllable-rate
// components (2-8 Hz), giving bursts and near-pauses like running speech.
MonoSignal ModulatedNoise(size_t n, int rate, Rng& rng) {
  constexpr int kComponents = 4;
  double freq[kComponents];
  double phase[kComponents];
  for (int k = 0; k < kComponents; ++k) {
    freq[k] = Uniform(rng, 2.0, 8.0);
    phase[k] = Uniform(rng, 0.0, 2.0 * std::numbers::pi);
  }
  std::vector<double> x(n);
  for (size_t t = 0; t < n; ++t) {
    const double time = static_cast<double>(t) / rate;
    double log_env = 0.0;
    for (int k = 0; k < kComponents; ++k) {
      log_env += std::sin(2.0 * std::numbers::pi * freq[k] * time + phase[k]);
    }
    x[t] = std::exp(0.6 * log_env) * StandardNormal(rng) * 0.1;
  }
  return MonoSignal(std::move(x), rate);
}

std::vector<fs::path> ListWavs(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw std::runtime_error("wav folder '" + dir.string() + "' does not exist");
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (ext == ".wav") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("wav folder '" + dir.string() + "' is empty");
  return files;
}

double RmsDbfs(std::span<const double> x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  const double rms = std::sqrt(e / static_cast<double>(x.size()));
  return rms > 0.0 ? 20.0 * std::log10(rms) : -std::numeric_limits<double>::infinity();
}

MonoSignal SpeechExcerpt(const DatasetProfile& profile, size_t n, Rng& rng) {
  const auto files = ListWavs(profile.wav_folder);
  constexpr int kAttempts = 64;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    const auto& file = files[rng() % files.size()];
    const MultichannelAudio audio = ReadWav(file, profile.sample_rate);
    const auto& x = audio.channel(0).samples();
    if (x.size() < n) continue;
    const size_t start = static_cast<size_t>(rng() % (x.size() - n + 1));
    std::span<const double> window(x.data() + start, n);
    if (RmsDbfs(window) > kSpeechFloorDbfs) {
      return MonoSignal(std::vector<double>(window.begin(), window.end()), profile.sample_rate);
    }
  }
  throw std::runtime_error("no excerpt above " + std::to_string(kSpeechFloorDbfs) +
                           " dBFS found in '" + profile.wav_folder.string() + "'");
}

}  // namespace

MonoSignal SourceSignal(const DatasetProfile& profile, Rng& rng) {
  const size_t n = ExcerptLength(profile);
  switch (profile.source) {
    case SourceKind::kWgn:
      return WhiteNoise(n, rng, profile.sample_rate);
    case SourceKind::kModulatedNoise:
      return ModulatedNoise(n, profile.sample_rate, rng);
    case SourceKind::kWavFolder:
      return SpeechExcerpt(profile, n, rng);
  }
  throw std::invalid_argument("bad source kind");
}

namespace {

std::string SampleId(Split split, size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s-%06zu", SplitName(split), index);
  return buf;
}

ManifestRecord RenderSample(const DatasetProfile& profile, const fs::path& out_dir, Split split,
                            size_t index) {
  ManifestRecord r;
  r.split = split;
  r.id = SampleId(split, index);
  r.audio = "audio/" + r.id + ".wav";
  r.seed = SampleSeed(profile.seed, split, index);
  r.scene = SampleProfileScene(profile, r.seed);

  Rng source_rng(DeriveSeed(r.seed, {1}));
  const MonoSignal source = SourceSignal(profile, source_rng);
  Rng render_rng(DeriveSeed(r.seed, {2}));
  SimulationOptions opts;
  opts.sample_rate = profile.sample_rate;
  opts.speed_of_sound = profile.speed_of_sound;
  const MultichannelAudio audio = RenderScene(r.scene, source, render_rng, opts);
  WriteWav(out_dir / r.audio, audio, WavFormat::kFloat32);
  return r;
}

}  // namespace

DatasetManifest GenerateDataset(const DatasetProfile& profile, const fs::path& out_dir) {
  if (profile.kind == DatasetKind::kRecorded) {
    throw std::invalid_argument("recorded datasets are ingested, not generated");
  }
  if (profile.source == SourceKind::kWavFolder) ListWavs(profile.wav_folder);
  std::error_code ec;
  fs::create_directories(out_dir / "audio", ec);
  if (ec) throw std::runtime_error("cannot create '" + out_dir.string() + "': " + ec.message());

  struct Job {
    Split split;
    size_t index;
  };
  std::vector<Job> jobs;
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
    for (size_t i = 0; i < profile.counts.Get(s); ++i) jobs.push_back({s, i});
  }

  DatasetManifest manifest;
  manifest.base_dir = out_dir;
  manifest.records.resize(jobs.size());
  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&] {
    for (size_t j = next++; j < jobs.size(); j = next++) {
      try {
        manifest.records[j] = RenderSample(profile, out_dir, jobs[j].split, jobs[j].index);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
        next = jobs.size();
      }
    }
  };
  const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);

  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
    WriteManifest(manifest.Filter(s), out_dir / (std::string(SplitName(s)) + ".jsonl"));
  }
  return manifest;
}

namespace {

Json PointJson(const Point2& p) { return Json::array({p.x, p.y}); }

Point2 PointFromJson(const Json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("point must be [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

Json GeometryJson(const Scene& scene) {
  Json room;
  room["dims"] = Json::array({scene.room.width, scene.room.length});
  room["rt60"] = scene.room.rt60;
  room["height"] = scene.room.height;
  Json mics = Json::array();
  for (const auto& m : scene.mics) mics.push_back(PointJson(m));
  Json j;
  j["room"] = room;
  j["mics"] = mics;
  j["source"] = PointJson(scene.source);
  // JSON has no infinity; a noiseless scene is written as null.
  j["snr_db"] = std::isfinite(scene.snr_db) ? Json(scene.snr_db) : Json(nullptr);
  return j;
}

Scene SceneFromJson(const Json& j) {
  Scene s;
  const Json& room = j.at("room");
  const Json& dims = room.at("dims");
  if (!dims.is_array() || dims.size() != 2) throw std::invalid_argument("room.dims must be [x, y]");
  s.room.width = dims[0].get<double>();
  s.room.length = dims[1].get<double>();
  s.room.rt60 = room.value("rt60", 0.0);
  s.room.height = room.value("height", kRoomHeight);
  for (const auto& m : j.at("mics")) s.mics.push_back(PointFromJson(m));
  s.source = PointFromJson(j.at("source"));
  const Json& snr = j.at("snr_db");
  s.snr_db = snr.is_null() ? kNoiselessSnr : snr.get<double>();
  if (!(s.room.width > 0.0 && s.room.length > 0.0)) {
    throw std::invalid_argument("room dims must be positive");
  }
  for (const auto& m : s.mics) {
    if (!s.room.Contains(m)) throw std::invalid_argument("microphone outside the room");
  }
  if (!s.room.Contains(s.source)) throw std::invalid_argument("source outside the room");
  return s;
}

}  // namespace

std::string ManifestRecordToJson(const ManifestRecord& record) {
  Json j;
  j["id"] = record.id;
  j["split"] = SplitName(record.split);
  j["audio"] = record.audio;
  const Json geometry = GeometryJson(record.scene);
  for (const auto& [k, v] : geometry.items()) j[k] = v;
  j["seed"] = record.seed;
  return j.dump();
}

ManifestRecord ManifestRecordFromJson(std::string_view line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed manifest line: ") + e.what());
  }
  try {
    ManifestRecord r;
    r.id = j.at("id").get<std::string>();
    r.split = ParseSplit(j.value("split", std::string("test")));
    r.audio = j.value("audio", r.id + ".wav");
    r.scene = SceneFromJson(j);
    r.seed = j.value("seed", uint64_t{0});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("bad manifest record: ") + e.what());
  }
}

void WriteManifest(const DatasetManifest& manifest, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  for (const auto& r : manifest.records) out << ManifestRecordToJson(r) << '\n';
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

namespace {

void ReadJsonLines(const fs::path& path, DatasetManifest& manifest) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      manifest.records.push_back(ManifestRecordFromJson(line));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void CheckUniqueIds(const DatasetManifest& manifest) {
  std::vector<std::string> ids;
  for (const auto& r : manifest.records) ids.push_back(r.id);
  std::sort(ids.begin(), ids.end());
  auto dup = std::adjacent_find(ids.begin(), ids.end());
  if (dup != ids.end()) throw std::invalid_argument("duplicate sample id '" + *dup + "'");
}

}  // namespace

DatasetManifest ReadManifest(const fs::path& path) {
  DatasetManifest manifest;
  if (fs::is_directory(path)) {
    manifest.base_dir = path;
    bool any = false;
    for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
      const fs::path p = path / (std::string(SplitName(s)) + ".jsonl");
      if (!fs::exists(p)) continue;
      ReadJsonLines(p, manifest);
      any = true;
    }
    if (!any) throw std::runtime_error("no manifest files in '" + path.string() + "'");
  } else {
    manifest.base_dir = path.parent_path();
    ReadJsonLines(path, manifest);
  }
  CheckUniqueIds(manifest);
  return manifest;
}

DatasetManifest IngestRecorded(const fs::path& dir) {
  const fs::path geometry = dir / "geometry.jsonl";
  if (!fs::exists(geometry)) {
    throw std::runtime_error("missing geometry file '" + geometry.string() + "'");
  }
  DatasetManifest manifest;
  ReadJsonLines(geometry, manifest);
  manifest.base_dir = dir;
  CheckUniqueIds(manifest);
  for (auto& r : manifest.records) {
    r.audio = r.id + ".wav";
    r.seed = 0;
    const fs::path audio_path = dir / r.audio;
    if (!fs::exists(audio_path)) {
      throw std::runtime_error("missing recording '" + audio_path.string() + "'");
    }
    const MultichannelAudio audio = ReadWav(audio_path, kCanonicalSampleRate);
    if (audio.num_channels() != r.scene.mics.size()) {
      throw std::invalid_argument("recording '" + r.id + "' has " +
                                  std::to_string(audio.num_channels()) + " channels but " +
                                  std::to_string(r.scene.mics.size()) + " microphones");
    }
  }
  return manifest;
}

}  // namespace pssl
