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

#ifndef PSSL_SCENE_DATASET_H_
#define PSSL_SCENE_DATASET_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "pssl/room/room.h"
#include "pssl/scene/sampling.h"
#include "pssl/signal/signal.h"

namespace pssl {

enum class DatasetKind { kAnechoic, kReverberant, kRecorded };
enum class SourceKind { kWgn, kModulatedNoise, kWavFolder };
enum class Split { kTrain = 0, kVal = 1, kTest = 2 };

const char* SplitName(Split split);
Split ParseSplit(std::string_view name);

struct SplitCounts {
  size_t train = 0;
  size_t val = 0;
  size_t test = 0;

  size_t Get(Split s) const { return s == Split::kTrain ? train : s == Split::kVal ? val : test; }
};

struct DatasetProfile {
  std::string name;
  DatasetKind kind = DatasetKind::kAnechoic;
  SplitCounts counts;
  uint64_t seed = 0;
  SceneRanges ranges;
  SourceKind source = SourceKind::kWgn;
  std::filesystem::path wav_folder;
  double duration_s = 0.5;
  int sample_rate = kCanonicalSampleRate;
  double speed_of_sound = kSpeedOfSound;
};

// "anechoic", "reverberant" (full scale 10000/2500/2500) and "toy-anechoic",
// "toy-reverberant" (2000/500/500). Throws std::invalid_argument otherwise.
DatasetProfile ProfileByName(std::string_view name);

struct ManifestRecord {
  std::string id;
  Split split = Split::kTrain;
  std::string audio;  // relative to the manifest's directory
  Scene scene;
  uint64_t seed = 0;
};

struct DatasetManifest {
  std::filesystem::path base_dir;
  std::vector<ManifestRecord> records;

  std::filesystem::path AudioPath(const ManifestRecord& r) const { return base_dir / r.audio; }
  DatasetManifest Filter(Split split) const;
};

// Per-sample seed: hash(master seed, split, index).
uint64_t SampleSeed(uint64_t master_seed, Split split, size_t index);

// Scene of one sample, drawn from the sample seed alone (no rendering).
Scene SampleProfileScene(const DatasetProfile& profile, uint64_t sample_seed);

// Scenes of a whole split without rendering audio.
std::vector<Scene> SampleProfileScenes(const DatasetProfile& profile, Split split);

// Source excerpt of profile.duration_s for one sample.
MonoSignal SourceSignal(const DatasetProfile& profile, Rng& rng);

// Renders every sample, writes out_dir/audio/<id>.wav (float32, M channels)
// and out_dir/{train,val,test}.jsonl. Returns all records.
DatasetManifest GenerateDataset(const DatasetProfile& profile,
                                const std::filesystem::path& out_dir);

// JSON-lines manifest I/O. One record per line:
// {id, split, audio, room:{dims,rt60,height}, mics:[[x,y],...], source:[x,y], snr_db, seed}
void WriteManifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest ReadManifest(const std::filesystem::path& path);
std::string ManifestRecordToJson(const ManifestRecord& record);
ManifestRecord ManifestRecordFromJson(std::string_view line);

// Builds a manifest from recorded audio: `dir` holds geometry.jsonl (manifest
// schema minus audio and seed) and one <id>.wav per row at the canonical rate.
DatasetManifest IngestRecorded(const std::filesystem::path& dir);

}  // namespace pssl

#endif  // PSSL_SCENE_DATASET_H_
