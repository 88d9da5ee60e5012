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

#include "pssl/dinn/features.h"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "pssl/signal/signal.h"
#include "pssl/signal/wav.h"

namespace pssl {

FeatureSet LoadFeatures(const DatasetManifest& manifest, const FeatureOptions& options) {
  FeatureSet set;
  const size_t n = manifest.records.size();
  if (n == 0) return set;
  std::vector<RealImagTensor> stacks(n);
  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto work = [&] {
    for (size_t i = next++; i < n; i = next++) {
      try {
        const ManifestRecord& r = manifest.records[i];
        const MultichannelAudio audio = ReadWav(manifest.AudioPath(r));
        std::vector<Spectrogram> specs;
        for (const auto& ch : audio.channels()) specs.push_back(Stft(ch, options.n_dft, options.hop));
        stacks[i] = StackRealImag(specs);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  size_t threads = options.num_threads ? options.num_threads
                                       : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  std::vector<std::thread> pool;
  for (size_t t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);

  set.channels = stacks[0].num_channels;
  set.frames = stacks[0].num_frames;
  set.bins = stacks[0].num_bins;
  set.x.reserve(n * set.sample_size());
  for (size_t i = 0; i < n; ++i) {
    const RealImagTensor& s = stacks[i];
    if (s.num_channels != set.channels || s.num_frames != set.frames || s.num_bins != set.bins) {
      throw std::invalid_argument("record '" + manifest.records[i].id + "' has features [" +
                                  std::to_string(s.num_channels) + ", " +
                                  std::to_string(s.num_frames) + ", " +
                                  std::to_string(s.num_bins) + "], expected [" +
                                  std::to_string(set.channels) + ", " +
                                  std::to_string(set.frames) + ", " + std::to_string(set.bins) +
                                  "]");
    }
    for (double v : s.values) set.x.push_back(static_cast<float>(v));
    stacks[i] = {};
    set.scenes.push_back(manifest.records[i].scene);
    set.ids.push_back(manifest.records[i].id);
  }
  return set;
}

FeatureSet Subset(const FeatureSet& set, std::span<const size_t> indices) {
  FeatureSet out;
  out.channels = set.channels;
  out.frames = set.frames;
  out.bins = set.bins;
  out.x.reserve(indices.size() * set.sample_size());
  for (size_t i : indices) {
    if (i >= set.size()) throw std::invalid_argument("subset index out of range");
    const auto s = set.sample(i);
    out.x.insert(out.x.end(), s.begin(), s.end());
    out.scenes.push_back(set.scenes[i]);
    out.ids.push_back(set.ids[i]);
  }
  return out;
}

std::vector<float> MetadataMatrix(std::span<const Scene> scenes, const MetadataMask& mask) {
  std::vector<float> out;
  for (const Scene& s : scenes) {
    for (double v : BuildMetadataVector(s, mask).values) out.push_back(static_cast<float>(v));
  }
  return out;
}

}  // namespace pssl
