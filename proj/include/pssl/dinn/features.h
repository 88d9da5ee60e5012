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

#ifndef PSSL_DINN_FEATURES_H_
#define PSSL_DINN_FEATURES_H_

#include <span>
#include <string>
#include <vector>

#include "pssl/room/room.h"
#include "pssl/scene/dataset.h"
#include "pssl/scene/metadata.h"

namespace pssl {

struct FeatureOptions {
  int n_dft = 1024;
  int hop = 512;
  size_t num_threads = 0;  // 0: hardware concurrency
};

// Real/imaginary STFT stacks of a whole split, held in memory as float.
struct FeatureSet {
  size_t channels = 0;
  size_t frames = 0;
  size_t bins = 0;
  std::vector<float> x;  // [N, channels, frames, bins]
  std::vector<Scene> scenes;
  std::vector<std::string> ids;

  size_t size() const { return ids.size(); }
  size_t sample_size() const { return channels * frames * bins; }
  std::span<const float> sample(size_t i) const {
    return std::span<const float>(x).subspan(i * sample_size(), sample_size());
  }
};

// Reads every record's audio and stacks its channels' spectra. Output order
// follows the manifest regardless of the thread count. Throws
// std::runtime_error on unreadable audio and std::invalid_argument when
// records disagree in channel count or length.
FeatureSet LoadFeatures(const DatasetManifest& manifest, const FeatureOptions& options = {});

FeatureSet Subset(const FeatureSet& set, std::span<const size_t> indices);

// Row-major [N, mask.Dimension(M)] metadata of each scene.
std::vector<float> MetadataMatrix(std::span<const Scene> scenes, const MetadataMask& mask);

}  // namespace pssl

#endif  // PSSL_DINN_FEATURES_H_
