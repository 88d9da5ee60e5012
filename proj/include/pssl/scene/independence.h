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

#ifndef PSSL_SCENE_INDEPENDENCE_H_
#define PSSL_SCENE_INDEPENDENCE_H_

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pssl/room/room.h"
#include "pssl/scene/dataset.h"

namespace pssl {

// Four microphones in north, south, east, west order. Construction checks the
// order against the room geometry and throws std::invalid_argument on a
// mismatch.
struct WallOrderedMics {
  std::array<Point2, 4> mics;

  explicit WallOrderedMics(const Scene& scene);
};

// Sum over the four wall-matched microphones of their planar distances.
double ConfigDistance(const Scene& a, const Scene& b);
double ConfigDistance(const WallOrderedMics& a, const WallOrderedMics& b);

// Minimum ConfigDistance from `test` to any training scene. Throws on an
// empty training set.
double MinConfigDistance(const Scene& test, std::span<const Scene> train);

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  size_t count = 0;
};

struct IndependenceReport {
  std::vector<std::string> ids;
  std::vector<double> min_distance;
  std::vector<HistogramBin> histogram;
  std::vector<std::string> duplicates;  // ids with D(i) == 0

  bool independent() const { return duplicates.empty(); }
  double mean() const;
};

IndependenceReport ComputeIndependence(const DatasetManifest& test,
                                       const DatasetManifest& train,
                                       double bin_width = 0.05);
IndependenceReport ComputeIndependence(std::span<const std::string> test_ids,
                                       std::span<const Scene> test,
                                       std::span<const Scene> train,
                                       double bin_width = 0.05);

// Writes the histogram to `path` (bin_lo,bin_hi,count) and per-sample values
// to the sibling "<stem>.samples.csv" (id,min_distance,duplicate).
void WriteIndependenceReport(const IndependenceReport& report,
                             const std::filesystem::path& path);

}  // namespace pssl

#endif  // PSSL_SCENE_INDEPENDENCE_H_
