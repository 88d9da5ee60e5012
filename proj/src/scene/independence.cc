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

#include "pssl/scene/independence.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "pssl/scene/sampling.h"

namespace pssl {

WallOrderedMics::WallOrderedMics(const Scene& scene) {
  if (scene.mics.size() != 4) {
    throw std::invalid_argument("wall-matched distance needs exactly 4 microphones, got " +
                                std::to_string(scene.mics.size()));
  }
  const Room& room = scene.room;
  for (size_t k = 0; k < 4; ++k) {
    const Point2& p = scene.mics[k];
    const double d[4] = {room.length - p.y, p.y, room.width - p.x, p.x};
    const double own = d[k];
    // Corner placements tie between two walls; either assignment is accepted.
    if (own > *std::min_element(d, d + 4) + 1e-9) {
      throw std::invalid_argument(std::string("microphone ") + std::to_string(k + 1) +
                                  " is not nearest the " + WallName(kWallOrder[k]) + " wall");
    }
    mics[k] = p;
  }
}

double ConfigDistance(const WallOrderedMics& a, const WallOrderedMics& b) {
  double d = 0.0;
  for (size_t k = 0; k < 4; ++k) d += Distance(a.mics[k], b.mics[k]);
  return d;
}

double ConfigDistance(const Scene& a, const Scene& b) {
  return ConfigDistance(WallOrderedMics(a), WallOrderedMics(b));
}

double MinConfigDistance(const Scene& test, std::span<const Scene> train) {
  if (train.empty()) throw std::invalid_argument("training set is empty");
  const WallOrderedMics t(test);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : train) best = std::min(best, ConfigDistance(t, WallOrderedMics(s)));
  return best;
}

double IndependenceReport::mean() const {
  if (min_distance.empty()) return 0.0;
  return std::accumulate(min_distance.begin(), min_distance.end(), 0.0) /
         static_cast<double>(min_distance.size());
}

IndependenceReport ComputeIndependence(std::span<const std::string> test_ids,
                                       std::span<const Scene> test,
                                       std::span<const Scene> train, double bin_width) {
  if (test.empty()) throw std::invalid_argument("test set is empty");
  if (train.empty()) throw std::invalid_argument("training set is empty");
  if (test_ids.size() != test.size()) throw std::invalid_argument("id/scene count mismatch");
  if (!(bin_width > 0.0)) throw std::invalid_argument("bin width must be positive");

  std::vector<WallOrderedMics> train_mics;
  train_mics.reserve(train.size());
  for (const auto& s : train) train_mics.emplace_back(s);

  IndependenceReport report;
  report.ids.assign(test_ids.begin(), test_ids.end());
  report.min_distance.reserve(test.size());
  for (size_t i = 0; i < test.size(); ++i) {
    const WallOrderedMics t(test[i]);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : train_mics) best = std::min(best, ConfigDistance(t, s));
    report.min_distance.push_back(best);
    if (best == 0.0) report.duplicates.push_back(report.ids[i]);
  }

  const double max_d = *std::max_element(report.min_distance.begin(), report.min_distance.end());
  const size_t bins = static_cast<size_t>(std::floor(max_d / bin_width)) + 1;
  for (size_t b = 0; b < bins; ++b) {
    report.histogram.push_back({b * bin_width, (b + 1) * bin_width, 0});
  }
  for (double d : report.min_distance) {
    ++report.histogram[std::min(bins - 1, static_cast<size_t>(std::floor(d / bin_width)))].count;
  }
  return report;
}

IndependenceReport ComputeIndependence(const DatasetManifest& test, const DatasetManifest& train,
                                       double bin_width) {
  std::vector<std::string> ids;
  std::vector<Scene> test_scenes;
  std::vector<Scene> train_scenes;
  for (const auto& r : test.records) {
    ids.push_back(r.id);
    test_scenes.push_back(r.scene);
  }
  for (const auto& r : train.records) train_scenes.push_back(r.scene);
  return ComputeIndependence(ids, test_scenes, train_scenes, bin_width);
}

void WriteIndependenceReport(const IndependenceReport& report,
                             const std::filesystem::path& path) {
  std::ofstream hist(path);
  if (!hist) throw std::runtime_error("cannot write '" + path.string() + "'");
  hist << "bin_lo,bin_hi,count\n";
  for (const auto& b : report.histogram) hist << b.lo << ',' << b.hi << ',' << b.count << '\n';

  std::filesystem::path samples = path;
  samples.replace_filename(path.stem().string() + ".samples.csv");
  std::ofstream out(samples);
  if (!out) throw std::runtime_error("cannot write '" + samples.string() + "'");
  out.precision(17);
  out << "id,min_distance,duplicate\n";
  for (size_t i = 0; i < report.ids.size(); ++i) {
    out << report.ids[i] << ',' << report.min_distance[i] << ','
        << (report.min_distance[i] == 0.0 ? 1 : 0) << '\n';
  }
}

}  // namespace pssl
