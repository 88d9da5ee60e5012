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

#ifndef PSSL_TDOA_TDOA_H_
#define PSSL_TDOA_TDOA_H_

#include <filesystem>
#include <span>
#include <vector>

#include "pssl/room/room.h"
#include "pssl/signal/signal.h"

namespace pssl {

// (|m_i - p| - |m_j - p|) / c. Positive when microphone i is farther from p.
double TheoreticalTdoa(const Point2& mi, const Point2& mj, const Point2& p,
                       double speed_of_sound = kSpeedOfSound);

// GCC-PHAT delay of yi relative to yj in seconds: positive when yi lags yj,
// matching TheoreticalTdoa. The peak is searched over [-max_lag, max_lag]
// samples; `interpolate` adds a three-point parabolic refinement. Throws
// std::invalid_argument on mismatched inputs, max_lag > length / 2 or a
// zero-energy input.
double GccPhat(const MonoSignal& yi, const MonoSignal& yj, int max_lag,
               bool interpolate = true);

// Measured TDOAs of all ordered pairs; tau(j, i) = -tau(i, j).
class TdoaSet {
 public:
  explicit TdoaSet(size_t num_mics) : num_mics_(num_mics), tau_(num_mics * num_mics, 0.0) {}

  size_t num_mics() const { return num_mics_; }
  double at(size_t i, size_t j) const { return tau_[i * num_mics_ + j]; }
  // Sets tau(i, j) and tau(j, i) = -value.
  void Set(size_t i, size_t j, double seconds);

 private:
  size_t num_mics_;
  std::vector<double> tau_;
};

// GCC-PHAT on every pair i < j with max_lag = |m_i - m_j| / c * fs + 2.
TdoaSet PairwiseTdoas(const MultichannelAudio& audio, std::span<const Point2> mics,
                      double speed_of_sound = kSpeedOfSound, bool interpolate = true);

// E(p) on the nodes (ix * res, iy * res), ix in [0, nx), iy in [0, ny),
// stored row-major with rows along y.
struct ErrorGrid {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double resolution = 0.0;
  size_t nx = 0;
  size_t ny = 0;
  std::vector<double> cells;

  double at(size_t ix, size_t iy) const { return cells[iy * nx + ix]; }
  Point2 node(size_t ix, size_t iy) const {
    return {origin_x + ix * resolution, origin_y + iy * resolution};
  }
};

// Nodes per axis: floor(extent / resolution) + 1.
size_t GridNodes(double extent, double resolution);

// Sum over ordered pairs i != j of (tau_ij(p) - measured_ij)^2, in s^2, on a
// grid covering [0, width] x [0, length]. Rows are evaluated on `num_threads`
// workers (0 = hardware concurrency); the result does not depend on it.
ErrorGrid ComputeErrorGrid(const TdoaSet& tdoas, std::span<const Point2> mics, double width,
                           double length, double resolution,
                           double speed_of_sound = kSpeedOfSound, unsigned num_threads = 0);

struct LsEstimate {
  Point2 position;
  double min_error = 0.0;
  // min / median of the grid; 1 for a flat grid.
  double peak_sharpness = 1.0;
};

// Argmin node, first in row-major order on ties.
LsEstimate EstimateSource(const ErrorGrid& grid);

struct LsOptions {
  double resolution = 0.02;
  double speed_of_sound = kSpeedOfSound;
  bool interpolate = true;
};

struct LsResult {
  LsEstimate estimate;
  ErrorGrid grid;
};

LsResult LocalizeLs(const MultichannelAudio& audio, const Scene& scene,
                    const LsOptions& options = {});

// Writes <stem>.csv (header row, then ny rows of nx cells) and <stem>.svg.
void ExportHeatmap(const ErrorGrid& grid, const std::filesystem::path& stem);
ErrorGrid ReadHeatmapCsv(const std::filesystem::path& path);

}  // namespace pssl

#endif  // PSSL_TDOA_TDOA_H_
