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

#include "pssl/tdoa/tdoa.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>

#include "pssl/signal/fft.h"

namespace pssl {

double TheoreticalTdoa(const Point2& mi, const Point2& mj, const Point2& p,
                       double speed_of_sound) {
  if (!(speed_of_sound > 0.0)) throw std::invalid_argument("speed of sound must be positive");
  return (Distance(mi, p) - Distance(mj, p)) / speed_of_sound;
}

double GccPhat(const MonoSignal& yi, const MonoSignal& yj, int max_lag, bool interpolate) {
  if (yi.size() != yj.size() || yi.sample_rate() != yj.sample_rate()) {
    throw std::invalid_argument("GCC-PHAT inputs differ in length or sample rate");
  }
  const size_t n = yi.size();
  if (max_lag < 0 || static_cast<size_t>(max_lag) > n / 2) {
    throw std::invalid_argument("max_lag must lie in [0, length / 2]");
  }
  if (yi.energy() == 0.0 || yj.energy() == 0.0) {
    throw std::invalid_argument("GCC-PHAT input has zero energy");
  }

  // Zero padding to 2n keeps the correlation linear rather than circular.
  const int size = NextPowerOfTwo(static_cast<int>(2 * n));
  const RealFft fft(size);
  const auto a = fft.Forward(yi.samples());
  const auto b = fft.Forward(yj.samples());
  std::vector<std::complex<double>> cross(a.size());
  double peak = 0.0;
  for (size_t k = 0; k < a.size(); ++k) {
    cross[k] = a[k] * std::conj(b[k]);
    peak = std::max(peak, std::abs(cross[k]));
  }
  const double eps = 1e-12 * peak;
  for (auto& c : cross) c /= std::abs(c) + eps;
  const std::vector<double> r = fft.Inverse(cross);

  auto value = [&](int lag) { return r[static_cast<size_t>((lag % size + size) % size)]; };
  int best = -max_lag;
  for (int lag = -max_lag + 1; lag <= max_lag; ++lag) {
    if (value(lag) > value(best)) best = lag;
  }
  double lag = best;
  if (interpolate) {
    const double left = value(best - 1);
    const double mid = value(best);
    const double right = value(best + 1);
    const double denom = left - 2.0 * mid + right;
    if (denom < 0.0) lag += std::clamp(0.5 * (left - right) / denom, -0.5, 0.5);
  }
  return lag / yi.sample_rate();
}

void TdoaSet::Set(size_t i, size_t j, double seconds) {
  if (i >= num_mics_ || j >= num_mics_) throw std::out_of_range("microphone index");
  tau_[i * num_mics_ + j] = seconds;
  tau_[j * num_mics_ + i] = -seconds;
}

TdoaSet PairwiseTdoas(const MultichannelAudio& audio, std::span<const Point2> mics,
                      double speed_of_sound, bool interpolate) {
  const size_t m = audio.num_channels();
  if (m < 2) throw std::invalid_argument("TDOA estimation needs at least two microphones");
  if (mics.size() != m) throw std::invalid_argument("channel and microphone counts differ");
  TdoaSet set(m);
  const double fs = audio.sample_rate();
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = i + 1; j < m; ++j) {
      const double bound = Distance(mics[i], mics[j]) / speed_of_sound * fs + 2.0;
      const int max_lag = std::min(static_cast<int>(bound), static_cast<int>(audio.length() / 2));
      set.Set(i, j, GccPhat(audio.channel(i), audio.channel(j), max_lag, interpolate));
    }
  }
  return set;
}

size_t GridNodes(double extent, double resolution) {
  return static_cast<size_t>(std::floor(extent / resolution + 1e-9)) + 1;
}

ErrorGrid ComputeErrorGrid(const TdoaSet& tdoas, std::span<const Point2> mics, double width,
                           double length, double resolution, double speed_of_sound,
                           unsigned num_threads) {
  if (!(resolution > 0.0)) throw std::invalid_argument("grid resolution must be positive");
  if (!(width > 0.0 && length > 0.0)) throw std::invalid_argument("room dims must be positive");
  if (resolution > width || resolution > length) {
    throw std::invalid_argument("grid resolution exceeds the room size");
  }
  if (mics.size() != tdoas.num_mics()) {
    throw std::invalid_argument("TDOA set and microphone counts differ");
  }
  ErrorGrid grid;
  grid.resolution = resolution;
  grid.nx = GridNodes(width, resolution);
  grid.ny = GridNodes(length, resolution);
  grid.cells.assign(grid.nx * grid.ny, 0.0);

  const size_t m = mics.size();
  auto row = [&](size_t iy) {
    std::vector<double> dist(m);
    for (size_t ix = 0; ix < grid.nx; ++ix) {
      const Point2 p = grid.node(ix, iy);
      for (size_t k = 0; k < m; ++k) dist[k] = Distance(mics[k], p);
      double e = 0.0;
      for (size_t i = 0; i < m; ++i) {
        for (size_t j = 0; j < m; ++j) {
          if (i == j) continue;
          const double d = (dist[i] - dist[j]) / speed_of_sound - tdoas.at(i, j);
          e += d * d;
        }
      }
      grid.cells[iy * grid.nx + ix] = e;
    }
  };

  unsigned workers = num_threads ? num_threads : std::thread::hardware_concurrency();
  workers = std::clamp(workers, 1u, static_cast<unsigned>(grid.ny));
  if (workers == 1) {
    for (size_t iy = 0; iy < grid.ny; ++iy) row(iy);
    return grid;
  }
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (size_t iy = w; iy < grid.ny; iy += workers) row(iy);
    });
  }
  for (auto& t : pool) t.join();
  return grid;
}

LsEstimate EstimateSource(const ErrorGrid& grid) {
  if (grid.cells.empty()) throw std::invalid_argument("empty error grid");
  const auto it = std::min_element(grid.cells.begin(), grid.cells.end());
  const size_t idx = static_cast<size_t>(it - grid.cells.begin());
  LsEstimate est;
  est.position = grid.node(idx % grid.nx, idx / grid.nx);
  est.min_error = *it;

  std::vector<double> sorted = grid.cells;
  const size_t mid = sorted.size() / 2;
  std::nth_element(sorted.begin(), sorted.begin() + mid, sorted.end());
  double median = sorted[mid];
  if (sorted.size() % 2 == 0) {
    median = 0.5 * (median + *std::max_element(sorted.begin(), sorted.begin() + mid));
  }
  est.peak_sharpness = median > 0.0 ? est.min_error / median : 1.0;
  return est;
}

LsResult LocalizeLs(const MultichannelAudio& audio, const Scene& scene,
                    const LsOptions& options) {
  const TdoaSet tdoas =
      PairwiseTdoas(audio, scene.mics, options.speed_of_sound, options.interpolate);
  LsResult result;
  result.grid = ComputeErrorGrid(tdoas, scene.mics, scene.room.width, scene.room.length,
                                 options.resolution, options.speed_of_sound);
  result.estimate = EstimateSource(result.grid);
  return result;
}

namespace {

std::filesystem::path WithSuffix(const std::filesystem::path& stem, const char* ext) {
  std::filesystem::path p = stem;
  p += ext;
  return p;
}

// Dark blue through teal to yellow.
std::string Colour(double t) {
  static constexpr double kStops[3][3] = {{68, 1, 84}, {33, 145, 140}, {253, 231, 37}};
  t = std::clamp(t, 0.0, 1.0) * 2.0;
  const int seg = std::min(1, static_cast<int>(t));
  const double f = t - seg;
  char buf[8];
  int rgb[3];
  for (int c = 0; c < 3; ++c) {
    rgb[c] = static_cast<int>(std::lround(kStops[seg][c] * (1 - f) + kStops[seg + 1][c] * f));
  }
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
  return buf;
}

void WriteSvg(const ErrorGrid& grid, const std::filesystem::path& path) {
  // Blocks of cells are drawn at their minimum so large grids stay small and
  // the minimum stays visible.
  constexpr size_t kMaxCells = 200;
  const size_t block = (std::max(grid.nx, grid.ny) + kMaxCells - 1) / kMaxCells;
  const size_t bx = (grid.nx + block - 1) / block;
  const size_t by = (grid.ny + block - 1) / block;
  std::vector<double> mins(bx * by, std::numeric_limits<double>::infinity());
  for (size_t iy = 0; iy < grid.ny; ++iy) {
    for (size_t ix = 0; ix < grid.nx; ++ix) {
      double& v = mins[(iy / block) * bx + ix / block];
      v = std::min(v, grid.at(ix, iy));
    }
  }
  const double lo = *std::min_element(grid.cells.begin(), grid.cells.end());
  const double hi = *std::max_element(grid.cells.begin(), grid.cells.end());
  const double floor = std::max(hi * 1e-6, std::numeric_limits<double>::min());
  const double log_lo = std::log10(std::max(lo, floor));
  const double log_hi = std::log10(std::max(hi, floor));

  constexpr int kPx = 3;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << bx * kPx << "\" height=\""
      << by * kPx << "\" shape-rendering=\"crispEdges\">\n";
  for (size_t y = 0; y < by; ++y) {
    for (size_t x = 0; x < bx; ++x) {
      const double v = std::log10(std::max(mins[y * bx + x], floor));
      const double t = log_hi > log_lo ? (v - log_lo) / (log_hi - log_lo) : 0.0;
      // SVG y grows downward; north (large y) is drawn at the top.
      out << "<rect x=\"" << x * kPx << "\" y=\"" << (by - 1 - y) * kPx << "\" width=\"" << kPx
          << "\" height=\"" << kPx << "\" fill=\"" << Colour(t) << "\"/>\n";
    }
  }
  const LsEstimate est = EstimateSource(grid);
  const double cx = (est.position.x - grid.origin_x) / grid.resolution / block * kPx + kPx / 2.0;
  const double cy = (by - 1 - (est.position.y - grid.origin_y) / grid.resolution / block) * kPx +
                    kPx / 2.0;
  out << "<circle cx=\"" << cx << "\" cy=\"" << cy
      << "\" r=\"5\" fill=\"none\" stroke=\"red\" stroke-width=\"2\"/>\n</svg>\n";
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

}  // namespace

void ExportHeatmap(const ErrorGrid& grid, const std::filesystem::path& stem) {
  if (grid.cells.empty()) throw std::invalid_argument("empty error grid");
  const auto csv = WithSuffix(stem, ".csv");
  std::ofstream out(csv);
  if (!out) throw std::runtime_error("cannot write '" + csv.string() + "'");
  out.precision(17);
  out << "# origin_x=" << grid.origin_x << " origin_y=" << grid.origin_y
      << " resolution=" << grid.resolution << " nx=" << grid.nx << " ny=" << grid.ny << '\n';
  for (size_t iy = 0; iy < grid.ny; ++iy) {
    for (size_t ix = 0; ix < grid.nx; ++ix) {
      if (ix) out << ',';
      out << grid.at(ix, iy);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + csv.string() + "'");
  WriteSvg(grid, WithSuffix(stem, ".svg"));
}

ErrorGrid ReadHeatmapCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::string header;
  std::getline(in, header);
  ErrorGrid grid;
  if (std::sscanf(header.c_str(), "# origin_x=%lf origin_y=%lf resolution=%lf nx=%zu ny=%zu",
                  &grid.origin_x, &grid.origin_y, &grid.resolution, &grid.nx, &grid.ny) != 5) {
    throw std::invalid_argument("bad heatmap header in '" + path.string() + "'");
  }
  std::string line;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) grid.cells.push_back(std::stod(cell));
  }
  if (grid.cells.size() != grid.nx * grid.ny) {
    throw std::invalid_argument("heatmap cell count does not match its header");
  }
  return grid;
}

}  // namespace pssl
