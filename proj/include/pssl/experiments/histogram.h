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

#ifndef PSSL_EXPERIMENTS_HISTOGRAM_H_
#define PSSL_EXPERIMENTS_HISTOGRAM_H_

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace pssl {

// Equal-width bins [i w, (i + 1) w) from 0. The last bin is closed so the
// largest value always lands somewhere.
struct ErrorHistogram {
  double bin_width = 0.15;
  std::vector<size_t> counts;
  size_t total = 0;

  size_t num_bins() const { return counts.size(); }
  double lower(size_t i) const { return static_cast<double>(i) * bin_width; }
  double upper(size_t i) const { return static_cast<double>(i + 1) * bin_width; }
  double fraction(size_t i) const;
  // Fraction of values below upper(i).
  double cdf(size_t i) const;
  // Fraction of values strictly below `x` when x is a bin edge; otherwise the
  // CDF at the last edge not above x.
  double CdfAt(double x) const;
};

// Bins cover [0, max(max value, range)] where `range` is typically the room
// diagonal. Throws std::invalid_argument on empty input, a non-positive bin
// width or a negative or non-finite value.
ErrorHistogram ComputeHistogram(std::span<const double> errors, double bin_width = 0.15,
                                double range = 0.0);

// bin_lo,bin_hi,count,fraction,cdf
void WriteHistogramCsv(const ErrorHistogram& hist, const std::filesystem::path& path);

struct HistogramSeries {
  std::string label;
  ErrorHistogram hist;
};

// Side-by-side normalised bars (top) and step CDFs (bottom). Series must
// share a bin width; shorter ones are padded with empty bins.
void WriteHistogramSvg(std::span<const HistogramSeries> series, const std::filesystem::path& path);

}  // namespace pssl

#endif  // PSSL_EXPERIMENTS_HISTOGRAM_H_
