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

#include "pssl/experiments/histogram.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace pssl {

double ErrorHistogram::fraction(size_t i) const {
  return total ? static_cast<double>(counts.at(i)) / static_cast<double>(total) : 0.0;
}

double ErrorHistogram::cdf(size_t i) const {
  size_t s = 0;
  for (size_t k = 0; k <= i && k < counts.size(); ++k) s += counts[k];
  return total ? static_cast<double>(s) / static_cast<double>(total) : 0.0;
}

double ErrorHistogram::CdfAt(double x) const {
  const double edges = std::floor(x / bin_width + 1e-9);
  if (edges < 1.0) return 0.0;
  return cdf(static_cast<size_t>(edges) - 1);
}

ErrorHistogram ComputeHistogram(std::span<const double> errors, double bin_width, double range) {
  if (errors.empty()) throw std::invalid_argument("histogram of no errors");
  if (!(bin_width > 0.0)) throw std::invalid_argument("histogram bin width must be positive");
  double hi = range;
  for (double e : errors) {
    if (!std::isfinite(e) || e < 0.0) {
      throw std::invalid_argument("histogram values must be finite and non-negative");
    }
    hi = std::max(hi, e);
  }
  ErrorHistogram h;
  h.bin_width = bin_width;
  const size_t bins = std::max<size_t>(1, static_cast<size_t>(std::ceil(hi / bin_width - 1e-9)));
  h.counts.assign(bins, 0);
  for (double e : errors) {
    const size_t i = std::min(bins - 1, static_cast<size_t>(std::floor(e / bin_width)));
    ++h.counts[i];
  }
  h.total = errors.size();
  return h;
}

void WriteHistogramCsv(const ErrorHistogram& hist, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "bin_lo,bin_hi,count,fraction,cdf\n";
  char buf[160];
  for (size_t i = 0; i < hist.num_bins(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.6g,%.6g,%zu,%.9g,%.9g\n", hist.lower(i), hist.upper(i),
                  hist.counts[i], hist.fraction(i), hist.cdf(i));
    out << buf;
  }
}

void WriteHistogramSvg(std::span<const HistogramSeries> series, const std::filesystem::path& path) {
  if (series.empty()) throw std::invalid_argument("no histogram series");
  size_t bins = 0;
  double peak = 0.0;
  for (const auto& s : series) {
    if (std::abs(s.hist.bin_width - series[0].hist.bin_width) > 1e-12) {
      throw std::invalid_argument("histogram series differ in bin width");
    }
    bins = std::max(bins, s.hist.num_bins());
    for (size_t i = 0; i < s.hist.num_bins(); ++i) peak = std::max(peak, s.hist.fraction(i));
  }
  if (peak <= 0.0) peak = 1.0;
  const double w = 640, left = 50, top = 20, plot_w = w - left - 20, plot_h = 160, gap = 50;
  const double h = top + 2 * plot_h + gap + 40;
  const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                "font-family=\"sans-serif\" font-size=\"11\">\n",
                w, h);
  out << buf << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const double bin_px = plot_w / static_cast<double>(bins);
  const double bar_px = bin_px / static_cast<double>(series.size());
  const double base1 = top + plot_h, base2 = top + 2 * plot_h + gap;
  for (double base : {base1, base2}) {
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n", left,
                  base, left + plot_w, base);
    out << buf;
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n", left,
                  base - plot_h, left, base);
    out << buf;
  }
  for (size_t s = 0; s < series.size(); ++s) {
    const auto& hist = series[s].hist;
    const char* c = colours[s % 5];
    for (size_t i = 0; i < hist.num_bins(); ++i) {
      const double bh = hist.fraction(i) / peak * plot_h;
      std::snprintf(buf, sizeof(buf),
                    "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"%s\"/>\n",
                    left + i * bin_px + s * bar_px, base1 - bh, bar_px, bh, c);
      out << buf;
    }
    out << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
    double prev = 0.0;
    for (size_t i = 0; i < bins; ++i) {
      const double cdf = i < hist.num_bins() ? hist.cdf(i) : 1.0;
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f %.2f,%.2f ", left + i * bin_px,
                    base2 - prev * plot_h, left + (i + 1) * bin_px, base2 - cdf * plot_h);
      out << buf;
      prev = cdf;
    }
    out << "\"/>\n";
    std::snprintf(buf, sizeof(buf), "<text x=\"%.1f\" y=\"%.1f\" fill=\"%s\">%s</text>\n",
                  left + plot_w - 120, top + 12 + 14 * s, c, series[s].label.c_str());
    out << buf;
  }
  const size_t step = std::max<size_t>(1, bins / 10);
  for (size_t i = 0; i <= bins; i += step) {
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%.2f</text>\n",
                  left + i * bin_px, base2 + 14, static_cast<double>(i) * series[0].hist.bin_width);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">error (m)</text>\n"
                "<text x=\"4\" y=\"%.1f\">fraction</text>\n<text x=\"4\" y=\"%.1f\">CDF</text>\n",
                left + plot_w / 2, base2 + 30, top + 10, base1 + gap);
  out << buf << "</svg>\n";
}

}  // namespace pssl
