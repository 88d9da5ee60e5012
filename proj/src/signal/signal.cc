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

#include "pssl/signal/signal.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

#include "pssl/signal/fft.h"

namespace pssl {

MonoSignal::MonoSignal(std::vector<double> samples, int sample_rate)
    : samples_(std::move(samples)), sample_rate_(sample_rate) {
  if (sample_rate_ <= 0) throw std::invalid_argument("sample_rate must be > 0");
  for (double v : samples_) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite sample");
  }
}

double MonoSignal::energy() const {
  double e = 0.0;
  for (double v : samples_) e += v * v;
  return e;
}

MultichannelAudio::MultichannelAudio(std::vector<MonoSignal> channels)
    : channels_(std::move(channels)) {
  for (const MonoSignal& ch : channels_) {
    if (ch.size() != channels_[0].size() ||
        ch.sample_rate() != channels_[0].sample_rate()) {
      throw std::invalid_argument("channels differ in length or sample rate");
    }
  }
}

size_t NumStftFrames(size_t signal_length, int n_dft, int hop) {
  if (n_dft <= 0 || hop <= 0) throw std::invalid_argument("n_dft and hop must be > 0");
  if (signal_length < static_cast<size_t>(n_dft)) {
    throw std::invalid_argument("signal shorter than one STFT frame (" +
                                std::to_string(signal_length) + " < " +
                                std::to_string(n_dft) + ")");
  }
  return 1 + (signal_length - n_dft) / hop;
}

Spectrogram Stft(const MonoSignal& signal, int n_dft, int hop, Window window) {
  Spectrogram spec;
  spec.num_frames = NumStftFrames(signal.size(), n_dft, hop);
  spec.num_bins = n_dft / 2 + 1;
  spec.n_dft = n_dft;
  spec.hop = hop;
  spec.sample_rate = signal.sample_rate();
  spec.bins.resize(spec.num_frames * spec.num_bins);

  // Periodic Hann.
  std::vector<double> win(n_dft, 1.0);
  if (window == Window::kHann) {
    for (int n = 0; n < n_dft; ++n) {
      win[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / n_dft);
    }
  }

  const RealFft fft(n_dft);
  std::vector<double> frame(n_dft);
  const auto x = signal.samples();
  for (size_t l = 0; l < spec.num_frames; ++l) {
    const size_t start = l * hop;
    for (int n = 0; n < n_dft; ++n) frame[n] = x[start + n] * win[n];
    const auto bins = fft.Forward(frame);
    std::copy(bins.begin(), bins.end(), spec.bins.begin() + l * spec.num_bins);
  }
  return spec;
}

double FrameEnergyFromSpectrum(const Spectrogram& spec, size_t frame) {
  const size_t last = spec.num_bins - 1;
  double sum = 0.0;
  for (size_t k = 0; k < spec.num_bins; ++k) {
    const double w = (k == 0 || k == last) ? 1.0 : 2.0;
    sum += w * std::norm(spec.at(frame, k));
  }
  return sum / spec.n_dft;
}

RealImagTensor StackRealImag(std::span<const Spectrogram> specs) {
  if (specs.empty()) throw std::invalid_argument("StackRealImag: no spectrograms");
  const Spectrogram& ref = specs[0];
  for (const Spectrogram& s : specs) {
    if (s.num_frames != ref.num_frames || s.num_bins != ref.num_bins) {
      throw std::invalid_argument("StackRealImag: spectrogram shape mismatch");
    }
  }
  const size_t m = specs.size();
  const size_t plane = ref.num_frames * ref.num_bins;
  RealImagTensor out;
  out.num_channels = 2 * m;
  out.num_frames = ref.num_frames;
  out.num_bins = ref.num_bins;
  out.values.resize(out.num_channels * plane);
  for (size_t c = 0; c < m; ++c) {
    for (size_t i = 0; i < plane; ++i) {
      out.values[c * plane + i] = specs[c].bins[i].real();
      out.values[(m + c) * plane + i] = specs[c].bins[i].imag();
    }
  }
  return out;
}

std::vector<Spectrogram> UnstackRealImag(const RealImagTensor& tensor, int n_dft,
                                         int hop, int sample_rate) {
  if (tensor.num_channels % 2 != 0) {
    throw std::invalid_argument("UnstackRealImag: odd channel count");
  }
  const size_t m = tensor.num_channels / 2;
  const size_t plane = tensor.num_frames * tensor.num_bins;
  std::vector<Spectrogram> specs(m);
  for (size_t c = 0; c < m; ++c) {
    Spectrogram& s = specs[c];
    s.num_frames = tensor.num_frames;
    s.num_bins = tensor.num_bins;
    s.n_dft = n_dft;
    s.hop = hop;
    s.sample_rate = sample_rate;
    s.bins.resize(plane);
    for (size_t i = 0; i < plane; ++i) {
      s.bins[i] = {tensor.values[c * plane + i], tensor.values[(m + c) * plane + i]};
    }
  }
  return specs;
}

MonoSignal WhiteNoise(size_t length, Rng& rng, int sample_rate) {
  if (length == 0) throw std::invalid_argument("WhiteNoise: length must be > 0");
  std::vector<double> x(length);
  for (double& v : x) v = StandardNormal(rng);
  return MonoSignal(std::move(x), sample_rate);
}

double SnrDb(std::span<const double> signal, std::span<const double> noise) {
  double es = 0.0, en = 0.0;
  for (double v : signal) es += v * v;
  for (double v : noise) en += v * v;
  return 10.0 * std::log10(es / en);
}

MultichannelAudio AddNoiseAtSnr(const MultichannelAudio& clean, double snr_db,
                                Rng& rng) {
  if (std::isinf(snr_db) && snr_db > 0) return clean;
  if (std::isnan(snr_db)) throw std::invalid_argument("AddNoiseAtSnr: NaN snr");
  std::vector<MonoSignal> noisy;
  noisy.reserve(clean.num_channels());
  for (const MonoSignal& ch : clean.channels()) {
    const double es = ch.energy();
    if (!(es > 0.0)) {
      throw std::invalid_argument("AddNoiseAtSnr: zero-energy channel");
    }
    const MonoSignal noise = WhiteNoise(ch.size(), rng, ch.sample_rate());
    const double scale = std::sqrt(es / (noise.energy() * std::pow(10.0, snr_db / 10.0)));
    std::vector<double> y(ch.samples().begin(), ch.samples().end());
    for (size_t t = 0; t < y.size(); ++t) y[t] += scale * noise.samples()[t];
    noisy.emplace_back(std::move(y), ch.sample_rate());
  }
  return MultichannelAudio(std::move(noisy));
}

}  // namespace pssl
