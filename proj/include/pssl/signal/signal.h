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

#ifndef PSSL_SIGNAL_SIGNAL_H_
#define PSSL_SIGNAL_SIGNAL_H_

#include <complex>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "pssl/signal/random.h"

namespace pssl {

inline constexpr int kCanonicalSampleRate = 16000;

// Passing this as snr_db disables sensor noise.
inline constexpr double kNoiselessSnr = std::numeric_limits<double>::infinity();

class MonoSignal {
 public:
  MonoSignal() = default;
  // Throws std::invalid_argument on a non-positive rate or non-finite samples.
  MonoSignal(std::vector<double> samples, int sample_rate);

  std::span<const double> samples() const { return samples_; }
  std::span<double> mutable_samples() { return samples_; }
  int sample_rate() const { return sample_rate_; }
  size_t size() const { return samples_.size(); }
  double energy() const;

 private:
  std::vector<double> samples_;
  int sample_rate_ = kCanonicalSampleRate;
};

class MultichannelAudio {
 public:
  MultichannelAudio() = default;
  // All channels must share length and sample rate.
  explicit MultichannelAudio(std::vector<MonoSignal> channels);

  size_t num_channels() const { return channels_.size(); }
  size_t length() const { return channels_.empty() ? 0 : channels_[0].size(); }
  int sample_rate() const {
    return channels_.empty() ? kCanonicalSampleRate : channels_[0].sample_rate();
  }
  const MonoSignal& channel(size_t i) const { return channels_.at(i); }
  MonoSignal& mutable_channel(size_t i) { return channels_.at(i); }
  const std::vector<MonoSignal>& channels() const { return channels_; }

 private:
  std::vector<MonoSignal> channels_;
};

enum class Window { kHann, kRectangular };

// Complex STFT, frames x bins, row-major.
struct Spectrogram {
  size_t num_frames = 0;
  size_t num_bins = 0;
  int n_dft = 0;
  int hop = 0;
  int sample_rate = kCanonicalSampleRate;
  std::vector<std::complex<double>> bins;

  std::complex<double> at(size_t frame, size_t bin) const {
    return bins[frame * num_bins + bin];
  }
};

// Real parts of the M spectrograms in channels [0, M), imaginary parts in
// [M, 2M). Layout is [channel][frame][bin].
struct RealImagTensor {
  size_t num_channels = 0;
  size_t num_frames = 0;
  size_t num_bins = 0;
  std::vector<double> values;

  double at(size_t c, size_t l, size_t f) const {
    return values[(c * num_frames + l) * num_bins + f];
  }
};

// Frames are taken without edge padding: L = 1 + floor((T - n_dft) / hop).
size_t NumStftFrames(size_t signal_length, int n_dft, int hop);

Spectrogram Stft(const MonoSignal& signal, int n_dft, int hop,
                 Window window = Window::kHann);

// Time-domain energy recovered from one frame via Parseval on the one-sided
// spectrum: (|X_0|^2 + |X_{N/2}|^2 + 2 sum_{0<k<N/2} |X_k|^2) / N.
double FrameEnergyFromSpectrum(const Spectrogram& spec, size_t frame);

RealImagTensor StackRealImag(std::span<const Spectrogram> specs);

// Inverse of StackRealImag.
std::vector<Spectrogram> UnstackRealImag(const RealImagTensor& tensor,
                                         int n_dft, int hop, int sample_rate);

MonoSignal WhiteNoise(size_t length, Rng& rng,
                      int sample_rate = kCanonicalSampleRate);

// Adds independent white Gaussian noise to every channel, scaled so that the
// realized per-channel energy ratio equals snr_db. kNoiselessSnr returns the
// input unchanged.
MultichannelAudio AddNoiseAtSnr(const MultichannelAudio& clean, double snr_db,
                                Rng& rng);

double SnrDb(std::span<const double> signal, std::span<const double> noise);

}  // namespace pssl

#endif  // PSSL_SIGNAL_SIGNAL_H_
