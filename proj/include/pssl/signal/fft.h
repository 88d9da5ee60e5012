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

#ifndef PSSL_SIGNAL_FFT_H_
#define PSSL_SIGNAL_FFT_H_

#include <complex>
#include <span>
#include <vector>

namespace pssl {

// Thin wrapper over FFTW real transforms. Plans are created once per size
// under a lock and then executed on caller-owned buffers, so concurrent use
// from several threads is safe.
class RealFft {
 public:
  explicit RealFft(int size);

  int size() const { return size_; }
  int num_bins() const { return size_ / 2 + 1; }

  // input.size() <= size(); shorter inputs are zero-padded.
  std::vector<std::complex<double>> Forward(std::span<const double> input) const;
  // Unnormalized inverse (FFTW convention): Inverse(Forward(x)) = size() * x.
  std::vector<double> Inverse(std::span<const std::complex<double>> spectrum) const;

 private:
  int size_;
  void* forward_plan_;
  void* inverse_plan_;
};

int NextPowerOfTwo(int n);

// Linear convolution through the FFT; output length a.size() + b.size() - 1.
std::vector<double> FftConvolve(std::span<const double> a, std::span<const double> b);

}  // namespace pssl

#endif  // PSSL_SIGNAL_FFT_H_
