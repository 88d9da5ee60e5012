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

#include "pssl/signal/fft.h"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <utility>

namespace pssl {
namespace {

struct PlanPair {
  fftw_plan forward;
  fftw_plan inverse;
};

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

template <typename T>
std::unique_ptr<T[], FftwFree> AllocateAligned(size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
  if (p == nullptr) throw std::bad_alloc();
  return std::unique_ptr<T[], FftwFree>(p);
}

// FFTW planning is not thread-safe; execution with new-array functions is.
std::mutex& PlannerMutex() {
  static std::mutex mu;
  return mu;
}

PlanPair GetPlans(int n) {
  static std::map<int, PlanPair>* cache = new std::map<int, PlanPair>();
  std::lock_guard<std::mutex> lock(PlannerMutex());
  auto it = cache->find(n);
  if (it != cache->end()) return it->second;
  auto real = AllocateAligned<double>(n);
  auto cplx = AllocateAligned<fftw_complex>(n / 2 + 1);
  PlanPair plans;
  plans.forward = fftw_plan_dft_r2c_1d(n, real.get(), cplx.get(), FFTW_ESTIMATE);
  plans.inverse = fftw_plan_dft_c2r_1d(n, cplx.get(), real.get(),
                                       FFTW_ESTIMATE | FFTW_DESTROY_INPUT);
  if (plans.forward == nullptr || plans.inverse == nullptr) {
    throw std::runtime_error("FFTW planning failed");
  }
  cache->emplace(n, plans);
  return plans;
}

}  // namespace

RealFft::RealFft(int size) : size_(size) {
  if (size < 2 || size % 2 != 0) {
    throw std::invalid_argument("RealFft size must be even and >= 2");
  }
  const PlanPair plans = GetPlans(size);
  forward_plan_ = plans.forward;
  inverse_plan_ = plans.inverse;
}

std::vector<std::complex<double>> RealFft::Forward(
    std::span<const double> input) const {
  if (input.size() > static_cast<size_t>(size_)) {
    throw std::invalid_argument("RealFft::Forward input longer than transform");
  }
  auto real = AllocateAligned<double>(size_);
  auto cplx = AllocateAligned<fftw_complex>(num_bins());
  std::copy(input.begin(), input.end(), real.get());
  std::fill(real.get() + input.size(), real.get() + size_, 0.0);
  fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_plan_), real.get(), cplx.get());
  std::vector<std::complex<double>> out(num_bins());
  for (int k = 0; k < num_bins(); ++k) out[k] = {cplx[k][0], cplx[k][1]};
  return out;
}

std::vector<double> RealFft::Inverse(
    std::span<const std::complex<double>> spectrum) const {
  if (spectrum.size() != static_cast<size_t>(num_bins())) {
    throw std::invalid_argument("RealFft::Inverse expects size/2+1 bins");
  }
  auto real = AllocateAligned<double>(size_);
  auto cplx = AllocateAligned<fftw_complex>(num_bins());
  for (int k = 0; k < num_bins(); ++k) {
    cplx[k][0] = spectrum[k].real();
    cplx[k][1] = spectrum[k].imag();
  }
  fftw_execute_dft_c2r(static_cast<fftw_plan>(inverse_plan_), cplx.get(), real.get());
  return std::vector<double>(real.get(), real.get() + size_);
}

int NextPowerOfTwo(int n) {
  int p = 2;
  while (p < n) p *= 2;
  return p;
}

std::vector<double> FftConvolve(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) return {};
  const size_t out_len = a.size() + b.size() - 1;
  const RealFft fft(NextPowerOfTwo(static_cast<int>(out_len)));
  auto fa = fft.Forward(a);
  const auto fb = fft.Forward(b);
  for (size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
  std::vector<double> full = fft.Inverse(fa);
  full.resize(out_len);
  const double scale = 1.0 / fft.size();
  for (double& v : full) v *= scale;
  return full;
}

}  // namespace pssl
