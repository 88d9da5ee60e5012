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

#ifndef PSSL_SIGNAL_RANDOM_H_
#define PSSL_SIGNAL_RANDOM_H_

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace pssl {

// Every randomized operation takes one of these explicitly; there is no
// global generator.
using Rng = std::mt19937_64;

// splitmix64 finalizer.
constexpr uint64_t MixSeed(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives a child seed from a master seed and a list of integer tags, e.g.
// (master, split, index). Distinct tag lists give unrelated streams.
inline uint64_t DeriveSeed(uint64_t master, std::initializer_list<uint64_t> tags) {
  uint64_t h = MixSeed(master);
  for (uint64_t t : tags) h = MixSeed(h ^ MixSeed(t + 0x632be59bd9b4e019ULL));
  return h;
}

// Standard normal draw via Box-Muller on two 53-bit uniforms. Used instead
// of std::normal_distribution so sequences do not depend on the standard
// library implementation.
inline double StandardNormal(Rng& rng) {
  constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
  double u1 = 0.0;
  while (u1 <= 0.0) u1 = static_cast<double>(rng() >> 11) * kScale;
  const double u2 = static_cast<double>(rng() >> 11) * kScale;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

// Uniform draw in [lo, hi).
inline double Uniform(Rng& rng, double lo, double hi) {
  constexpr double kScale = 1.0 / 9007199254740992.0;
  return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * kScale);
}

}  // namespace pssl

#endif  // PSSL_SIGNAL_RANDOM_H_
