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

#ifndef PSSL_AUTODIFF_ADAM_H_
#define PSSL_AUTODIFF_ADAM_H_

#include <cstdint>
#include <span>
#include <vector>

#include "pssl/autodiff/tensor.h"

namespace pssl {

template <typename T>
struct AdamState {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t step = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
};

// One bias-corrected Adam update of every parameter from its accumulated
// gradient. Moments are created on the first call; afterwards their shapes
// must match the parameters (std::invalid_argument otherwise).
template <typename T>
void AdamStep(std::span<Tensor<T>> params, AdamState<T>& state);

}  // namespace pssl

#endif  // PSSL_AUTODIFF_ADAM_H_
