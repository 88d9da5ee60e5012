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

#include "pssl/autodiff/adam.h"

#include <cmath>
#include <stdexcept>

namespace pssl {

template <typename T>
void AdamStep(std::span<Tensor<T>> params, AdamState<T>& state) {
  if (state.m.empty() && state.v.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), T(0));
      state.v.emplace_back(p.size(), T(0));
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw std::invalid_argument("Adam state holds " + std::to_string(state.m.size()) +
                                " moments for " + std::to_string(params.size()) + " parameters");
  }
  for (size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].size() != params[i].size() || state.v[i].size() != params[i].size()) {
      throw std::invalid_argument("Adam moment " + std::to_string(i) + " does not match " +
                                  ShapeString(params[i].shape()));
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(state.beta1);
  const T b2 = static_cast<T>(state.beta2);
  const T step_size = static_cast<T>(state.lr / c1);
  const T inv_sqrt_c2 = static_cast<T>(1.0 / std::sqrt(c2));
  const T eps = static_cast<T>(state.eps);
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = params[i];
    const auto g = p.grad();
    auto x = p.mutable_value();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (size_t k = 0; k < x.size(); ++k) {
      m[k] = b1 * m[k] + (T(1) - b1) * g[k];
      v[k] = b2 * v[k] + (T(1) - b2) * g[k] * g[k];
      x[k] -= step_size * m[k] / (std::sqrt(v[k]) * inv_sqrt_c2 + eps);
    }
  }
}

template void AdamStep(std::span<Tensor<float>>, AdamState<float>&);
template void AdamStep(std::span<Tensor<double>>, AdamState<double>&);

}  // namespace pssl
