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

#ifndef PSSL_AUTODIFF_GRADCHECK_H_
#define PSSL_AUTODIFF_GRADCHECK_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pssl/autodiff/tensor.h"

namespace pssl {

struct NamedTensor {
  std::string name;
  Tensor<double> tensor;
};

struct GradCheckOptions {
  double relative_step = 1e-4;  // h = relative_step * max(1, |theta|)
  // Denominator floor of the relative error, so exact zeros compare cleanly.
  double error_floor = 1e-6;
  // Coordinates checked per parameter; 0 checks all of them.
  size_t max_coords_per_param = 0;
  uint64_t seed = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_param;
  size_t worst_index = 0;
  size_t checked = 0;
  // Coordinates whose perturbation crossed a ReLU/L1 kink even at the
  // smallest step; a central difference is meaningless there.
  size_t skipped_at_kinks = 0;
};

// Compares analytic gradients of the scalar returned by `f` with central
// differences (f(theta + h) - f(theta - h)) / 2h. `f` builds its graph on the
// given tape and must be deterministic. A coordinate whose +-h evaluations
// land on different kink branches is retried with h / 10 (down to 1e-4 of
// the initial step) before being skipped.
GradCheckReport FiniteDiffCheck(const std::function<Tensor<double>(Tape<double>&)>& f,
                                std::vector<NamedTensor> params,
                                const GradCheckOptions& options = {});

}  // namespace pssl

#endif  // PSSL_AUTODIFF_GRADCHECK_H_
