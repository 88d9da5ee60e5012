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

#include "pssl/autodiff/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "pssl/signal/random.h"

namespace pssl {

GradCheckReport FiniteDiffCheck(const std::function<Tensor<double>(Tape<double>&)>& f,
                                std::vector<NamedTensor> params,
                                const GradCheckOptions& options) {
  for (auto& p : params) {
    p.tensor.set_requires_grad(true);
    p.tensor.mutable_grad();
    p.tensor.ZeroGrad();
  }
  Tape<double> tape;
  tape.set_track_kinks(true);
  const Tensor<double> loss = f(tape);
  const uint64_t base_kinks = tape.kink_signature();
  tape.Backward(loss);

  auto eval = [&f](uint64_t* kinks) {
    Tape<double> t(false);
    t.set_track_kinks(true);
    const double v = f(t).item();
    *kinks = t.kink_signature();
    return v;
  };

  GradCheckReport report;
  Rng rng(options.seed);
  for (auto& p : params) {
    const std::vector<double> analytic(p.tensor.grad().begin(), p.tensor.grad().end());
    std::vector<size_t> coords(p.tensor.size());
    std::iota(coords.begin(), coords.end(), size_t{0});
    if (options.max_coords_per_param && coords.size() > options.max_coords_per_param) {
      for (size_t i = 0; i < options.max_coords_per_param; ++i) {
        std::swap(coords[i], coords[i + rng() % (coords.size() - i)]);
      }
      coords.resize(options.max_coords_per_param);
      std::sort(coords.begin(), coords.end());
    }
    auto values = p.tensor.mutable_value();
    for (size_t idx : coords) {
      const double theta = values[idx];
      const double h0 = options.relative_step * std::max(1.0, std::abs(theta));
      bool ok = false;
      double numeric = 0.0;
      for (double h = h0; h >= h0 * 1e-4 * 0.999; h *= 0.1) {
        uint64_t kp = 0, km = 0;
        values[idx] = theta + h;
        const double fp = eval(&kp);
        values[idx] = theta - h;
        const double fm = eval(&km);
        values[idx] = theta;
        if (kp == base_kinks && km == base_kinks) {
          numeric = (fp - fm) / (2.0 * h);
          ok = true;
          break;
        }
      }
      if (!ok) {
        ++report.skipped_at_kinks;
        continue;
      }
      const double a = analytic[idx];
      const double err =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), options.error_floor});
      ++report.checked;
      if (err > report.max_relative_error || report.worst_param.empty()) {
        report.max_relative_error = std::max(report.max_relative_error, err);
        if (err >= report.max_relative_error) {
          report.worst_param = p.name;
          report.worst_index = idx;
        }
      }
    }
  }
  return report;
}

}  // namespace pssl
