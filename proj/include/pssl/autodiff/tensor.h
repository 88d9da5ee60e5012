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

#ifndef PSSL_AUTODIFF_TENSOR_H_
#define PSSL_AUTODIFF_TENSOR_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace pssl {

using Shape = std::vector<size_t>;

size_t NumElements(const Shape& shape);
std::string ShapeString(const Shape& shape);

template <typename T>
struct TensorData {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // allocated on first use
  bool requires_grad = false;
};

// Shared handle to a dense row-major array. Copies alias the same storage.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  // Throws std::invalid_argument if values.size() does not match the shape.
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);
  static Tensor Zeros(Shape shape, bool requires_grad = false);
  static Tensor Scalar(T v, bool requires_grad = false);

  bool defined() const { return d_ != nullptr; }
  const Shape& shape() const { return d_->shape; }
  size_t rank() const { return d_->shape.size(); }
  size_t dim(size_t axis) const { return d_->shape.at(axis); }
  size_t size() const { return d_->value.size(); }
  bool requires_grad() const { return d_->requires_grad; }
  void set_requires_grad(bool v) { d_->requires_grad = v; }

  std::span<const T> value() const { return d_->value; }
  std::span<T> mutable_value() { return d_->value; }
  T item() const;

  bool has_grad() const { return !d_->grad.empty(); }
  // Zero-filled when not yet accumulated.
  std::span<const T> grad() const;
  // Handles are shallow: a const handle still accumulates into shared storage.
  std::span<T> mutable_grad() const;
  void ZeroGrad();

  TensorData<T>* data() const { return d_.get(); }
  const std::shared_ptr<TensorData<T>>& shared() const { return d_; }

 private:
  std::shared_ptr<TensorData<T>> d_;
};

// Records backward closures in creation order, which is a topological order
// of the graph. Backward runs them once in reverse.
template <typename T>
class Tape {
 public:
  // With record == false ops build no graph and outputs never require grad.
  explicit Tape(bool record = true);

  bool recording() const { return record_; }
  void Record(std::function<void()> backward);
  size_t size() const { return ops_.size(); }

  // Seeds d(loss)/d(loss) = 1 and accumulates into every tensor that requires
  // grad. `loss` must hold one element. Throws std::logic_error on a second
  // call before Reset().
  void Backward(const Tensor<T>& loss);
  void Reset();

  // Scans every op output for NaN/Inf and throws std::runtime_error naming
  // the op. On by default in debug builds.
  bool check_finite() const { return check_finite_; }
  void set_check_finite(bool v) { check_finite_ = v; }

  // Hash of the branch taken at every kink (ReLU, L1), maintained only while
  // tracking is on. Two evaluations with equal signatures lie on the same
  // smooth piece.
  bool track_kinks() const { return track_kinks_; }
  void set_track_kinks(bool v) { track_kinks_ = v; }
  uint64_t kink_signature() const { return kink_; }
  void MixKink(uint64_t h);

 private:
  bool record_;
  bool consumed_ = false;
  bool check_finite_;
  bool track_kinks_ = false;
  uint64_t kink_ = 0;
  std::vector<std::function<void()>> ops_;
};

namespace ad {

// x: [N, C, H, W] (or [C, H, W]), w: [K, C, kh, kw], b: [K]. Cross-correlation
// with `padding` zeros on each border: output [N, K, H + 2p - kh + 1, ...].
template <typename T>
Tensor<T> Conv2d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                 int padding = 0);

// Mean over non-overlapping 2x2 blocks of the last two axes; a trailing odd
// row or column is dropped.
template <typename T>
Tensor<T> AvgPool2d(Tape<T>& tape, const Tensor<T>& x);

// Arithmetic mean over `axis`; the axis is removed from the shape.
template <typename T>
Tensor<T> MeanOverAxis(Tape<T>& tape, const Tensor<T>& x, size_t axis);

// Exchanges two axes.
template <typename T>
Tensor<T> SwapAxes(Tape<T>& tape, const Tensor<T>& x, size_t a, size_t b);

// max(x, 0); the derivative at 0 is 0.
template <typename T>
Tensor<T> Relu(Tape<T>& tape, const Tensor<T>& x);

template <typename T>
struct BatchNormParams {
  Tensor<T> gamma;  // [C]
  Tensor<T> beta;   // [C]
  std::vector<T> running_mean;
  std::vector<T> running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  explicit BatchNormParams(size_t channels = 0);
};

// Per-channel normalization over every axis except 1. Training mode uses the
// batch statistics (biased variance) and updates the running ones (unbiased
// variance); evaluation mode uses the running statistics. Throws
// std::invalid_argument for N < 2 in training mode.
template <typename T>
Tensor<T> BatchNorm(Tape<T>& tape, const Tensor<T>& x, BatchNormParams<T>& bn, bool training);

// x: [N, D_in] or [D_in], w: [D_out, D_in], b: [D_out].
template <typename T>
Tensor<T> Linear(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

// Concatenation along the last axis; leading axes must agree.
template <typename T>
Tensor<T> Concat(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

// One GRU direction: w_ih [3H, D], w_hh [3H, H], b_ih [3H], b_hh [3H], gate
// rows ordered reset, update, candidate.
template <typename T>
struct GruParams {
  Tensor<T> w_ih;
  Tensor<T> w_hh;
  Tensor<T> b_ih;
  Tensor<T> b_hh;

  size_t hidden() const { return w_hh.dim(1); }
  size_t input() const { return w_ih.dim(1); }
};

// x: [N, L, D] (or [L, D]) -> [N, L, 2H]. From h_0 = 0:
//   r = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
//   z = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
//   n = tanh(W_in x + b_in + r * (W_hn h + b_hn))
//   h' = (1 - z) * n + z * h
// The backward direction runs on the reversed sequence and its outputs are
// re-reversed so step t holds [forward_t, backward_t].
template <typename T>
Tensor<T> BidirectionalGru(Tape<T>& tape, const Tensor<T>& x, const GruParams<T>& fwd,
                           const GruParams<T>& bwd);

// Mean over the batch of sum_k |pred_k - target_k|; pred and target [N, D] or
// [D]. The derivative at 0 is 0. `target` receives gradient too when it
// requires it.
template <typename T>
Tensor<T> L1Loss(Tape<T>& tape, const Tensor<T>& pred, const Tensor<T>& target);

template <typename T>
Tensor<T> Sum(Tape<T>& tape, const Tensor<T>& x);

// sum_i x_i w_i with constant weights; a random projection to a scalar for
// gradient checks.
template <typename T>
Tensor<T> WeightedSum(Tape<T>& tape, const Tensor<T>& x, std::span<const T> weights);

}  // namespace ad
}  // namespace pssl

#endif  // PSSL_AUTODIFF_TENSOR_H_
