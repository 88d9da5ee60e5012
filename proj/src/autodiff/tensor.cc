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

#include "pssl/autodiff/tensor.h"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace pssl {

size_t NumElements(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), size_t{1}, std::multiplies<>());
}

std::string ShapeString(const Shape& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values, bool requires_grad)
    : d_(std::make_shared<TensorData<T>>()) {
  if (NumElements(shape) != values.size()) {
    throw std::invalid_argument("tensor of shape " + ShapeString(shape) + " given " +
                                std::to_string(values.size()) + " values");
  }
  d_->shape = std::move(shape);
  d_->value = std::move(values);
  d_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T> Tensor<T>::Zeros(Shape shape, bool requires_grad) {
  const size_t n = NumElements(shape);
  return Tensor(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::Scalar(T v, bool requires_grad) {
  return Tensor(Shape{}, std::vector<T>{v}, requires_grad);
}

template <typename T>
T Tensor<T>::item() const {
  if (size() != 1) throw std::invalid_argument("item() on a tensor of shape " + ShapeString(shape()));
  return d_->value[0];
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
  if (d_->grad.empty()) d_->grad.assign(d_->value.size(), T(0));
  return d_->grad;
}

template <typename T>
std::span<T> Tensor<T>::mutable_grad() const {
  if (d_->grad.empty()) d_->grad.assign(d_->value.size(), T(0));
  return d_->grad;
}

template <typename T>
void Tensor<T>::ZeroGrad() {
  std::fill(d_->grad.begin(), d_->grad.end(), T(0));
}

namespace {

#ifdef NDEBUG
constexpr bool kDefaultCheckFinite = false;
#else
constexpr bool kDefaultCheckFinite = true;
#endif

}  // namespace

template <typename T>
Tape<T>::Tape(bool record) : record_(record), check_finite_(kDefaultCheckFinite) {}

template <typename T>
void Tape<T>::Record(std::function<void()> backward) {
  if (consumed_) throw std::logic_error("tape already ran backward; call Reset() first");
  ops_.push_back(std::move(backward));
}

template <typename T>
void Tape<T>::Backward(const Tensor<T>& loss) {
  if (consumed_) throw std::logic_error("backward called twice on the same tape");
  if (!loss.defined() || loss.size() != 1) {
    throw std::invalid_argument("backward needs a scalar loss");
  }
  consumed_ = true;
  if (!loss.requires_grad()) return;
  Tensor<T> l = loss;
  l.mutable_grad()[0] += T(1);
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

template <typename T>
void Tape<T>::Reset() {
  ops_.clear();
  consumed_ = false;
  kink_ = 0;
}

template <typename T>
void Tape<T>::MixKink(uint64_t h) {
  kink_ ^= h + 0x9e3779b97f4a7c15ULL + (kink_ << 6) + (kink_ >> 2);
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;

namespace ad {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using VecMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <typename T>
using ConstVecMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;

template <typename T, typename... In>
Tensor<T> MakeOutput(Tape<T>& tape, Shape shape, const In&... inputs) {
  const bool rg = tape.recording() && (inputs.requires_grad() || ...);
  return Tensor<T>::Zeros(std::move(shape), rg);
}

template <typename T>
void CheckFinite(const Tape<T>& tape, const Tensor<T>& out, const char* op) {
  if (!tape.check_finite()) return;
  for (T v : out.value()) {
    if (!std::isfinite(v)) throw std::runtime_error(std::string("non-finite value after ") + op);
  }
}

// Explicit loops: Eigen's vectorized reductions peel to the data's alignment,
// so their rounding would depend on heap addresses.
template <typename M, typename T>
void AddRowSums(const M& m, T* dst) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    T s = T(0);
    for (Eigen::Index c = 0; c < m.cols(); ++c) s += m(r, c);
    dst[r] += s;
  }
}

template <typename M, typename T>
void AddColSums(const M& m, T* dst) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) dst[c] += m(r, c);
  }
}

void Require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

uint64_t HashMask(const std::vector<uint8_t>& mask) {
  uint64_t h = 1469598103934665603ULL;
  for (size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) h = (h ^ i) * 1099511628211ULL;
  }
  return h ^ mask.size();
}

template <typename T>
void Im2ColT(const T* x, size_t c, size_t h, size_t w, size_t kh, size_t kw, int pad, size_t ho,
             size_t wo, T* col) {
  const long lh = static_cast<long>(h);
  const long lw = static_cast<long>(w);
  for (size_t ci = 0; ci < c; ++ci) {
    for (size_t i = 0; i < kh; ++i) {
      for (size_t j = 0; j < kw; ++j) {
        T* row = col + ((ci * kh + i) * kw + j) * ho * wo;
        for (size_t oh = 0; oh < ho; ++oh) {
          const long ih = static_cast<long>(oh + i) - pad;
          T* dst = row + oh * wo;
          if (ih < 0 || ih >= lh) {
            std::fill(dst, dst + wo, T(0));
            continue;
          }
          const T* src = x + (ci * h + ih) * w;
          for (size_t ow = 0; ow < wo; ++ow) {
            const long iw = static_cast<long>(ow + j) - pad;
            dst[ow] = (iw < 0 || iw >= lw) ? T(0) : src[iw];
          }
        }
      }
    }
  }
}

template <typename T>
void Col2ImT(const T* col, size_t c, size_t h, size_t w, size_t kh, size_t kw, int pad,
             size_t ho, size_t wo, T* dx) {
  const long lh = static_cast<long>(h);
  const long lw = static_cast<long>(w);
  for (size_t ci = 0; ci < c; ++ci) {
    for (size_t i = 0; i < kh; ++i) {
      for (size_t j = 0; j < kw; ++j) {
        const T* row = col + ((ci * kh + i) * kw + j) * ho * wo;
        for (size_t oh = 0; oh < ho; ++oh) {
          const long ih = static_cast<long>(oh + i) - pad;
          if (ih < 0 || ih >= lh) continue;
          T* dst = dx + (ci * h + ih) * w;
          const T* src = row + oh * wo;
          for (size_t ow = 0; ow < wo; ++ow) {
            const long iw = static_cast<long>(ow + j) - pad;
            if (iw >= 0 && iw < lw) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

// Views a rank-3 tensor as a batch of one.
Shape Batched(const Shape& s, size_t rank) {
  if (s.size() == rank - 1) {
    Shape b = s;
    b.insert(b.begin(), 1);
    return b;
  }
  return s;
}

template <typename T>
T Sigmoid(T v) {
  return T(1) / (T(1) + std::exp(-v));
}

}  // namespace

template <typename T>
Tensor<T> Conv2d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                 int padding) {
  Require(x.rank() == 3 || x.rank() == 4, "conv2d input must be [N, C, H, W] or [C, H, W]");
  Require(w.rank() == 4, "conv2d kernels must be [K, C, kh, kw]");
  Require(padding >= 0, "conv2d padding must be non-negative");
  const Shape xs = Batched(x.shape(), 4);
  const size_t n = xs[0], c = xs[1], h = xs[2], wd = xs[3];
  const size_t k = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  Require(w.dim(1) == c, "conv2d channel mismatch: input " + ShapeString(x.shape()) +
                             ", kernels " + ShapeString(w.shape()));
  Require(b.rank() == 1 && b.dim(0) == k, "conv2d bias must be [K]");
  Require(h + 2 * padding >= kh && wd + 2 * padding >= kw, "conv2d input smaller than kernel");
  const size_t ho = h + 2 * padding - kh + 1;
  const size_t wo = wd + 2 * padding - kw + 1;
  Shape os = x.rank() == 4 ? Shape{n, k, ho, wo} : Shape{k, ho, wo};
  Tensor<T> out = MakeOutput(tape, os, x, w, b);

  const size_t ck = c * kh * kw;
  const size_t hw = ho * wo;
  std::vector<T> col(ck * hw);
  ConstMatMap<T> wm(w.value().data(), k, ck);
  ConstVecMap<T> bv(b.value().data(), k);
  for (size_t s = 0; s < n; ++s) {
    Im2ColT(x.value().data() + s * c * h * wd, c, h, wd, kh, kw, padding, ho, wo, col.data());
    MatMap<T> y(out.mutable_value().data() + s * k * hw, k, hw);
    y.noalias() = wm * ConstMatMap<T>(col.data(), ck, hw);
    y.colwise() += bv;
  }
  CheckFinite(tape, out, "conv2d");

  if (out.requires_grad()) {
    tape.Record([x, w, b, out, n, c, h, wd, k, kh, kw, ho, wo, padding]() mutable {
      const size_t ck = c * kh * kw;
      const size_t hw = ho * wo;
      std::vector<T> col(ck * hw);
      std::vector<T> dcol(ck * hw);
      const auto gy = out.grad();
      for (size_t s = 0; s < n; ++s) {
        ConstMatMap<T> dy(gy.data() + s * k * hw, k, hw);
        if (w.requires_grad()) {
          Im2ColT(x.value().data() + s * c * h * wd, c, h, wd, kh, kw, padding, ho, wo,
                  col.data());
          MatMap<T>(w.mutable_grad().data(), k, ck).noalias() +=
              dy * ConstMatMap<T>(col.data(), ck, hw).transpose();
        }
        if (b.requires_grad()) {
          AddRowSums(dy, b.mutable_grad().data());
        }
        if (x.requires_grad()) {
          MatMap<T>(dcol.data(), ck, hw).noalias() =
              ConstMatMap<T>(w.value().data(), k, ck).transpose() * dy;
          Col2ImT(dcol.data(), c, h, wd, kh, kw, padding, ho, wo,
                  x.mutable_grad().data() + s * c * h * wd);
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> AvgPool2d(Tape<T>& tape, const Tensor<T>& x) {
  Require(x.rank() >= 2, "avg_pool2d needs at least two axes");
  const size_t h = x.dim(x.rank() - 2);
  const size_t w = x.dim(x.rank() - 1);
  Require(h >= 2 && w >= 2, "avg_pool2d input " + ShapeString(x.shape()) + " smaller than 2x2");
  const size_t ho = h / 2, wo = w / 2;
  const size_t planes = x.size() / (h * w);
  Shape os = x.shape();
  os[os.size() - 2] = ho;
  os[os.size() - 1] = wo;
  Tensor<T> out = MakeOutput(tape, os, x);
  const T* xv = x.value().data();
  T* yv = out.mutable_value().data();
  for (size_t p = 0; p < planes; ++p) {
    const T* src = xv + p * h * w;
    T* dst = yv + p * ho * wo;
    for (size_t i = 0; i < ho; ++i) {
      const T* r0 = src + 2 * i * w;
      const T* r1 = r0 + w;
      for (size_t j = 0; j < wo; ++j) {
        dst[i * wo + j] = T(0.25) * (r0[2 * j] + r0[2 * j + 1] + r1[2 * j] + r1[2 * j + 1]);
      }
    }
  }
  if (out.requires_grad()) {
    tape.Record([x, out, planes, h, w, ho, wo]() mutable {
      const T* gy = out.grad().data();
      T* gx = x.mutable_grad().data();
      for (size_t p = 0; p < planes; ++p) {
        for (size_t i = 0; i < ho; ++i) {
          T* r0 = gx + p * h * w + 2 * i * w;
          T* r1 = r0 + w;
          for (size_t j = 0; j < wo; ++j) {
            const T g = T(0.25) * gy[(p * ho + i) * wo + j];
            r0[2 * j] += g;
            r0[2 * j + 1] += g;
            r1[2 * j] += g;
            r1[2 * j + 1] += g;
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> MeanOverAxis(Tape<T>& tape, const Tensor<T>& x, size_t axis) {
  Require(axis < x.rank(), "axis " + std::to_string(axis) + " out of range for " +
                               ShapeString(x.shape()));
  const Shape& s = x.shape();
  const size_t len = s[axis];
  Require(len > 0, "mean over an empty axis");
  const size_t outer = NumElements(Shape(s.begin(), s.begin() + axis));
  const size_t inner = NumElements(Shape(s.begin() + axis + 1, s.end()));
  Shape os = s;
  os.erase(os.begin() + axis);
  Tensor<T> out = MakeOutput(tape, os, x);
  const T* xv = x.value().data();
  T* yv = out.mutable_value().data();
  const T scale = T(1) / static_cast<T>(len);
  for (size_t o = 0; o < outer; ++o) {
    for (size_t a = 0; a < len; ++a) {
      const T* src = xv + (o * len + a) * inner;
      T* dst = yv + o * inner;
      for (size_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
    for (size_t i = 0; i < inner; ++i) yv[o * inner + i] *= scale;
  }
  if (out.requires_grad()) {
    tape.Record([x, out, outer, len, inner, scale]() mutable {
      const T* gy = out.grad().data();
      T* gx = x.mutable_grad().data();
      for (size_t o = 0; o < outer; ++o) {
        for (size_t a = 0; a < len; ++a) {
          T* dst = gx + (o * len + a) * inner;
          for (size_t i = 0; i < inner; ++i) dst[i] += scale * gy[o * inner + i];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> SwapAxes(Tape<T>& tape, const Tensor<T>& x, size_t a, size_t b) {
  Require(a < x.rank() && b < x.rank(), "swap_axes axis out of range");
  const Shape& s = x.shape();
  Shape os = s;
  std::swap(os[a], os[b]);
  Tensor<T> out = MakeOutput(tape, os, x);
  const size_t rank = s.size();
  std::vector<size_t> in_stride(rank, 1), out_stride(rank, 1);
  for (size_t i = rank; i-- > 1;) {
    in_stride[i - 1] = in_stride[i] * s[i];
    out_stride[i - 1] = out_stride[i] * os[i];
  }
  // perm[i] = offset in the output for the input element i.
  std::vector<size_t> perm(x.size());
  std::vector<size_t> idx(rank, 0);
  for (size_t i = 0; i < x.size(); ++i) {
    size_t off = 0;
    for (size_t d = 0; d < rank; ++d) {
      size_t od = d == a ? b : d == b ? a : d;
      off += idx[d] * out_stride[od];
    }
    perm[i] = off;
    for (size_t d = rank; d-- > 0;) {
      if (++idx[d] < s[d]) break;
      idx[d] = 0;
    }
  }
  const T* xv = x.value().data();
  T* yv = out.mutable_value().data();
  for (size_t i = 0; i < perm.size(); ++i) yv[perm[i]] = xv[i];
  if (out.requires_grad()) {
    tape.Record([x, out, perm = std::move(perm)]() mutable {
      const T* gy = out.grad().data();
      T* gx = x.mutable_grad().data();
      for (size_t i = 0; i < perm.size(); ++i) gx[i] += gy[perm[i]];
    });
  }
  return out;
}

template <typename T>
Tensor<T> Relu(Tape<T>& tape, const Tensor<T>& x) {
  Tensor<T> out = MakeOutput(tape, x.shape(), x);
  const T* xv = x.value().data();
  T* yv = out.mutable_value().data();
  std::vector<uint8_t> on(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    on[i] = xv[i] > T(0);
    yv[i] = on[i] ? xv[i] : T(0);
  }
  if (tape.track_kinks()) tape.MixKink(HashMask(on));
  if (out.requires_grad()) {
    tape.Record([x, out, on = std::move(on)]() mutable {
      const T* gy = out.grad().data();
      T* gx = x.mutable_grad().data();
      for (size_t i = 0; i < on.size(); ++i) {
        if (on[i]) gx[i] += gy[i];
      }
    });
  }
  return out;
}

template <typename T>
BatchNormParams<T>::BatchNormParams(size_t channels)
    : gamma(Tensor<T>(Shape{channels}, std::vector<T>(channels, T(1)), true)),
      beta(Tensor<T>::Zeros(Shape{channels}, true)),
      running_mean(channels, T(0)),
      running_var(channels, T(1)) {}

template <typename T>
Tensor<T> BatchNorm(Tape<T>& tape, const Tensor<T>& x, BatchNormParams<T>& bn, bool training) {
  Require(x.rank() >= 2, "batch_norm input must be [N, C, ...]");
  const size_t n = x.dim(0), c = x.dim(1);
  Require(bn.gamma.size() == c && bn.beta.size() == c,
          "batch_norm has " + std::to_string(bn.gamma.size()) + " channels, input " +
              ShapeString(x.shape()));
  if (training && n < 2) {
    throw std::invalid_argument("batch_norm in training mode needs a batch of at least 2");
  }
  const size_t inner = x.size() / (n * c);
  const size_t count = n * inner;
  Tensor<T> out = MakeOutput(tape, x.shape(), x, bn.gamma, bn.beta);
  const T* xv = x.value().data();
  T* yv = out.mutable_value().data();
  std::vector<T> mean(c), inv_std(c);
  if (training) {
    for (size_t ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (size_t i = 0; i < n; ++i) {
        const T* p = xv + (i * c + ch) * inner;
        for (size_t j = 0; j < inner; ++j) s += p[j];
      }
      const double m = s / count;
      double ss = 0.0;
      for (size_t i = 0; i < n; ++i) {
        const T* p = xv + (i * c + ch) * inner;
        for (size_t j = 0; j < inner; ++j) ss += (p[j] - m) * (p[j] - m);
      }
      const double var = ss / count;
      mean[ch] = static_cast<T>(m);
      inv_std[ch] = static_cast<T>(1.0 / std::sqrt(var + bn.eps));
      const double unbiased = count > 1 ? ss / (count - 1) : var;
      bn.running_mean[ch] = static_cast<T>((1.0 - bn.momentum) * bn.running_mean[ch] + bn.momentum * m);
      bn.running_var[ch] =
          static_cast<T>((1.0 - bn.momentum) * bn.running_var[ch] + bn.momentum * unbiased);
    }
  } else {
    for (size_t ch = 0; ch < c; ++ch) {
      mean[ch] = bn.running_mean[ch];
      inv_std[ch] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(bn.running_var[ch]) + bn.eps));
    }
  }
  std::vector<T> xhat(x.size());
  const T* g = bn.gamma.value().data();
  const T* be = bn.beta.value().data();
  for (size_t i = 0; i < n; ++i) {
    for (size_t ch = 0; ch < c; ++ch) {
      const size_t off = (i * c + ch) * inner;
      for (size_t j = 0; j < inner; ++j) {
        xhat[off + j] = (xv[off + j] - mean[ch]) * inv_std[ch];
        yv[off + j] = g[ch] * xhat[off + j] + be[ch];
      }
    }
  }
  CheckFinite(tape, out, "batch_norm");
  if (out.requires_grad()) {
    Tensor<T> gamma = bn.gamma, beta = bn.beta;
    tape.Record([x, out, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std), n, c,
                 inner, count, training]() mutable {
      const T* gy = out.grad().data();
      const T* gv = gamma.value().data();
      for (size_t ch = 0; ch < c; ++ch) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (size_t i = 0; i < n; ++i) {
          const size_t off = (i * c + ch) * inner;
          for (size_t j = 0; j < inner; ++j) {
            sum_dy += gy[off + j];
            sum_dy_xhat += gy[off + j] * xhat[off + j];
          }
        }
        if (gamma.requires_grad()) gamma.mutable_grad()[ch] += static_cast<T>(sum_dy_xhat);
        if (beta.requires_grad()) beta.mutable_grad()[ch] += static_cast<T>(sum_dy);
        if (!x.requires_grad()) continue;
        T* gx = x.mutable_grad().data();
        const double k = static_cast<double>(gv[ch]) * inv_std[ch];
        const double mdy = sum_dy / count;
        const double mdyx = sum_dy_xhat / count;
        for (size_t i = 0; i < n; ++i) {
          const size_t off = (i * c + ch) * inner;
          for (size_t j = 0; j < inner; ++j) {
            if (training) {
              gx[off + j] += static_cast<T>(k * (gy[off + j] - mdy - xhat[off + j] * mdyx));
            } else {
              gx[off + j] += static_cast<T>(k * gy[off + j]);
            }
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> Linear(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  Require(x.rank() == 1 || x.rank() == 2, "linear input must be [N, D] or [D]");
  Require(w.rank() == 2, "linear weight must be [D_out, D_in]");
  const size_t n = x.rank() == 2 ? x.dim(0) : 1;
  const size_t din = x.dim(x.rank() - 1);
  const size_t dout = w.dim(0);
  Require(w.dim(1) == din, "linear input " + ShapeString(x.shape()) + " vs weight " +
                               ShapeString(w.shape()));
  Require(b.rank() == 1 && b.dim(0) == dout, "linear bias must be [D_out]");
  Shape os = x.rank() == 2 ? Shape{n, dout} : Shape{dout};
  Tensor<T> out = MakeOutput(tape, os, x, w, b);
  MatMap<T> y(out.mutable_value().data(), n, dout);
  y.noalias() = ConstMatMap<T>(x.value().data(), n, din) *
                ConstMatMap<T>(w.value().data(), dout, din).transpose();
  y.rowwise() += ConstVecMap<T>(b.value().data(), dout).transpose();
  CheckFinite(tape, out, "linear");
  if (out.requires_grad()) {
    tape.Record([x, w, b, out, n, din, dout]() mutable {
      ConstMatMap<T> gy(out.grad().data(), n, dout);
      if (w.requires_grad()) {
        MatMap<T>(w.mutable_grad().data(), dout, din).noalias() +=
            gy.transpose() * ConstMatMap<T>(x.value().data(), n, din);
      }
      if (b.requires_grad()) {
        AddColSums(gy, b.mutable_grad().data());
      }
      if (x.requires_grad()) {
        MatMap<T>(x.mutable_grad().data(), n, din).noalias() +=
            gy * ConstMatMap<T>(w.value().data(), dout, din);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> Concat(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  Require(a.rank() == b.rank() && a.rank() >= 1, "concat needs tensors of equal rank");
  const size_t r = a.rank();
  for (size_t i = 0; i + 1 < r; ++i) {
    Require(a.dim(i) == b.dim(i), "concat leading axes differ: " + ShapeString(a.shape()) +
                                      " vs " + ShapeString(b.shape()));
  }
  const size_t da = a.dim(r - 1), db = b.dim(r - 1);
  const size_t rows = (da + db) == 0 ? 0 : (a.size() + b.size()) / (da + db);
  Shape os = a.shape();
  os[r - 1] = da + db;
  Tensor<T> out = MakeOutput(tape, os, a, b);
  T* yv = out.mutable_value().data();
  for (size_t i = 0; i < rows; ++i) {
    std::copy_n(a.value().data() + i * da, da, yv + i * (da + db));
    std::copy_n(b.value().data() + i * db, db, yv + i * (da + db) + da);
  }
  if (out.requires_grad()) {
    tape.Record([a, b, out, rows, da, db]() mutable {
      const T* gy = out.grad().data();
      for (size_t i = 0; i < rows; ++i) {
        if (a.requires_grad()) {
          T* ga = a.mutable_grad().data() + i * da;
          for (size_t j = 0; j < da; ++j) ga[j] += gy[i * (da + db) + j];
        }
        if (b.requires_grad()) {
          T* gb = b.mutable_grad().data() + i * db;
          for (size_t j = 0; j < db; ++j) gb[j] += gy[i * (da + db) + da + j];
        }
      }
    });
  }
  return out;
}

namespace {

// Saved per-step activations of one GRU direction over the batch.
template <typename T>
struct GruTrace {
  std::vector<T> gi;      // [L, N, 3H] input projections incl. b_ih
  std::vector<T> gh_n;    // [L, N, H] W_hn h + b_hn
  std::vector<T> r, z, cand;  // [L, N, H]
  std::vector<T> h_prev;  // [L, N, H]
};

template <typename T>
void GruForward(const T* x, size_t n, size_t l, size_t d, const GruParams<T>& p, bool reverse,
                T* out, size_t out_stride, size_t out_offset, GruTrace<T>* trace) {
  const size_t hd = p.hidden();
  ConstMatMap<T> w_ih(p.w_ih.value().data(), 3 * hd, d);
  ConstMatMap<T> w_hh(p.w_hh.value().data(), 3 * hd, hd);
  ConstVecMap<T> b_ih(p.b_ih.value().data(), 3 * hd);
  ConstVecMap<T> b_hh(p.b_hh.value().data(), 3 * hd);
  RowMat<T> h = RowMat<T>::Zero(n, hd);
  RowMat<T> xt(n, d);
  RowMat<T> gi(n, 3 * hd), gh(n, 3 * hd);
  if (trace) {
    trace->gi.resize(l * n * 3 * hd);
    trace->gh_n.resize(l * n * hd);
    trace->r.resize(l * n * hd);
    trace->z.resize(l * n * hd);
    trace->cand.resize(l * n * hd);
    trace->h_prev.resize(l * n * hd);
  }
  for (size_t step = 0; step < l; ++step) {
    const size_t t = reverse ? l - 1 - step : step;
    for (size_t s = 0; s < n; ++s) {
      xt.row(s) = ConstVecMap<T>(x + (s * l + t) * d, d).transpose();
    }
    gi.noalias() = xt * w_ih.transpose();
    gi.rowwise() += b_ih.transpose();
    gh.noalias() = h * w_hh.transpose();
    gh.rowwise() += b_hh.transpose();
    if (trace) {
      std::copy_n(gi.data(), n * 3 * hd, trace->gi.data() + step * n * 3 * hd);
      std::copy_n(h.data(), n * hd, trace->h_prev.data() + step * n * hd);
    }
    for (size_t s = 0; s < n; ++s) {
      for (size_t j = 0; j < hd; ++j) {
        const T r = Sigmoid(gi(s, j) + gh(s, j));
        const T z = Sigmoid(gi(s, hd + j) + gh(s, hd + j));
        const T c = std::tanh(gi(s, 2 * hd + j) + r * gh(s, 2 * hd + j));
        const T hn = (T(1) - z) * c + z * h(s, j);
        if (trace) {
          const size_t k = (step * n + s) * hd + j;
          trace->r[k] = r;
          trace->z[k] = z;
          trace->cand[k] = c;
          trace->gh_n[k] = gh(s, 2 * hd + j);
        }
        h(s, j) = hn;
        out[(s * l + t) * out_stride + out_offset + j] = hn;
      }
    }
  }
}

template <typename T>
void GruBackward(const Tensor<T>& x, size_t n, size_t l, size_t d, const GruParams<T>& p, bool reverse,
                 const T* gout, size_t out_stride, size_t out_offset, const GruTrace<T>& tr) {
  const size_t hd = p.hidden();
  ConstMatMap<T> w_ih(p.w_ih.value().data(), 3 * hd, d);
  ConstMatMap<T> w_hh(p.w_hh.value().data(), 3 * hd, hd);
  RowMat<T> dh = RowMat<T>::Zero(n, hd);
  RowMat<T> dgi(n, 3 * hd), dgh(n, 3 * hd);
  RowMat<T> xt(n, d);
  RowMat<T> dw_ih = RowMat<T>::Zero(3 * hd, d);
  RowMat<T> dw_hh = RowMat<T>::Zero(3 * hd, hd);
  Eigen::Matrix<T, Eigen::Dynamic, 1> db_ih = Eigen::Matrix<T, Eigen::Dynamic, 1>::Zero(3 * hd);
  Eigen::Matrix<T, Eigen::Dynamic, 1> db_hh = Eigen::Matrix<T, Eigen::Dynamic, 1>::Zero(3 * hd);
  const T* xv = x.value().data();
  for (size_t step = l; step-- > 0;) {
    const size_t t = reverse ? l - 1 - step : step;
    for (size_t s = 0; s < n; ++s) {
      for (size_t j = 0; j < hd; ++j) {
        const size_t k = (step * n + s) * hd + j;
        const T dht = dh(s, j) + gout[(s * l + t) * out_stride + out_offset + j];
        const T r = tr.r[k], z = tr.z[k], c = tr.cand[k];
        const T hp = tr.h_prev[k];
        const T dc = dht * (T(1) - z);
        const T dz = dht * (hp - c);
        const T da_n = dc * (T(1) - c * c);
        const T dr = da_n * tr.gh_n[k];
        const T da_r = dr * r * (T(1) - r);
        const T da_z = dz * z * (T(1) - z);
        dgi(s, j) = da_r;
        dgi(s, hd + j) = da_z;
        dgi(s, 2 * hd + j) = da_n;
        dgh(s, j) = da_r;
        dgh(s, hd + j) = da_z;
        dgh(s, 2 * hd + j) = da_n * r;
        dh(s, j) = dht * z;
      }
    }
    ConstMatMap<T> hp(tr.h_prev.data() + step * n * hd, n, hd);
    dw_hh.noalias() += dgh.transpose() * hp;
    AddColSums(dgh, db_hh.data());
    dh.noalias() += dgh * w_hh;
    for (size_t s = 0; s < n; ++s) {
      xt.row(s) = ConstVecMap<T>(xv + (s * l + t) * d, d).transpose();
    }
    dw_ih.noalias() += dgi.transpose() * xt;
    AddColSums(dgi, db_ih.data());
    if (x.requires_grad()) {
      RowMat<T> dx = dgi * w_ih;
      T* gx = x.mutable_grad().data();
      for (size_t s = 0; s < n; ++s) {
        VecMap<T>(gx + (s * l + t) * d, d) += dx.row(s).transpose();
      }
    }
  }
  if (p.w_ih.requires_grad()) MatMap<T>(p.w_ih.mutable_grad().data(), 3 * hd, d) += dw_ih;
  if (p.w_hh.requires_grad()) MatMap<T>(p.w_hh.mutable_grad().data(), 3 * hd, hd) += dw_hh;
  if (p.b_ih.requires_grad()) VecMap<T>(p.b_ih.mutable_grad().data(), 3 * hd) += db_ih;
  if (p.b_hh.requires_grad()) VecMap<T>(p.b_hh.mutable_grad().data(), 3 * hd) += db_hh;
}

template <typename T>
void CheckGru(const GruParams<T>& p, size_t d, const char* which) {
  const std::string name(which);
  Require(p.w_hh.rank() == 2 && p.w_hh.dim(0) == 3 * p.w_hh.dim(1),
          name + " GRU w_hh must be [3H, H]");
  const size_t hd = p.w_hh.dim(1);
  Require(p.w_ih.rank() == 2 && p.w_ih.dim(0) == 3 * hd && p.w_ih.dim(1) == d,
          name + " GRU w_ih must be [3H, D] with D = " + std::to_string(d));
  Require(p.b_ih.size() == 3 * hd && p.b_hh.size() == 3 * hd, name + " GRU biases must be [3H]");
}

template <typename T>
bool AnyRequiresGrad(const GruParams<T>& p) {
  return p.w_ih.requires_grad() || p.w_hh.requires_grad() || p.b_ih.requires_grad() ||
         p.b_hh.requires_grad();
}

}  // namespace

template <typename T>
Tensor<T> BidirectionalGru(Tape<T>& tape, const Tensor<T>& x, const GruParams<T>& fwd,
                           const GruParams<T>& bwd) {
  Require(x.rank() == 2 || x.rank() == 3, "GRU input must be [N, L, D] or [L, D]");
  const Shape xs = Batched(x.shape(), 3);
  const size_t n = xs[0], l = xs[1], d = xs[2];
  Require(l >= 1, "GRU needs at least one step");
  CheckGru(fwd, d, "forward");
  CheckGru(bwd, d, "backward");
  const size_t hd = fwd.hidden();
  Require(bwd.hidden() == hd, "GRU directions differ in hidden size");
  Shape os = x.rank() == 3 ? Shape{n, l, 2 * hd} : Shape{l, 2 * hd};
  const bool rg = tape.recording() &&
                  (x.requires_grad() || AnyRequiresGrad(fwd) || AnyRequiresGrad(bwd));
  Tensor<T> out = Tensor<T>::Zeros(os, rg);
  auto tf = std::make_shared<GruTrace<T>>();
  auto tb = std::make_shared<GruTrace<T>>();
  T* yv = out.mutable_value().data();
  GruForward(x.value().data(), n, l, d, fwd, false, yv, 2 * hd, 0, rg ? tf.get() : nullptr);
  GruForward(x.value().data(), n, l, d, bwd, true, yv, 2 * hd, hd, rg ? tb.get() : nullptr);
  CheckFinite(tape, out, "gru");
  if (rg) {
    tape.Record([x, out, fwd, bwd, tf, tb, n, l, d, hd]() mutable {
      const T* gy = out.grad().data();
      GruBackward(x, n, l, d, fwd, false, gy, 2 * hd, 0, *tf);
      GruBackward(x, n, l, d, bwd, true, gy, 2 * hd, hd, *tb);
    });
  }
  return out;
}

template <typename T>
Tensor<T> L1Loss(Tape<T>& tape, const Tensor<T>& pred, const Tensor<T>& target) {
  Require(pred.shape() == target.shape(), "l1_loss shapes differ: " +
                                              ShapeString(pred.shape()) + " vs " +
                                              ShapeString(target.shape()));
  Require(pred.rank() == 1 || pred.rank() == 2, "l1_loss expects [N, D] or [D]");
  const size_t n = pred.rank() == 2 ? pred.dim(0) : 1;
  Require(n > 0, "l1_loss on an empty batch");
  Tensor<T> out = MakeOutput(tape, Shape{}, pred, target);
  const T* a = pred.value().data();
  const T* b = target.value().data();
  std::vector<uint8_t> pos(pred.size()), neg(pred.size());
  T s = T(0);
  for (size_t i = 0; i < pred.size(); ++i) {
    const T diff = a[i] - b[i];
    pos[i] = diff > T(0);
    neg[i] = diff < T(0);
    s += std::abs(diff);
  }
  out.mutable_value()[0] = s / static_cast<T>(n);
  if (tape.track_kinks()) tape.MixKink(HashMask(pos) * 31 + HashMask(neg));
  if (out.requires_grad()) {
    tape.Record([pred, target, out, pos = std::move(pos), neg = std::move(neg), n]() mutable {
      const T g = out.grad()[0] / static_cast<T>(n);
      for (size_t i = 0; i < pos.size(); ++i) {
        const T sgn = pos[i] ? T(1) : neg[i] ? T(-1) : T(0);
        if (pred.requires_grad()) pred.mutable_grad()[i] += g * sgn;
        if (target.requires_grad()) target.mutable_grad()[i] -= g * sgn;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> Sum(Tape<T>& tape, const Tensor<T>& x) {
  Tensor<T> out = MakeOutput(tape, Shape{}, x);
  T s = T(0);
  for (T v : x.value()) s += v;
  out.mutable_value()[0] = s;
  if (out.requires_grad()) {
    tape.Record([x, out]() mutable {
      const T g = out.grad()[0];
      for (T& v : x.mutable_grad()) v += g;
    });
  }
  return out;
}

template <typename T>
Tensor<T> WeightedSum(Tape<T>& tape, const Tensor<T>& x, std::span<const T> weights) {
  Require(weights.size() == x.size(), "weighted_sum weight count mismatch");
  Tensor<T> out = MakeOutput(tape, Shape{}, x);
  T s = T(0);
  for (size_t i = 0; i < x.size(); ++i) s += x.value()[i] * weights[i];
  out.mutable_value()[0] = s;
  if (out.requires_grad()) {
    std::vector<T> w(weights.begin(), weights.end());
    tape.Record([x, out, w = std::move(w)]() mutable {
      const T g = out.grad()[0];
      auto gx = x.mutable_grad();
      for (size_t i = 0; i < w.size(); ++i) gx[i] += g * w[i];
    });
  }
  return out;
}

#define PSSL_INSTANTIATE(T)                                                                   \
  template Tensor<T> Conv2d(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,   \
                            int);                                                             \
  template Tensor<T> AvgPool2d(Tape<T>&, const Tensor<T>&);                                   \
  template Tensor<T> MeanOverAxis(Tape<T>&, const Tensor<T>&, size_t);                        \
  template Tensor<T> SwapAxes(Tape<T>&, const Tensor<T>&, size_t, size_t);                    \
  template Tensor<T> Relu(Tape<T>&, const Tensor<T>&);                                        \
  template struct BatchNormParams<T>;                                                         \
  template Tensor<T> BatchNorm(Tape<T>&, const Tensor<T>&, BatchNormParams<T>&, bool);        \
  template Tensor<T> Linear(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);  \
  template Tensor<T> Concat(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                    \
  template Tensor<T> BidirectionalGru(Tape<T>&, const Tensor<T>&, const GruParams<T>&,        \
                                      const GruParams<T>&);                                   \
  template Tensor<T> L1Loss(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                    \
  template Tensor<T> Sum(Tape<T>&, const Tensor<T>&);                                         \
  template Tensor<T> WeightedSum(Tape<T>&, const Tensor<T>&, std::span<const T>);

PSSL_INSTANTIATE(float)
PSSL_INSTANTIATE(double)

}  // namespace ad
}  // namespace pssl
