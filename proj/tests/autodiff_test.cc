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

#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "pssl/autodiff/adam.h"
#include "pssl/autodiff/checkpoint.h"
#include "pssl/autodiff/gradcheck.h"
#include "pssl/autodiff/tensor.h"
#include "pssl/signal/random.h"

namespace pssl {
namespace {

using TD = Tensor<double>;
using TF = Tensor<float>;

template <typename T>
Tensor<T> Random(Shape shape, Rng& rng, bool requires_grad = true, double scale = 1.0) {
  std::vector<T> v(NumElements(shape));
  for (auto& x : v) x = static_cast<T>(scale * StandardNormal(rng));
  return Tensor<T>(std::move(shape), std::move(v), requires_grad);
}

std::vector<double> RandomWeights(size_t n, Rng& rng) {
  std::vector<double> w(n);
  for (auto& x : w) x = StandardNormal(rng);
  return w;
}

constexpr double kTol = 1e-4;

TEST(Conv2dTest, IdentityKernelCrops) {
  Rng rng(1);
  const TD x = Random<double>({1, 5, 6}, rng, false);
  std::vector<double> k(4, 0.0);
  k[0] = 1.0;
  const TD w({1, 1, 2, 2}, k);
  const TD b = TD::Zeros({1});
  Tape<double> tape;
  const TD y = ad::Conv2d(tape, x, w, b);
  ASSERT_EQ(y.shape(), (Shape{1, 4, 5}));
  for (size_t i = 0; i < 4; ++i) {
    for (size_t j = 0; j < 5; ++j) EXPECT_EQ(y.value()[i * 5 + j], x.value()[i * 6 + j]);
  }
}

TEST(Conv2dTest, OnesKernelOnConstant) {
  const TF x({1, 1, 3, 4}, std::vector<float>(12, 2.5f));
  const TF w({1, 1, 2, 2}, std::vector<float>(4, 1.0f));
  Tape<float> tape;
  const TF y = ad::Conv2d(tape, x, w, TF::Zeros({1}));
  ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 3}));
  for (float v : y.value()) EXPECT_EQ(v, 10.0f);
}

TEST(Conv2dTest, PaddingGrowsOutput) {
  const TF x({1, 1, 3, 4}, std::vector<float>(12, 1.0f));
  const TF w({2, 1, 2, 2}, std::vector<float>(8, 1.0f));
  Tape<float> tape;
  const TF y = ad::Conv2d(tape, x, w, TF::Zeros({2}), 1);
  ASSERT_EQ(y.shape(), (Shape{1, 2, 4, 5}));
  EXPECT_EQ(y.value()[0], 1.0f);   // corner sees one input
  EXPECT_EQ(y.value()[6], 4.0f);   // interior sees four
}

TEST(Conv2dTest, ShapeErrors) {
  Tape<float> tape;
  const TF x = TF::Zeros({1, 3, 4, 4});
  EXPECT_THROW(ad::Conv2d(tape, x, TF::Zeros({2, 2, 2, 2}), TF::Zeros({2})),
               std::invalid_argument);
  EXPECT_THROW(ad::Conv2d(tape, x, TF::Zeros({2, 3, 2, 2}), TF::Zeros({3})),
               std::invalid_argument);
  EXPECT_THROW(ad::Conv2d(tape, TF::Zeros({1, 3, 1, 4}), TF::Zeros({2, 3, 2, 2}), TF::Zeros({2})),
               std::invalid_argument);
}

TEST(Conv2dTest, GradientsMatchFiniteDifferences) {
  const Shape shapes[3][2] = {{{2, 3, 5, 6}, {4, 3, 2, 2}},
                              {{1, 1, 2, 2}, {1, 1, 2, 2}},
                              {{3, 2, 7, 4}, {5, 2, 2, 2}}};
  for (int pad = 0; pad <= 1; ++pad) {
    for (const auto& s : shapes) {
      Rng rng(10 + pad);
      const TD x = Random<double>(s[0], rng);
      const TD w = Random<double>(s[1], rng);
      const TD b = Random<double>({s[1][0]}, rng);
      Tape<double> probe;
      const size_t out = ad::Conv2d(probe, x, w, b, pad).size();
      const auto proj = RandomWeights(out, rng);
      const auto r = FiniteDiffCheck(
          [&](Tape<double>& t) { return ad::WeightedSum<double>(t, ad::Conv2d(t, x, w, b, pad), proj); },
          {{"x", x}, {"w", w}, {"b", b}});
      EXPECT_LT(r.max_relative_error, 1e-6) << ShapeString(s[0]) << " pad " << pad;
      EXPECT_GT(r.checked, 0u);
    }
  }
}

// Single-precision gradients against float central differences.
TEST(Conv2dTest, SinglePrecisionGradients) {
  Rng rng(12);
  const TF x = Random<float>({2, 3, 5, 6}, rng);
  const TF w = Random<float>({4, 3, 2, 2}, rng);
  const TF b = Random<float>({4}, rng);
  Tape<float> probe;
  const size_t out = ad::Conv2d(probe, x, w, b).size();
  std::vector<float> proj(out);
  for (auto& v : proj) v = static_cast<float>(StandardNormal(rng));
  auto f = [&] {
    Tape<float> t(false);
    return static_cast<double>(ad::WeightedSum<float>(t, ad::Conv2d(t, x, w, b), proj).item());
  };
  Tape<float> tape;
  tape.Backward(ad::WeightedSum<float>(tape, ad::Conv2d(tape, x, w, b), proj));
  double worst = 0.0;
  for (TF p : {x, w, b}) {
    auto v = p.mutable_value();
    for (size_t i = 0; i < v.size(); i += 3) {
      const float theta = v[i];
      const float h = 1e-2f;
      v[i] = theta + h;
      const double fp = f();
      v[i] = theta - h;
      const double fm = f();
      v[i] = theta;
      const double num = (fp - fm) / (2.0 * h);
      const double a = p.grad()[i];
      worst = std::max(worst, std::abs(a - num) / std::max({std::abs(a), std::abs(num), 1e-3}));
    }
  }
  EXPECT_LT(worst, 1e-3);
}

TEST(AvgPoolTest, HandValues) {
  Tape<double> tape;
  const TD x({1, 1, 2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(ad::AvgPool2d(tape, x).value()[0], 2.5);
  const TD c({2, 5, 7}, std::vector<double>(70, -1.5));
  const TD y = ad::AvgPool2d(tape, c);
  ASSERT_EQ(y.shape(), (Shape{2, 2, 3}));
  for (double v : y.value()) EXPECT_EQ(v, -1.5);
  EXPECT_THROW(ad::AvgPool2d(tape, TD::Zeros({1, 1, 7})), std::invalid_argument);
}

TEST(AvgPoolTest, GradientIsQuarterBroadcast) {
  const TD x = TD::Zeros({1, 3, 5}, true);
  Tape<double> tape;
  tape.Backward(ad::Sum(tape, ad::AvgPool2d(tape, x)));
  for (size_t i = 0; i < 3; ++i) {
    for (size_t j = 0; j < 5; ++j) {
      const double expected = (i < 2 && j < 4) ? 0.25 : 0.0;
      EXPECT_EQ(x.grad()[i * 5 + j], expected);
    }
  }
}

TEST(AvgPoolTest, GradCheck) {
  for (const Shape& s : {Shape{2, 3, 4, 5}, Shape{1, 1, 2, 2}, Shape{3, 2, 7, 9}}) {
    Rng rng(20);
    const TD x = Random<double>(s, rng);
    Tape<double> probe;
    const auto proj = RandomWeights(ad::AvgPool2d(probe, x).size(), rng);
    const auto r = FiniteDiffCheck(
        [&](Tape<double>& t) { return ad::WeightedSum<double>(t, ad::AvgPool2d(t, x), proj); },
        {{"x", x}});
    EXPECT_LT(r.max_relative_error, kTol);
  }
}

TEST(MeanOverAxisTest, ValuesAndGradient) {
  Tape<double> tape;
  const TD x({2, 1, 3}, {1, 2, 3, 4, 5, 6}, true);
  const TD sq = ad::MeanOverAxis(tape, x, 1);
  EXPECT_EQ(sq.shape(), (Shape{2, 3}));
  EXPECT_EQ(std::vector<double>(sq.value().begin(), sq.value().end()),
            std::vector<double>(x.value().begin(), x.value().end()));
  const TD m = ad::MeanOverAxis(tape, x, 2);
  EXPECT_EQ(m.shape(), (Shape{2, 1}));
  EXPECT_EQ(m.value()[0], 2.0);
  EXPECT_EQ(m.value()[1], 5.0);
  tape.Backward(ad::Sum(tape, m));
  for (double g : x.grad()) EXPECT_NEAR(g, 1.0 / 3.0, 1e-15);
  EXPECT_THROW(ad::MeanOverAxis(tape, x, 3), std::invalid_argument);
}

TEST(MeanOverAxisTest, GradCheck) {
  for (size_t axis : {0u, 1u, 2u}) {
    Rng rng(30 + axis);
    const TD x = Random<double>({3, 4, 5}, rng);
    Tape<double> probe;
    const auto proj = RandomWeights(ad::MeanOverAxis(probe, x, axis).size(), rng);
    const auto r = FiniteDiffCheck(
        [&](Tape<double>& t) {
          return ad::WeightedSum<double>(t, ad::MeanOverAxis(t, x, axis), proj);
        },
        {{"x", x}});
    EXPECT_LT(r.max_relative_error, kTol);
  }
}

TEST(SwapAxesTest, TransposesAndRoutesGradients) {
  Tape<double> tape;
  const TD x({2, 3, 2}, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}, true);
  const TD y = ad::SwapAxes(tape, x, 1, 2);
  ASSERT_EQ(y.shape(), (Shape{2, 2, 3}));
  EXPECT_EQ(y.value()[1], 2.0);   // y[0][0][1] = x[0][1][0]
  EXPECT_EQ(y.value()[3], 1.0);   // y[0][1][0] = x[0][0][1]
  Rng rng(3);
  const auto proj = RandomWeights(12, rng);
  const auto r = FiniteDiffCheck(
      [&](Tape<double>& t) { return ad::WeightedSum<double>(t, ad::SwapAxes(t, x, 0, 2), proj); },
      {{"x", x}});
  EXPECT_LT(r.max_relative_error, kTol);
}

TEST(ReluTest, ValuesAndSubgradient) {
  Tape<double> tape;
  const TD x({4}, {-2.0, 0.0, 3.0, -0.0}, true);
  const TD y = ad::Relu(tape, x);
  EXPECT_EQ(y.value()[0], 0.0);
  EXPECT_EQ(y.value()[1], 0.0);
  EXPECT_EQ(y.value()[2], 3.0);
  tape.Backward(ad::Sum(tape, y));
  EXPECT_EQ(x.grad()[0], 0.0);
  EXPECT_EQ(x.grad()[1], 0.0);
  EXPECT_EQ(x.grad()[2], 1.0);
}

TEST(ReluTest, GradCheck) {
  for (const Shape& s : {Shape{7}, Shape{3, 4}, Shape{2, 3, 4, 5}}) {
    Rng rng(40);
    const TD x = Random<double>(s, rng);
    const auto proj = RandomWeights(x.size(), rng);
    const auto r = FiniteDiffCheck(
        [&](Tape<double>& t) { return ad::WeightedSum<double>(t, ad::Relu(t, x), proj); },
        {{"x", x}});
    EXPECT_LT(r.max_relative_error, kTol);
  }
}

TEST(BatchNormTest, TrainModeStandardizes) {
  Rng rng(50);
  const TD x = Random<double>({4, 3, 5, 6}, rng, false, 3.0);
  for (double& v : x.data()->value) v += 7.0;
  ad::BatchNormParams<double> bn(3);
  Tape<double> tape;
  const TD y = ad::BatchNorm(tape, x, bn, true);
  for (size_t c = 0; c < 3; ++c) {
    double s = 0.0, ss = 0.0;
    size_t n = 0;
    for (size_t i = 0; i < 4; ++i) {
      for (size_t j = 0; j < 30; ++j) {
        const double v = y.value()[(i * 3 + c) * 30 + j];
        s += v;
        ss += v * v;
        ++n;
      }
    }
    EXPECT_NEAR(s / n, 0.0, 1e-4);
    EXPECT_NEAR(ss / n, 1.0, 1e-4);
  }
  // One momentum-0.1 step from (0, 1) towards the batch statistics.
  EXPECT_NEAR(bn.running_mean[0], 0.7, 0.2);
  EXPECT_GT(bn.running_var[0], 1.0);
}

TEST(BatchNormTest, EvalWithBatchStatsMatchesTrain) {
  Rng rng(51);
  const TD x = Random<double>({5, 2, 3}, rng, false);
  ad::BatchNormParams<double> bn(2);
  Tape<double> tape;
  const TD train = ad::BatchNorm(tape, x, bn, true);
  for (size_t c = 0; c < 2; ++c) {
    double s = 0.0, ss = 0.0;
    for (size_t i = 0; i < 5; ++i) {
      for (size_t j = 0; j < 3; ++j) s += x.value()[(i * 2 + c) * 3 + j];
    }
    const double m = s / 15;
    for (size_t i = 0; i < 5; ++i) {
      for (size_t j = 0; j < 3; ++j) {
        const double d = x.value()[(i * 2 + c) * 3 + j] - m;
        ss += d * d;
      }
    }
    bn.running_mean[c] = m;
    bn.running_var[c] = ss / 15;
  }
  const TD eval = ad::BatchNorm(tape, x, bn, false);
  for (size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(eval.value()[i], train.value()[i], 1e-12);
}

TEST(BatchNormTest, SingleSampleTrainIsAnError) {
  ad::BatchNormParams<double> bn(2);
  Tape<double> tape;
  EXPECT_THROW(ad::BatchNorm(tape, TD::Zeros({1, 2, 3, 3}), bn, true), std::invalid_argument);
  EXPECT_NO_THROW(ad::BatchNorm(tape, TD::Zeros({1, 2, 3, 3}), bn, false));
}

TEST(BatchNormTest, GradCheck) {
  for (const Shape& s : {Shape{2, 3}, Shape{3, 2, 4}, Shape{4, 3, 3, 5}}) {
    for (bool training : {true, false}) {
      Rng rng(52);
      const TD x = Random<double>(s, rng);
      ad::BatchNormParams<double> bn(s[1]);
      for (auto& v : bn.gamma.data()->value) v = 1.0 + 0.3 * StandardNormal(rng);
      for (auto& v : bn.beta.data()->value) v = 0.3 * StandardNormal(rng);
      for (auto& v : bn.running_var) v = 0.5 + Uniform(rng, 0.0, 1.0);
      const auto proj = RandomWeights(x.size(), rng);
      const auto r = FiniteDiffCheck(
          [&](Tape<double>& t) {
            ad::BatchNormParams<double> local = bn;  // running stats stay fixed
            return ad::WeightedSum<double>(t, ad::BatchNorm(t, x, local, training), proj);
          },
          {{"x", x}, {"gamma", bn.gamma}, {"beta", bn.beta}});
      EXPECT_LT(r.max_relative_error, kTol) << ShapeString(s) << " train " << training;
    }
  }
}

ad::GruParams<double> RandomGru(size_t d, size_t h, Rng& rng) {
  return {Random<double>({3 * h, d}, rng, true, 0.5), Random<double>({3 * h, h}, rng, true, 0.5),
          Random<double>({3 * h}, rng, true, 0.5), Random<double>({3 * h}, rng, true, 0.5)};
}

// One GRU step from h = 0, written out from the gate equations.
std::vector<double> OneStep(const std::vector<double>& x, const ad::GruParams<double>& p) {
  const size_t h = p.hidden(), d = p.input();
  auto gi = [&](size_t row) {
    double s = p.b_ih.value()[row];
    for (size_t k = 0; k < d; ++k) s += p.w_ih.value()[row * d + k] * x[k];
    return s;
  };
  std::vector<double> out(h);
  for (size_t j = 0; j < h; ++j) {
    const double r = 1.0 / (1.0 + std::exp(-(gi(j) + p.b_hh.value()[j])));
    const double z = 1.0 / (1.0 + std::exp(-(gi(h + j) + p.b_hh.value()[h + j])));
    const double n = std::tanh(gi(2 * h + j) + r * p.b_hh.value()[2 * h + j]);
    out[j] = (1.0 - z) * n;
  }
  return out;
}

TEST(GruTest, SingleStepIsTwoOneStepGrus) {
  Rng rng(60);
  const auto fwd = RandomGru(3, 4, rng);
  const auto bwd = RandomGru(3, 4, rng);
  const TD x({1, 3}, {0.3, -1.2, 0.7});
  Tape<double> tape;
  const TD y = ad::BidirectionalGru(tape, x, fwd, bwd);
  ASSERT_EQ(y.shape(), (Shape{1, 8}));
  const std::vector<double> xv(x.value().begin(), x.value().end());
  const auto f = OneStep(xv, fwd);
  const auto b = OneStep(xv, bwd);
  for (size_t j = 0; j < 4; ++j) {
    EXPECT_NEAR(y.value()[j], f[j], 1e-14);
    EXPECT_NEAR(y.value()[4 + j], b[j], 1e-14);
  }
}

TEST(GruTest, ZeroInputZeroBiasStaysZero) {
  Rng rng(61);
  auto fwd = RandomGru(3, 4, rng);
  auto bwd = RandomGru(3, 4, rng);
  for (auto* p : {&fwd, &bwd}) {
    p->b_ih = TD::Zeros({12});
    p->b_hh = TD::Zeros({12});
  }
  Tape<double> tape;
  const TD y = ad::BidirectionalGru(tape, TD::Zeros({2, 6, 3}), fwd, bwd);
  for (double v : y.value()) EXPECT_EQ(v, 0.0);
}

TEST(GruTest, BackwardDirectionIsTimeAligned) {
  Rng rng(62);
  const auto p = RandomGru(2, 3, rng);
  const TD x = Random<double>({1, 4, 2}, rng, false);
  // Reversing the input swaps the roles of the two directions.
  std::vector<double> rev(8);
  for (size_t t = 0; t < 4; ++t) {
    rev[2 * t] = x.value()[2 * (3 - t)];
    rev[2 * t + 1] = x.value()[2 * (3 - t) + 1];
  }
  Tape<double> tape;
  const TD y = ad::BidirectionalGru(tape, x, p, p);
  const TD yr = ad::BidirectionalGru(tape, TD({1, 4, 2}, rev), p, p);
  for (size_t t = 0; t < 4; ++t) {
    for (size_t j = 0; j < 3; ++j) {
      EXPECT_NEAR(y.value()[t * 6 + j], yr.value()[(3 - t) * 6 + 3 + j], 1e-14);
    }
  }
}

TEST(GruTest, GradCheck) {
  for (const Shape& s : {Shape{5, 3}, Shape{2, 5, 3}, Shape{3, 2, 3}}) {
    Rng rng(63);
    const TD x = Random<double>(s, rng);
    const auto fwd = RandomGru(3, 4, rng);
    const auto bwd = RandomGru(3, 4, rng);
    Tape<double> probe;
    const auto proj = RandomWeights(ad::BidirectionalGru(probe, x, fwd, bwd).size(), rng);
    const auto r = FiniteDiffCheck(
        [&](Tape<double>& t) {
          return ad::WeightedSum<double>(t, ad::BidirectionalGru(t, x, fwd, bwd), proj);
        },
        {{"x", x},
         {"fwd.w_ih", fwd.w_ih},
         {"fwd.w_hh", fwd.w_hh},
         {"fwd.b_ih", fwd.b_ih},
         {"fwd.b_hh", fwd.b_hh},
         {"bwd.w_ih", bwd.w_ih},
         {"bwd.w_hh", bwd.w_hh},
         {"bwd.b_ih", bwd.b_ih},
         {"bwd.b_hh", bwd.b_hh}});
    EXPECT_LT(r.max_relative_error, kTol) << ShapeString(s) << " worst " << r.worst_param;
  }
}

TEST(LinearTest, IdentityAndBias) {
  Tape<double> tape;
  const TD x({3}, {1.0, -2.0, 0.5});
  const TD eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const TD y = ad::Linear(tape, x, eye, TD::Zeros({3}));
  EXPECT_EQ(std::vector<double>(y.value().begin(), y.value().end()),
            std::vector<double>({1.0, -2.0, 0.5}));
  const TD b({2}, {0.25, -4.0});
  const TD z = ad::Linear(tape, TD::Zeros({3}), TD::Zeros({2, 3}), b);
  EXPECT_EQ(z.value()[0], 0.25);
  EXPECT_EQ(z.value()[1], -4.0);
  EXPECT_THROW(ad::Linear(tape, x, TD::Zeros({2, 4}), TD::Zeros({2})), std::invalid_argument);
}

TEST(LinearTest, GradCheck) {
  for (const Shape& s : {Shape{4}, Shape{3, 4}, Shape{6, 4}}) {
    Rng rng(70);
    const TD x = Random<double>(s, rng);
    const TD w = Random<double>({5, 4}, rng);
    const TD b = Random<double>({5}, rng);
    Tape<double> probe;
    const auto proj = RandomWeights(ad::Linear(probe, x, w, b).size(), rng);
    const auto r = FiniteDiffCheck(
        [&](Tape<double>& t) { return ad::WeightedSum<double>(t, ad::Linear(t, x, w, b), proj); },
        {{"x", x}, {"w", w}, {"b", b}});
    EXPECT_LT(r.max_relative_error, 1e-9);
  }
}

TEST(ConcatTest, OrderEmptyAndGradient) {
  Tape<double> tape;
  const TD a({2, 2}, {1, 2, 3, 4}, true);
  const TD b({2, 1}, {9, 8}, true);
  const TD y = ad::Concat(tape, a, b);
  EXPECT_EQ(std::vector<double>(y.value().begin(), y.value().end()),
            std::vector<double>({1, 2, 9, 3, 4, 8}));
  const TD e = ad::Concat(tape, a, TD::Zeros({2, 0}));
  EXPECT_EQ(std::vector<double>(e.value().begin(), e.value().end()),
            std::vector<double>(a.value().begin(), a.value().end()));
  tape.Backward(ad::WeightedSum<double>(tape, y, std::vector<double>{1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(std::vector<double>(a.grad().begin(), a.grad().end()),
            std::vector<double>({1, 2, 4, 5}));
  EXPECT_EQ(std::vector<double>(b.grad().begin(), b.grad().end()), std::vector<double>({3, 6}));
}

TEST(L1LossTest, HandValues) {
  Tape<double> tape;
  const TD p({2}, {1.0, 2.0});
  const TD q({2}, {1.5, 1.5});
  EXPECT_EQ(ad::L1Loss(tape, q, p).item(), 1.0);
  EXPECT_EQ(ad::L1Loss(tape, p, q).item(), 1.0);
  EXPECT_EQ(ad::L1Loss(tape, p, p).item(), 0.0);
  EXPECT_THROW(ad::L1Loss(tape, p, TD::Zeros({3})), std::invalid_argument);
}

TEST(L1LossTest, SubgradientAndBatchMean) {
  Tape<double> tape;
  const TD pred({2, 2}, {1.0, 5.0, 0.0, 2.0}, true);
  const TD target({2, 2}, {1.0, 3.0, 1.0, 2.0});
  const TD loss = ad::L1Loss(tape, pred, target);
  EXPECT_EQ(loss.item(), 1.5);
  tape.Backward(loss);
  EXPECT_EQ(std::vector<double>(pred.grad().begin(), pred.grad().end()),
            std::vector<double>({0.0, 0.5, -0.5, 0.0}));
}

TEST(BackwardTest, SumGivesOnes) {
  const TD x({2, 3}, std::vector<double>(6, 0.7), true);
  Tape<double> tape;
  tape.Backward(ad::Sum(tape, x));
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(BackwardTest, ChainOfLinearsAndDisconnectedParameter) {
  Rng rng(80);
  const TD x = Random<double>({3, 4}, rng, false);
  const TD w1 = Random<double>({5, 4}, rng), b1 = Random<double>({5}, rng);
  const TD w2 = Random<double>({2, 5}, rng), b2 = Random<double>({2}, rng);
  const TD unused = Random<double>({3}, rng);
  const auto r = FiniteDiffCheck(
      [&](Tape<double>& t) {
        return ad::Sum(t, ad::Linear(t, ad::Linear(t, x, w1, b1), w2, b2));
      },
      {{"w1", w1}, {"b1", b1}, {"w2", w2}, {"b2", b2}, {"unused", unused}});
  EXPECT_LT(r.max_relative_error, 1e-9);
  for (double g : unused.grad()) EXPECT_EQ(g, 0.0);
}

TEST(BackwardTest, SecondBackwardWithoutResetThrows) {
  const TD x({2}, {1.0, 2.0}, true);
  Tape<double> tape;
  const TD s = ad::Sum(tape, x);
  tape.Backward(s);
  EXPECT_THROW(tape.Backward(s), std::logic_error);
  tape.Reset();
  tape.Backward(ad::Sum(tape, x));
  EXPECT_EQ(x.grad()[0], 2.0);  // accumulated across the two passes
}

TEST(BackwardTest, NonFiniteCheckNamesTheOp) {
  Tape<double> tape;
  tape.set_check_finite(true);
  const TD x({1, 1}, {std::numeric_limits<double>::infinity()});
  EXPECT_THROW(ad::Linear(tape, x, TD({1, 1}, {0.0}), TD::Zeros({1})), std::runtime_error);
}

TEST(AdamTest, FirstStepIsLrTimesSign) {
  TF p({4}, {0.0f, 1.0f, -1.0f, 2.0f}, true);
  const std::vector<float> g = {0.3f, -2.0f, 1e-3f, -50.0f};
  std::copy(g.begin(), g.end(), p.mutable_grad().begin());
  AdamState<float> st;
  std::vector<TF> params = {p};
  AdamStep<float>(params, st);
  const float before[4] = {0.0f, 1.0f, -1.0f, 2.0f};
  for (size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(p.value()[i] - before[i], -5e-4 * (g[i] > 0 ? 1 : -1), 1e-7);
  }
  EXPECT_EQ(st.step, 1);
}

TEST(AdamTest, ZeroGradientLeavesParametersAndDecaysMoments) {
  TD p({2}, {1.0, -1.0}, true);
  std::vector<TD> params = {p};
  AdamState<double> st;
  p.mutable_grad()[0] = 1.0;
  p.mutable_grad()[1] = -1.0;
  AdamStep<double>(params, st);
  const std::vector<double> after(p.value().begin(), p.value().end());
  const double m0 = st.m[0][0], v0 = st.v[0][0];
  p.ZeroGrad();
  AdamStep<double>(params, st);
  EXPECT_EQ(st.m[0][0], 0.9 * m0);
  EXPECT_EQ(st.v[0][0], 0.999 * v0);
  // The moment still carries momentum, so only a zero history leaves p fixed.
  TD q({2}, {3.0, 4.0}, true);
  std::vector<TD> qs = {q};
  AdamState<double> fresh;
  q.mutable_grad();
  AdamStep<double>(qs, fresh);
  EXPECT_EQ(q.value()[0], 3.0);
  EXPECT_EQ(q.value()[1], 4.0);
  EXPECT_NE(after[0], p.value()[0]);
}

TEST(AdamTest, ShapeMismatchThrows) {
  TD p({2}, {1.0, 2.0}, true);
  std::vector<TD> params = {p};
  AdamState<double> st;
  st.m = {{0.0}};
  st.v = {{0.0}};
  EXPECT_THROW(AdamStep<double>(params, st), std::invalid_argument);
}

TEST(AdamTest, DeterministicTrajectories) {
  auto run = [] {
    Rng rng(90);
    TF w = Random<float>({3, 2}, rng);
    const TF b = Random<float>({3}, rng);
    const TF x = Random<float>({4, 2}, rng, false);
    const TF y = Random<float>({4, 3}, rng, false);
    AdamState<float> st;
    std::vector<TF> params = {w, b};
    for (int step = 0; step < 20; ++step) {
      for (auto& p : params) p.ZeroGrad();
      Tape<float> tape;
      tape.Backward(ad::L1Loss(tape, ad::Linear(tape, x, w, b), y));
      AdamStep<float>(params, st);
    }
    return std::vector<float>(w.value().begin(), w.value().end());
  };
  EXPECT_EQ(run(), run());
}

TEST(FiniteDiffCheckTest, ReportsWorstParameter) {
  Rng rng(100);
  const TD a = Random<double>({3}, rng);
  const TD b = Random<double>({3}, rng);
  // b[1] enters through a constant the tape does not track, so its analytic
  // gradient is wrong.
  const auto r = FiniteDiffCheck(
      [&](Tape<double>& t) {
        const TD hidden({1}, {10.0 * b.value()[1]});
        return ad::Sum(t, ad::Concat(t, a, hidden));
      },
      {{"a", a}, {"b", b}});
  EXPECT_EQ(r.worst_param, "b");
  EXPECT_EQ(r.worst_index, 1u);
  EXPECT_GT(r.max_relative_error, 0.5);
}

TEST(CheckpointTest, BitExactRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path();
  Checkpoint c;
  c.config = "arch=dinn\nscale=toy\n";
  c.config_hash = HashConfig(c.config);
  const std::vector<float> f = {1.0f, -0.0f, 3.4028235e38f, 1.17549435e-38f, 0.1f, -7.5f};
  const std::vector<double> d = {0.1, -2.0, 1e-300};
  const std::vector<int64_t> i = {42, -1};
  c.arrays.push_back(NamedArray::Floats("conv1.w", {2, 3}, f));
  c.arrays.push_back(NamedArray::Doubles("x", {3}, d));
  c.arrays.push_back(NamedArray::Ints("step", i));
  SaveCheckpoint(c, dir / "pssl_ckpt_test.bin");
  const Checkpoint back = LoadCheckpoint(dir / "pssl_ckpt_test.bin");
  EXPECT_EQ(back.config, c.config);
  EXPECT_EQ(back.config_hash, c.config_hash);
  ASSERT_EQ(back.arrays.size(), 3u);
  EXPECT_EQ(back.Get("conv1.w").shape, (std::vector<uint64_t>{2, 3}));
  EXPECT_EQ(back.Get("conv1.w").payload, c.arrays[0].payload);
  EXPECT_TRUE(std::signbit(back.Get("conv1.w").AsFloats()[1]));
  EXPECT_EQ(back.Get("x").AsDoubles(), d);
  EXPECT_EQ(back.Get("step").AsInts(), i);
  EXPECT_THROW(back.Get("missing"), std::invalid_argument);
  EXPECT_THROW(back.Get("x").AsFloats(), std::invalid_argument);
}

TEST(CheckpointTest, CorruptFilesAreRejected) {
  const auto p = std::filesystem::temp_directory_path() / "pssl_ckpt_bad.bin";
  std::ofstream(p) << "not a checkpoint";
  EXPECT_THROW(LoadCheckpoint(p), std::runtime_error);
  Checkpoint c;
  c.config = "a";
  c.config_hash = 1;  // wrong
  SaveCheckpoint(c, p);
  EXPECT_THROW(LoadCheckpoint(p), std::runtime_error);
  EXPECT_THROW(LoadCheckpoint(p.string() + ".missing"), std::runtime_error);
}

}  // namespace
}  // namespace pssl
