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
#include <complex>
#include <filesystem>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "pssl/signal/fft.h"
#include "pssl/signal/signal.h"
#include "pssl/signal/wav.h"

namespace pssl {
namespace {

MonoSignal Cosine(size_t n, double freq, int fs) {
  std::vector<double> x(n);
  for (size_t t = 0; t < n; ++t) x[t] = std::cos(2.0 * std::numbers::pi * freq * t / fs);
  return MonoSignal(std::move(x), fs);
}

TEST(StftTest, FrameCountForHalfSecond) {
  Rng rng(1);
  const MonoSignal x = WhiteNoise(8000, rng);
  const Spectrogram s = Stft(x, 1024, 512);
  // 1 + floor((8000 - 1024) / 512) = 1 + 13.
  EXPECT_EQ(s.num_frames, 14u);
  EXPECT_EQ(s.num_bins, 513u);
}

TEST(StftTest, ShortSignalIsAnError) {
  const MonoSignal x(std::vector<double>(1023, 0.0), 16000);
  EXPECT_THROW(Stft(x, 1024, 512), std::invalid_argument);
}

TEST(StftTest, CosineAtBinFrequencyPeaksAtThatBin) {
  constexpr int kBin = 37;
  const MonoSignal x = Cosine(4096, kBin * 16000.0 / 1024, 16000);
  const Spectrogram s = Stft(x, 1024, 512, Window::kRectangular);
  for (size_t l = 0; l < s.num_frames; ++l) {
    size_t best = 0;
    for (size_t k = 0; k < s.num_bins; ++k) {
      if (std::abs(s.at(l, k)) > std::abs(s.at(l, best))) best = k;
    }
    EXPECT_EQ(best, static_cast<size_t>(kBin)) << "frame " << l;
  }
}

TEST(StftTest, ZeroSignalGivesZeroSpectrogram) {
  const MonoSignal x(std::vector<double>(2048, 0.0), 16000);
  const Spectrogram s = Stft(x, 1024, 512);
  for (const auto& b : s.bins) EXPECT_EQ(std::abs(b), 0.0);
}

TEST(StftTest, Linearity) {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const MonoSignal x = WhiteNoise(3000, rng);
    const MonoSignal y = WhiteNoise(3000, rng);
    const double a = Uniform(rng, -3, 3), b = Uniform(rng, -3, 3);
    std::vector<double> z(3000);
    for (size_t t = 0; t < z.size(); ++t) z[t] = a * x.samples()[t] + b * y.samples()[t];
    const Spectrogram sx = Stft(x, 1024, 512), sy = Stft(y, 1024, 512);
    const Spectrogram sz = Stft(MonoSignal(z, 16000), 1024, 512);
    for (size_t i = 0; i < sz.bins.size(); ++i) {
      const std::complex<double> expected = a * sx.bins[i] + b * sy.bins[i];
      EXPECT_LE(std::abs(sz.bins[i] - expected), 1e-9 * (1.0 + std::abs(expected)));
    }
  }
}

TEST(StftTest, ParsevalOnNonOverlappingFrames) {
  Rng rng(3);
  const MonoSignal x = WhiteNoise(4096, rng);
  const Spectrogram s = Stft(x, 1024, 1024, Window::kRectangular);
  for (size_t l = 0; l < s.num_frames; ++l) {
    double e = 0.0;
    for (int n = 0; n < 1024; ++n) e += std::pow(x.samples()[l * 1024 + n], 2);
    EXPECT_NEAR(FrameEnergyFromSpectrum(s, l), e, 1e-6 * e);
  }
}

TEST(StackRealImagTest, ChannelLayoutAndRoundTrip) {
  Rng rng(4);
  std::vector<Spectrogram> specs;
  for (int m = 0; m < 4; ++m) specs.push_back(Stft(WhiteNoise(4000, rng), 1024, 512));
  const RealImagTensor t = StackRealImag(specs);
  EXPECT_EQ(t.num_channels, 8u);
  EXPECT_EQ(t.at(2, 3, 5), specs[2].at(3, 5).real());
  EXPECT_EQ(t.at(6, 3, 5), specs[2].at(3, 5).imag());
  const auto back = UnstackRealImag(t, 1024, 512, 16000);
  for (int m = 0; m < 4; ++m) EXPECT_EQ(back[m].bins, specs[m].bins);
}

TEST(StackRealImagTest, RealInputHasZeroImaginaryChannels) {
  Spectrogram s;
  s.num_frames = 2;
  s.num_bins = 3;
  s.n_dft = 4;
  s.hop = 2;
  s.bins = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
  const std::vector<Spectrogram> specs = {s, s};
  const RealImagTensor t = StackRealImag(specs);
  for (size_t c = 2; c < 4; ++c)
    for (size_t l = 0; l < 2; ++l)
      for (size_t f = 0; f < 3; ++f) EXPECT_EQ(t.at(c, l, f), 0.0);
}

TEST(StackRealImagTest, ShapeMismatchThrows) {
  Rng rng(5);
  const std::vector<Spectrogram> specs = {Stft(WhiteNoise(4000, rng), 1024, 512),
                                          Stft(WhiteNoise(5000, rng), 1024, 512)};
  EXPECT_THROW(StackRealImag(specs), std::invalid_argument);
}

TEST(WhiteNoiseTest, DeterministicUnderSeed) {
  Rng a(42), b(42);
  const MonoSignal x = WhiteNoise(1000, a);
  const MonoSignal y = WhiteNoise(1000, b);
  EXPECT_TRUE(std::equal(x.samples().begin(), x.samples().end(), y.samples().begin()));
}

TEST(WhiteNoiseTest, MomentsOverAMillionSamples) {
  Rng rng(7);
  const MonoSignal x = WhiteNoise(1000000, rng);
  double mean = 0.0;
  for (double v : x.samples()) mean += v;
  mean /= x.size();
  double var = 0.0;
  for (double v : x.samples()) var += (v - mean) * (v - mean);
  var /= x.size();
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_GE(var, 0.98);
  EXPECT_LE(var, 1.02);
}

TEST(WhiteNoiseTest, ZeroLengthThrows) {
  Rng rng(1);
  EXPECT_THROW(WhiteNoise(0, rng), std::invalid_argument);
}

MultichannelAudio TwoChannelNoise(uint64_t seed) {
  Rng rng(seed);
  return MultichannelAudio({WhiteNoise(8000, rng), WhiteNoise(8000, rng)});
}

TEST(AddNoiseAtSnrTest, ThirtyDbPerChannel) {
  const MultichannelAudio clean = TwoChannelNoise(8);
  Rng rng(9);
  const MultichannelAudio noisy = AddNoiseAtSnr(clean, 30.0, rng);
  for (size_t c = 0; c < 2; ++c) {
    std::vector<double> noise(clean.length());
    for (size_t t = 0; t < noise.size(); ++t) {
      noise[t] = noisy.channel(c).samples()[t] - clean.channel(c).samples()[t];
    }
    const double snr = SnrDb(clean.channel(c).samples(), noise);
    EXPECT_GE(snr, 29.9);
    EXPECT_LE(snr, 30.1);
  }
}

TEST(AddNoiseAtSnrTest, NoiselessSentinelReturnsInput) {
  const MultichannelAudio clean = TwoChannelNoise(10);
  Rng rng(11);
  const MultichannelAudio out = AddNoiseAtSnr(clean, kNoiselessSnr, rng);
  for (size_t c = 0; c < 2; ++c) {
    EXPECT_TRUE(std::equal(out.channel(c).samples().begin(), out.channel(c).samples().end(),
                           clean.channel(c).samples().begin()));
  }
}

TEST(AddNoiseAtSnrTest, ZeroDbMatchesEnergies) {
  const MultichannelAudio clean = TwoChannelNoise(12);
  Rng rng(13);
  const MultichannelAudio noisy = AddNoiseAtSnr(clean, 0.0, rng);
  double en = 0.0;
  for (size_t t = 0; t < clean.length(); ++t) {
    en += std::pow(noisy.channel(0).samples()[t] - clean.channel(0).samples()[t], 2);
  }
  EXPECT_NEAR(en, clean.channel(0).energy(), 0.01 * clean.channel(0).energy());
}

TEST(AddNoiseAtSnrTest, ZeroEnergyChannelThrows) {
  Rng rng(14);
  const MultichannelAudio clean({WhiteNoise(100, rng), MonoSignal(std::vector<double>(100), 16000)});
  EXPECT_THROW(AddNoiseAtSnr(clean, 30.0, rng), std::invalid_argument);
}

TEST(SignalTest, RejectsNonFiniteSamples) {
  EXPECT_THROW(MonoSignal({1.0, NAN}, 16000), std::invalid_argument);
  EXPECT_THROW(MonoSignal({1.0}, 0), std::invalid_argument);
}

TEST(FftTest, ConvolutionMatchesDirectSum) {
  const std::vector<double> a = {1, 2, 3, 4};
  const std::vector<double> b = {0.5, -1, 2};
  const std::vector<double> y = FftConvolve(a, b);
  ASSERT_EQ(y.size(), 6u);
  for (size_t n = 0; n < y.size(); ++n) {
    double direct = 0.0;
    for (size_t k = 0; k < b.size(); ++k) {
      if (n >= k && n - k < a.size()) direct += a[n - k] * b[k];
    }
    EXPECT_NEAR(y[n], direct, 1e-12);
  }
}

class WavTest : public ::testing::Test {
 protected:
  std::filesystem::path dir_ = std::filesystem::temp_directory_path() / "pssl_wav_test";
  void SetUp() override { std::filesystem::create_directories(dir_); }
  void TearDown() override { std::filesystem::remove_all(dir_); }
};

TEST_F(WavTest, Float32MultichannelRoundTrip) {
  Rng rng(15);
  std::vector<MonoSignal> chans;
  for (int c = 0; c < 4; ++c) {
    std::vector<double> x(500);
    for (double& v : x) v = static_cast<float>(0.1 * StandardNormal(rng));
    chans.emplace_back(std::move(x), 16000);
  }
  const MultichannelAudio audio(chans);
  WriteWav(dir_ / "a.wav", audio, WavFormat::kFloat32);
  const MultichannelAudio back = ReadWav(dir_ / "a.wav");
  ASSERT_EQ(back.num_channels(), 4u);
  for (size_t c = 0; c < 4; ++c) {
    for (size_t t = 0; t < 500; ++t) {
      EXPECT_EQ(back.channel(c).samples()[t], audio.channel(c).samples()[t]);
    }
  }
}

TEST_F(WavTest, Pcm16MonoRoundTripWithinQuantization) {
  std::vector<double> x = {0.0, 0.5, -0.5, 0.99, -0.99};
  WriteWav(dir_ / "b.wav", MonoSignal(x, 16000), WavFormat::kPcm16);
  const MultichannelAudio back = ReadWav(dir_ / "b.wav");
  ASSERT_EQ(back.num_channels(), 1u);
  for (size_t t = 0; t < x.size(); ++t) {
    EXPECT_NEAR(back.channel(0).samples()[t], x[t], 1.0 / 32767);
  }
}

TEST_F(WavTest, SampleRateMismatchIsAnError) {
  WriteWav(dir_ / "c.wav", MonoSignal({0.1, 0.2}, 8000));
  EXPECT_THROW(ReadWav(dir_ / "c.wav"), std::runtime_error);
  EXPECT_NO_THROW(ReadWav(dir_ / "c.wav", 8000));
}

}  // namespace
}  // namespace pssl
