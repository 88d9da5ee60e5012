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

#include "pssl/room/room.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "pssl/signal/fft.h"

namespace pssl {
namespace {

// 24 ln(10) / c: the Sabine constant for the given speed of sound.
double SabineConstant(double speed_of_sound) {
  return 24.0 * std::log(10.0) / speed_of_sound;
}

// Adds amplitude * windowed-sinc centred at `delay` into `taps`.
void AddFractionalImpulse(std::vector<double>& taps, double delay, double amplitude) {
  constexpr int kHalf = kFractionalDelayTaps / 2;
  const int first = static_cast<int>(std::ceil(delay - kHalf));
  const int last = static_cast<int>(std::floor(delay + kHalf));
  // sin(pi (k - d)) alternates sign in k, so one sin per image suffices.
  const double t0 = first - delay;
  double sin_t = std::sin(std::numbers::pi * t0);
  // Hann window 0.5 (1 + cos(2 pi t / W)) over |t| <= W/2, W = taps count.
  const double step = 2.0 * std::numbers::pi / kFractionalDelayTaps;
  const double cos_step = std::cos(step), sin_step = std::sin(step);
  double cos_w = std::cos(step * t0), sin_w = std::sin(step * t0);
  for (int k = first; k <= last; ++k) {
    const double t = k - delay;
    if (k >= 0 && static_cast<size_t>(k) < taps.size()) {
      const double sinc =
          std::abs(t) < 1e-12 ? 1.0 : sin_t / (std::numbers::pi * t);
      taps[k] += amplitude * sinc * 0.5 * (1.0 + cos_w);
    }
    sin_t = -sin_t;
    const double c = cos_w * cos_step - sin_w * sin_step;
    sin_w = sin_w * cos_step + cos_w * sin_step;
    cos_w = c;
  }
}

struct Image {
  double distance;
  int order;
};

std::vector<Image> EnumerateImages(const Room& room, const Point3& src, const Point3& mic,
                                   int max_order) {
  std::vector<Image> images;
  const int n_max = max_order / 2 + 1;
  const std::array<double, 3> dims = {room.width, room.length, room.height};
  const std::array<double, 3> s = {src.x, src.y, src.z};
  const std::array<double, 3> m = {mic.x, mic.y, mic.z};
  for (int qx = 0; qx <= 1; ++qx)
    for (int qy = 0; qy <= 1; ++qy)
      for (int qz = 0; qz <= 1; ++qz)
        for (int nx = -n_max; nx <= n_max; ++nx)
          for (int ny = -n_max; ny <= n_max; ++ny)
            for (int nz = -n_max; nz <= n_max; ++nz) {
              const std::array<int, 3> q = {qx, qy, qz};
              const std::array<int, 3> n = {nx, ny, nz};
              int order = 0;
              double d2 = 0.0;
              for (int a = 0; a < 3; ++a) {
                order += std::abs(2 * n[a] - q[a]);
                const double img = (1 - 2 * q[a]) * s[a] + 2.0 * n[a] * dims[a];
                d2 += (img - m[a]) * (img - m[a]);
              }
              if (order > max_order) continue;
              images.push_back({std::sqrt(d2), order});
            }
  return images;
}

size_t RirLength(const std::vector<Image>& images, double samples_per_metre) {
  double max_distance = 0.0;
  for (const Image& im : images) max_distance = std::max(max_distance, im.distance);
  return static_cast<size_t>(std::ceil(max_distance * samples_per_metre)) +
         kFractionalDelayTaps / 2 + 2;
}

}  // namespace

double AbsorptionFromRt60(const Room& room, double speed_of_sound) {
  if (!(room.rt60 > 0.0)) throw std::invalid_argument("AbsorptionFromRt60: rt60 must be > 0");
  const double k = SabineConstant(speed_of_sound) * room.volume() / room.surface_area();
  const double alpha = k / room.rt60;
  if (alpha > 1.0) {
    std::ostringstream msg;
    msg << "rt60 " << room.rt60 << " s is not achievable in a " << room.width << "x"
        << room.length << "x" << room.height << " m room; minimum is " << k << " s";
    throw std::invalid_argument(msg.str());
  }
  return alpha;
}

double ReflectionCoefficient(const Room& room, double speed_of_sound) {
  if (room.rt60 == 0.0) return 0.0;
  return std::sqrt(1.0 - AbsorptionFromRt60(room, speed_of_sound));
}

int MaxOrderForRoom(const Room& room, double speed_of_sound) {
  if (room.rt60 == 0.0) return 0;
  const double order =
      std::ceil(speed_of_sound * room.rt60 / std::min(room.width, room.length));
  return std::min(kMaxReflectionOrder, static_cast<int>(order));
}

static void ValidateGeometry(const Room& room, const Point3& src, const Point3& mic) {
  if (src == mic) throw std::invalid_argument("SimulateRir: source and microphone coincide");
  if (!room.Contains(src) || !room.Contains(mic)) {
    throw std::invalid_argument("SimulateRir: source or microphone outside the room");
  }
}

RoomImpulseResponse SimulateRir(const Room& room, const Point3& src, const Point3& mic,
                                int max_order, double beta,
                                const SimulationOptions& options) {
  ValidateGeometry(room, src, mic);
  if (max_order < 0) throw std::invalid_argument("SimulateRir: negative max_order");
  if (beta < 0.0 || beta > 1.0) throw std::invalid_argument("SimulateRir: beta not in [0,1]");

  const double samples_per_metre = options.sample_rate / options.speed_of_sound;
  const std::vector<Image> images = EnumerateImages(room, src, mic, max_order);
  std::vector<double> taps(RirLength(images, samples_per_metre), 0.0);
  for (const Image& im : images) {
    const double gain = std::pow(beta, im.order) / (4.0 * std::numbers::pi * im.distance);
    if (gain == 0.0) continue;
    AddFractionalImpulse(taps, im.distance * samples_per_metre, gain);
  }
  RoomImpulseResponse rir;
  rir.taps = MonoSignal(std::move(taps), options.sample_rate);
  rir.direct_path_delay = Distance(src, mic) * samples_per_metre;
  return rir;
}

PerOrderResponse SimulatePerOrder(const Room& room, const Point3& src, const Point3& mic,
                                  int max_order, const SimulationOptions& options) {
  ValidateGeometry(room, src, mic);
  const double samples_per_metre = options.sample_rate / options.speed_of_sound;
  const std::vector<Image> images = EnumerateImages(room, src, mic, max_order);
  PerOrderResponse out;
  out.sample_rate = options.sample_rate;
  out.by_order.assign(max_order + 1,
                      std::vector<double>(RirLength(images, samples_per_metre), 0.0));
  for (const Image& im : images) {
    AddFractionalImpulse(out.by_order[im.order], im.distance * samples_per_metre,
                         1.0 / (4.0 * std::numbers::pi * im.distance));
  }
  return out;
}

MonoSignal PerOrderResponse::Combine(double beta) const {
  std::vector<double> taps(by_order.empty() ? 0 : by_order[0].size(), 0.0);
  double g = 1.0;
  for (const auto& h : by_order) {
    for (size_t i = 0; i < taps.size(); ++i) taps[i] += g * h[i];
    g *= beta;
  }
  return MonoSignal(std::move(taps), sample_rate);
}

double CalibratedReflectionCoefficient(const Room& room, const SimulationOptions& options) {
  if (room.rt60 == 0.0) return 0.0;
  const double sabine_beta = ReflectionCoefficient(room, options.speed_of_sound);
  // Reference pair derived from the room alone, away from walls and from
  // each other.
  const Point3 src{0.31 * room.width, 0.37 * room.length, 0.5 * room.height};
  const Point3 mic{0.73 * room.width, 0.68 * room.length, 0.5 * room.height};
  const PerOrderResponse parts =
      SimulatePerOrder(room, src, mic, MaxOrderForRoom(room, options.speed_of_sound), options);
  const auto measured = [&](double beta) {
    try {
      return MeasureRt60(parts.Combine(beta));
    } catch (const std::invalid_argument&) {
      return 0.0;
    }
  };
  // Measured decay time increases with beta; bisect on [0, 1).
  double lo = 0.0, hi = std::min(1.0 - 1e-9, std::max(sabine_beta, 0.5) + 0.2);
  if (measured(hi) < room.rt60) hi = 1.0 - 1e-9;
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (measured(mid) < room.rt60) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

RoomImpulseResponse SimulateRir(const Room& room, const Point3& src, const Point3& mic,
                                const SimulationOptions& options) {
  return SimulateRir(room, src, mic, MaxOrderForRoom(room, options.speed_of_sound),
                     CalibratedReflectionCoefficient(room, options), options);
}

MultichannelAudio RenderScene(const Scene& scene, const MonoSignal& source_signal,
                              Rng& rng, const SimulationOptions& options) {
  if (source_signal.sample_rate() != options.sample_rate) {
    throw std::invalid_argument("RenderScene: source signal sample rate mismatch");
  }
  const Point3 src = scene.source3();
  const int max_order = MaxOrderForRoom(scene.room, options.speed_of_sound);
  const double beta = CalibratedReflectionCoefficient(scene.room, options);
  std::vector<MonoSignal> channels;
  channels.reserve(scene.mics.size());
  for (size_t i = 0; i < scene.mics.size(); ++i) {
    const RoomImpulseResponse rir = SimulateRir(scene.room, src, scene.mic3(i), max_order, beta, options);
    std::vector<double> y = FftConvolve(source_signal.samples(), rir.taps.samples());
    y.resize(source_signal.size());
    if (options.gain_jitter > 0.0) {
      const double g = 1.0 + options.gain_jitter * StandardNormal(rng);
      for (double& v : y) v *= g;
    }
    channels.emplace_back(std::move(y), options.sample_rate);
  }
  return AddNoiseAtSnr(MultichannelAudio(std::move(channels)), scene.snr_db, rng);
}

double MeasureRt60(const MonoSignal& impulse_response) {
  const auto h = impulse_response.samples();
  if (h.empty()) throw std::invalid_argument("MeasureRt60: empty impulse response");
  std::vector<double> edc(h.size());
  double acc = 0.0;
  for (size_t i = h.size(); i-- > 0;) {
    acc += h[i] * h[i];
    edc[i] = acc;
  }
  if (!(acc > 0.0)) throw std::invalid_argument("MeasureRt60: zero-energy impulse response");
  const auto db = [&](size_t i) { return 10.0 * std::log10(edc[i] / acc); };

  size_t start = h.size(), stop = h.size();
  for (size_t i = 0; i < h.size(); ++i) {
    if (start == h.size() && db(i) <= -5.0) start = i;
    if (db(i) <= -25.0) {
      stop = i;
      break;
    }
  }
  const int fs = impulse_response.sample_rate();
  if (stop == h.size() || !std::isfinite(db(stop)) ||
      static_cast<double>(stop - start) < fs / 1000.0) {
    throw std::invalid_argument(
        "MeasureRt60: insufficient decay range (need -5..-25 dB over >= 1 ms)");
  }
  // Least-squares slope of level (dB) against time (s).
  double st = 0.0, sl = 0.0, stt = 0.0, stl = 0.0;
  const double n = static_cast<double>(stop - start + 1);
  for (size_t i = start; i <= stop; ++i) {
    const double t = static_cast<double>(i) / fs;
    const double l = db(i);
    st += t;
    sl += l;
    stt += t * t;
    stl += t * l;
  }
  const double slope = (n * stl - st * sl) / (n * stt - st * st);
  if (!(slope < 0.0)) throw std::invalid_argument("MeasureRt60: non-decaying curve");
  return -60.0 / slope;
}

double MeasureRt60(const RoomImpulseResponse& rir) { return MeasureRt60(rir.taps); }

}  // namespace pssl
