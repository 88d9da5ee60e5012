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

#ifndef PSSL_ROOM_ROOM_H_
#define PSSL_ROOM_ROOM_H_

#include <cmath>
#include <vector>

#include "pssl/signal/random.h"
#include "pssl/signal/signal.h"

namespace pssl {

inline constexpr double kSpeedOfSound = 343.0;  // m/s at 20 C
inline constexpr double kRoomHeight = 3.0;
inline constexpr double kMicHeight = 1.5;
inline constexpr double kSourceHeight = 1.5;
// Length of the windowed-sinc fractional delay filter.
inline constexpr int kFractionalDelayTaps = 81;
inline constexpr int kMaxReflectionOrder = 80;

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Point3&, const Point3&) = default;
};

inline double Distance(const Point2& a, const Point2& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

inline double Distance(const Point3& a, const Point3& b) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) +
                   (a.z - b.z) * (a.z - b.z));
}

// Shoebox room. rt60 == 0 means anechoic.
struct Room {
  double width = 0.0;   // x extent, metres
  double length = 0.0;  // y extent, metres
  double height = kRoomHeight;
  double rt60 = 0.0;    // seconds

  double volume() const { return width * length * height; }
  double surface_area() const {
    return 2.0 * (width * length + width * height + length * height);
  }
  bool Contains(const Point3& p) const {
    return p.x > 0.0 && p.x < width && p.y > 0.0 && p.y < length && p.z > 0.0 &&
           p.z < height;
  }
  bool Contains(const Point2& p) const {
    return p.x > 0.0 && p.x < width && p.y > 0.0 && p.y < length;
  }
};

// One localization sample: planar geometry plus fixed heights. The planar
// coordinates are what the localizers estimate; rendering is 3-D.
struct Scene {
  Room room;
  std::vector<Point2> mics;
  Point2 source;
  double mic_height = kMicHeight;
  double source_height = kSourceHeight;
  double snr_db = 30.0;

  Point3 mic3(size_t i) const { return {mics.at(i).x, mics.at(i).y, mic_height}; }
  Point3 source3() const { return {source.x, source.y, source_height}; }
};

struct RoomImpulseResponse {
  MonoSignal taps;
  double direct_path_delay = 0.0;  // samples
};

struct SimulationOptions {
  double speed_of_sound = kSpeedOfSound;
  int sample_rate = kCanonicalSampleRate;
  // Per-microphone gain jitter standard deviation (linear, relative). Off by
  // default; models imperfectly calibrated microphones.
  double gain_jitter = 0.0;
};

// Inverse Sabine: alpha = (24 ln 10 / c) V / (S rt60). Throws
// std::invalid_argument if rt60 <= 0 or if the result exceeds 1, in which case
// the message reports the minimum achievable rt60 for the room.
double AbsorptionFromRt60(const Room& room, double speed_of_sound = kSpeedOfSound);

// Wall reflection coefficient used by the simulator: sqrt(1 - alpha) for a
// reverberant room, 0 for an anechoic one.
double ReflectionCoefficient(const Room& room, double speed_of_sound = kSpeedOfSound);

// ceil(c rt60 / min(width, length)) capped at kMaxReflectionOrder; 0 when
// anechoic.
int MaxOrderForRoom(const Room& room, double speed_of_sound = kSpeedOfSound);

// Allen-Berkley image source method with uniform reflection coefficient
// `beta` on all six surfaces. Each image contributes
// beta^order / (4 pi r) at delay r / c through an 81-tap Hann-windowed sinc.
RoomImpulseResponse SimulateRir(const Room& room, const Point3& src, const Point3& mic,
                                int max_order, double beta,
                                const SimulationOptions& options = {});

// Image-source response split by reflection order (without the beta^order
// factor), so the response for any beta is a cheap weighted sum.
struct PerOrderResponse {
  int sample_rate = kCanonicalSampleRate;
  std::vector<std::vector<double>> by_order;

  MonoSignal Combine(double beta) const;
};

PerOrderResponse SimulatePerOrder(const Room& room, const Point3& src, const Point3& mic,
                                  int max_order, const SimulationOptions& options = {});

// Reflection coefficient for which the simulator's Schroeder decay time
// matches room.rt60. Uniform-absorption shoebox responses decay more slowly
// than the inverse-Sabine coefficient predicts, so the Sabine value is only a
// starting point; the coefficient is found by bisection on a reference
// source/microphone pair that depends on the room alone. 0 when anechoic.
double CalibratedReflectionCoefficient(const Room& room,
                                       const SimulationOptions& options = {});

// Convenience overload using MaxOrderForRoom and the calibrated coefficient.
RoomImpulseResponse SimulateRir(const Room& room, const Point3& src, const Point3& mic,
                                const SimulationOptions& options = {});

// y_i = h_i * s (truncated to the length of s) plus WGN at scene.snr_db. All
// channels share time origin zero at emission.
MultichannelAudio RenderScene(const Scene& scene, const MonoSignal& source_signal,
                              Rng& rng, const SimulationOptions& options = {});

// Schroeder backward integration, least-squares line over the -5..-25 dB
// span of the decay curve, extrapolated to 60 dB. Throws
// std::invalid_argument if the curve does not provide that span over at least
// one millisecond.
double MeasureRt60(const RoomImpulseResponse& rir);
double MeasureRt60(const MonoSignal& impulse_response);

}  // namespace pssl

#endif  // PSSL_ROOM_ROOM_H_
