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

#ifndef PSSL_SCENE_SAMPLING_H_
#define PSSL_SCENE_SAMPLING_H_

#include <array>

#include "pssl/room/room.h"
#include "pssl/signal/random.h"

namespace pssl {

// Microphones are stored in this wall order.
enum class Wall { kNorth = 0, kSouth = 1, kEast = 2, kWest = 3 };
inline constexpr std::array<Wall, 4> kWallOrder = {Wall::kNorth, Wall::kSouth, Wall::kEast,
                                                   Wall::kWest};

const char* WallName(Wall wall);

// Nearest wall of a planar point. North is y = length, east is x = width.
Wall NearestWall(const Room& room, const Point2& p);

struct SceneRanges {
  double room_min = 3.0;
  double room_max = 6.0;
  double mic_wall_offset = 0.5;
  double source_margin = 0.5;
  double rt60_min = 0.3;
  double rt60_max = 0.6;
  double snr_db = 30.0;
};

// Room sides ~ U[room_min, room_max]; one microphone uniformly placed on each
// segment parallel to a wall at mic_wall_offset (N, S, E, W order); source
// uniform with source_margin to every wall; anechoic.
Scene SampleAnechoicScene(Rng& rng, const SceneRanges& ranges = {});

// As above with rt60 ~ U[rt60_min, rt60_max].
Scene SampleReverberantScene(Rng& rng, const SceneRanges& ranges = {});

}  // namespace pssl

#endif  // PSSL_SCENE_SAMPLING_H_
