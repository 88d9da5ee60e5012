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

#include "pssl/scene/sampling.h"

#include <stdexcept>

namespace pssl {

const char* WallName(Wall wall) {
  switch (wall) {
    case Wall::kNorth:
      return "north";
    case Wall::kSouth:
      return "south";
    case Wall::kEast:
      return "east";
    case Wall::kWest:
      return "west";
  }
  return "?";
}

Wall NearestWall(const Room& room, const Point2& p) {
  const double d[4] = {room.length - p.y, p.y, room.width - p.x, p.x};
  int best = 0;
  for (int i = 1; i < 4; ++i) {
    if (d[i] < d[best]) best = i;
  }
  return static_cast<Wall>(best);
}

namespace {

void CheckRanges(const SceneRanges& r) {
  if (!(r.room_min > 0.0 && r.room_max >= r.room_min)) {
    throw std::invalid_argument("room size range must satisfy 0 < min <= max");
  }
  if (2.0 * r.mic_wall_offset >= r.room_min || 2.0 * r.source_margin >= r.room_min) {
    throw std::invalid_argument("wall offsets leave no room interior");
  }
  if (r.mic_wall_offset < 0.0 || r.source_margin < 0.0) {
    throw std::invalid_argument("wall offsets must be non-negative");
  }
}

}  // namespace

Scene SampleAnechoicScene(Rng& rng, const SceneRanges& ranges) {
  CheckRanges(ranges);
  Scene s;
  s.room.width = Uniform(rng, ranges.room_min, ranges.room_max);
  s.room.length = Uniform(rng, ranges.room_min, ranges.room_max);
  s.room.rt60 = 0.0;
  s.snr_db = ranges.snr_db;

  const double w = s.room.width;
  const double l = s.room.length;
  const double o = ranges.mic_wall_offset;
  s.mics.resize(4);
  s.mics[0] = {Uniform(rng, o, w - o), l - o};  // north
  s.mics[1] = {Uniform(rng, o, w - o), o};      // south
  s.mics[2] = {w - o, Uniform(rng, o, l - o)};  // east
  s.mics[3] = {o, Uniform(rng, o, l - o)};      // west

  const double m = ranges.source_margin;
  s.source.x = Uniform(rng, m, w - m);
  s.source.y = Uniform(rng, m, l - m);
  return s;
}

Scene SampleReverberantScene(Rng& rng, const SceneRanges& ranges) {
  if (!(ranges.rt60_min > 0.0 && ranges.rt60_max >= ranges.rt60_min)) {
    throw std::invalid_argument("rt60 range must satisfy 0 < min <= max");
  }
  Scene s = SampleAnechoicScene(rng, ranges);
  s.room.rt60 = Uniform(rng, ranges.rt60_min, ranges.rt60_max);
  return s;
}

}  // namespace pssl
