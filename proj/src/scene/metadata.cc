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

#include "pssl/scene/metadata.h"

#include <stdexcept>

namespace pssl {

size_t MetadataMask::Dimension(size_t num_mics) const {
  return (mic_coords ? 2 * num_mics : 0) + (room_dims ? 2 : 0) + (rt60 ? 1 : 0);
}

std::string MetadataMask::ToString() const {
  if (empty()) return "none";
  std::string out;
  auto add = [&out](const char* part) {
    if (!out.empty()) out += '+';
    out += part;
  };
  if (mic_coords) add("mic");
  if (room_dims) add("room");
  if (rt60) add("rt60");
  return out;
}

MetadataMask MetadataMask::Parse(std::string_view text) {
  if (text == "none") return None();
  if (text == "full" || text == "all") return Full();
  MetadataMask mask = None();
  size_t start = 0;
  while (start <= text.size()) {
    size_t end = text.find('+', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view part = text.substr(start, end - start);
    if (part == "mic") {
      mask.mic_coords = true;
    } else if (part == "room") {
      mask.room_dims = true;
    } else if (part == "rt60") {
      mask.rt60 = true;
    } else {
      throw std::invalid_argument("unknown metadata field group '" + std::string(part) +
                                  "' (expected mic, room, rt60, none or full)");
    }
    start = end + 1;
  }
  return mask;
}

int MetadataVector::IndexOf(std::string_view field) const {
  for (size_t i = 0; i < fields.size(); ++i) {
    if (fields[i] == field) return static_cast<int>(i);
  }
  return -1;
}

MetadataVector BuildMetadataVector(const Scene& scene, const MetadataMask& mask) {
  MetadataVector out;
  out.mask = mask;
  if (mask.mic_coords) {
    for (size_t i = 0; i < scene.mics.size(); ++i) {
      const std::string n = std::to_string(i + 1);
      out.values.push_back(scene.mics[i].x);
      out.fields.push_back("m" + n + "x");
      out.values.push_back(scene.mics[i].y);
      out.fields.push_back("m" + n + "y");
    }
  }
  if (mask.room_dims) {
    out.values.push_back(scene.room.width);
    out.fields.push_back("dx");
    out.values.push_back(scene.room.length);
    out.fields.push_back("dy");
  }
  if (mask.rt60) {
    out.values.push_back(scene.room.rt60);
    out.fields.push_back("rt60");
  }
  return out;
}

}  // namespace pssl
