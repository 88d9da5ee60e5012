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

#ifndef PSSL_SCENE_METADATA_H_
#define PSSL_SCENE_METADATA_H_

#include <string>
#include <string_view>
#include <vector>

#include "pssl/room/room.h"

namespace pssl {

// Which metadata categories are fed to a model. Masked categories are
// dropped from the vector, never zero-filled.
struct MetadataMask {
  bool mic_coords = true;
  bool room_dims = true;
  bool rt60 = true;

  static MetadataMask Full() { return {}; }
  static MetadataMask None() { return {false, false, false}; }

  bool empty() const { return !mic_coords && !room_dims && !rt60; }
  // Vector length for a scene with `num_mics` microphones.
  size_t Dimension(size_t num_mics) const;

  // "mic+room+rt60", "mic", "none", ...
  std::string ToString() const;
  static MetadataMask Parse(std::string_view text);

  friend bool operator==(const MetadataMask&, const MetadataMask&) = default;
};

// Field order: m1x, m1y, ..., mMx, mMy, dx, dy, rt60 (masked fields omitted).
// Raw physical units: metres and seconds.
struct MetadataVector {
  std::vector<double> values;
  std::vector<std::string> fields;
  MetadataMask mask;

  size_t size() const { return values.size(); }
  // Index of a named field, or -1 when masked out.
  int IndexOf(std::string_view field) const;
};

MetadataVector BuildMetadataVector(const Scene& scene, const MetadataMask& mask);

}  // namespace pssl

#endif  // PSSL_SCENE_METADATA_H_
