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

#ifndef PSSL_AUTODIFF_CHECKPOINT_H_
#define PSSL_AUTODIFF_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pssl {

enum class DType : uint8_t { kFloat32 = 1, kFloat64 = 2, kInt64 = 3 };

struct NamedArray {
  std::string name;
  DType dtype = DType::kFloat32;
  std::vector<uint64_t> shape;
  std::vector<uint8_t> payload;  // little-endian

  static NamedArray Floats(std::string name, std::vector<uint64_t> shape, std::span<const float> v);
  static NamedArray Doubles(std::string name, std::vector<uint64_t> shape,
                            std::span<const double> v);
  static NamedArray Ints(std::string name, std::span<const int64_t> v);

  // Throws std::invalid_argument on a dtype mismatch.
  std::vector<float> AsFloats() const;
  std::vector<double> AsDoubles() const;
  std::vector<int64_t> AsInts() const;
};

// File layout: "PSSLCKPT", u32 version, u64 config hash, u32 config length,
// config text, u32 array count, then per array: u32 name length, name,
// u8 dtype, u32 rank, u64 dims, u64 payload bytes, payload.
struct Checkpoint {
  uint64_t config_hash = 0;
  std::string config;
  std::vector<NamedArray> arrays;

  bool Has(std::string_view name) const;
  // Throws std::invalid_argument when absent.
  const NamedArray& Get(std::string_view name) const;
};

// 64-bit FNV-1a.
uint64_t HashConfig(std::string_view text);

void SaveCheckpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
// Throws std::runtime_error on I/O failure or a malformed file.
Checkpoint LoadCheckpoint(const std::filesystem::path& path);

}  // namespace pssl

#endif  // PSSL_AUTODIFF_CHECKPOINT_H_
