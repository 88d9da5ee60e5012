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

#include "pssl/autodiff/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace pssl {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'P', 'S', 'S', 'L', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

template <typename V>
NamedArray Pack(std::string name, DType dtype, std::vector<uint64_t> shape, std::span<const V> v) {
  NamedArray a;
  a.name = std::move(name);
  a.dtype = dtype;
  a.shape = std::move(shape);
  uint64_t n = 1;
  for (uint64_t d : a.shape) n *= d;
  if (n != v.size()) throw std::invalid_argument("array '" + a.name + "' shape/value mismatch");
  a.payload.resize(v.size() * sizeof(V));
  if (!v.empty()) std::memcpy(a.payload.data(), v.data(), a.payload.size());
  return a;
}

template <typename V>
std::vector<V> Unpack(const NamedArray& a, DType want) {
  if (a.dtype != want) throw std::invalid_argument("array '" + a.name + "' has another dtype");
  std::vector<V> v(a.payload.size() / sizeof(V));
  if (!v.empty()) std::memcpy(v.data(), a.payload.data(), a.payload.size());
  return v;
}

size_t DTypeSize(DType t) {
  switch (t) {
    case DType::kFloat32:
      return 4;
    case DType::kFloat64:
    case DType::kInt64:
      return 8;
  }
  return 0;
}

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}
  template <typename V>
  void Put(V v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(V));
  }
  void Bytes(const void* p, size_t n) { out_.write(static_cast<const char*>(p), n); }

 private:
  std::ofstream& out_;
};

class Reader {
 public:
  Reader(std::ifstream& in, const std::string& path) : in_(in), path_(path) {}
  template <typename V>
  V Get() {
    V v{};
    Bytes(&v, sizeof(V));
    return v;
  }
  void Bytes(void* p, size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in_) throw std::runtime_error("truncated checkpoint '" + path_ + "'");
  }
  std::string String(size_t limit) {
    const uint32_t n = Get<uint32_t>();
    if (n > limit) throw std::runtime_error("corrupt string length in '" + path_ + "'");
    std::string s(n, '\0');
    Bytes(s.data(), n);
    return s;
  }

 private:
  std::ifstream& in_;
  const std::string& path_;
};

}  // namespace

NamedArray NamedArray::Floats(std::string name, std::vector<uint64_t> shape,
                              std::span<const float> v) {
  return Pack(std::move(name), DType::kFloat32, std::move(shape), v);
}

NamedArray NamedArray::Doubles(std::string name, std::vector<uint64_t> shape,
                               std::span<const double> v) {
  return Pack(std::move(name), DType::kFloat64, std::move(shape), v);
}

NamedArray NamedArray::Ints(std::string name, std::span<const int64_t> v) {
  return Pack(std::move(name), DType::kInt64, {v.size()}, v);
}

std::vector<float> NamedArray::AsFloats() const { return Unpack<float>(*this, DType::kFloat32); }
std::vector<double> NamedArray::AsDoubles() const {
  return Unpack<double>(*this, DType::kFloat64);
}
std::vector<int64_t> NamedArray::AsInts() const { return Unpack<int64_t>(*this, DType::kInt64); }

bool Checkpoint::Has(std::string_view name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return true;
  }
  return false;
}

const NamedArray& Checkpoint::Get(std::string_view name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return a;
  }
  throw std::invalid_argument("checkpoint has no array '" + std::string(name) + "'");
}

uint64_t HashConfig(std::string_view text) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) h = (h ^ c) * 1099511628211ULL;
  return h;
}

void SaveCheckpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  Writer w(out);
  w.Bytes(kMagic, sizeof(kMagic));
  w.Put(kVersion);
  w.Put(ckpt.config_hash);
  w.Put(static_cast<uint32_t>(ckpt.config.size()));
  w.Bytes(ckpt.config.data(), ckpt.config.size());
  w.Put(static_cast<uint32_t>(ckpt.arrays.size()));
  for (const auto& a : ckpt.arrays) {
    w.Put(static_cast<uint32_t>(a.name.size()));
    w.Bytes(a.name.data(), a.name.size());
    w.Put(static_cast<uint8_t>(a.dtype));
    w.Put(static_cast<uint32_t>(a.shape.size()));
    for (uint64_t d : a.shape) w.Put(d);
    w.Put(static_cast<uint64_t>(a.payload.size()));
    w.Bytes(a.payload.data(), a.payload.size());
  }
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  const std::string name = path.string();
  Reader r(in, name);
  char magic[8];
  r.Bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("'" + name + "' is not a checkpoint");
  }
  if (r.Get<uint32_t>() != kVersion) throw std::runtime_error("unsupported checkpoint version");
  Checkpoint ckpt;
  ckpt.config_hash = r.Get<uint64_t>();
  ckpt.config = r.String(1 << 24);
  const uint32_t count = r.Get<uint32_t>();
  for (uint32_t i = 0; i < count; ++i) {
    NamedArray a;
    a.name = r.String(4096);
    a.dtype = static_cast<DType>(r.Get<uint8_t>());
    const size_t width = DTypeSize(a.dtype);
    if (width == 0) throw std::runtime_error("unknown dtype in '" + name + "'");
    const uint32_t rank = r.Get<uint32_t>();
    if (rank > 8) throw std::runtime_error("corrupt rank in '" + name + "'");
    uint64_t n = 1;
    for (uint32_t k = 0; k < rank; ++k) {
      a.shape.push_back(r.Get<uint64_t>());
      n *= a.shape.back();
    }
    const uint64_t bytes = r.Get<uint64_t>();
    if (bytes != n * width) throw std::runtime_error("payload size mismatch in '" + name + "'");
    a.payload.resize(bytes);
    r.Bytes(a.payload.data(), bytes);
    ckpt.arrays.push_back(std::move(a));
  }
  if (ckpt.config_hash != HashConfig(ckpt.config)) {
    throw std::runtime_error("config hash mismatch in '" + name + "'");
  }
  return ckpt;
}

}  // namespace pssl
