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

#include "pssl/signal/wav.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pssl {
namespace {

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;
constexpr uint16_t kFormatExtensible = 0xFFFE;

void PutU16(std::vector<char>& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void PutU32(std::vector<char>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void PutTag(std::vector<char>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

uint16_t GetU16(const unsigned char* p) { return static_cast<uint16_t>(p[0] | (p[1] << 8)); }

uint32_t GetU32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

void WriteWav(const std::filesystem::path& path, const MultichannelAudio& audio,
              WavFormat format) {
  const uint16_t channels = static_cast<uint16_t>(audio.num_channels());
  if (channels == 0) throw std::invalid_argument("WriteWav: no channels");
  const uint16_t bytes_per_sample = format == WavFormat::kPcm16 ? 2 : 4;
  const uint32_t frames = static_cast<uint32_t>(audio.length());
  const uint32_t data_bytes = frames * channels * bytes_per_sample;
  const uint32_t rate = static_cast<uint32_t>(audio.sample_rate());

  std::vector<char> buf;
  buf.reserve(44 + data_bytes);
  PutTag(buf, "RIFF");
  PutU32(buf, 36 + data_bytes);
  PutTag(buf, "WAVE");
  PutTag(buf, "fmt ");
  PutU32(buf, 16);
  PutU16(buf, format == WavFormat::kPcm16 ? kFormatPcm : kFormatFloat);
  PutU16(buf, channels);
  PutU32(buf, rate);
  PutU32(buf, rate * channels * bytes_per_sample);
  PutU16(buf, static_cast<uint16_t>(channels * bytes_per_sample));
  PutU16(buf, static_cast<uint16_t>(8 * bytes_per_sample));
  PutTag(buf, "data");
  PutU32(buf, data_bytes);
  for (uint32_t t = 0; t < frames; ++t) {
    for (uint16_t c = 0; c < channels; ++c) {
      const double v = audio.channel(c).samples()[t];
      if (format == WavFormat::kPcm16) {
        const double clipped = std::clamp(v, -1.0, 1.0);
        const auto s = static_cast<int16_t>(std::lround(clipped * 32767.0));
        PutU16(buf, static_cast<uint16_t>(s));
      } else {
        const float f = static_cast<float>(v);
        uint32_t bits;
        std::memcpy(&bits, &f, 4);
        PutU32(buf, bits);
      }
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void WriteWav(const std::filesystem::path& path, const MonoSignal& signal,
              WavFormat format) {
  WriteWav(path, MultichannelAudio({signal}), format);
}

MultichannelAudio ReadWav(const std::filesystem::path& path, int expected_rate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open WAV: " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  const auto fail = [&](const std::string& why) {
    return std::runtime_error("malformed WAV " + path.string() + ": " + why);
  };
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
    throw fail("missing RIFF/WAVE header");
  }
  uint16_t format_tag = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  const unsigned char* data = nullptr;
  uint32_t data_bytes = 0;
  size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const unsigned char* chunk = buf.data() + pos;
    const uint32_t size = GetU32(chunk + 4);
    if (pos + 8 + size > buf.size()) throw fail("truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw fail("short fmt chunk");
      format_tag = GetU16(chunk + 8);
      channels = GetU16(chunk + 10);
      rate = GetU32(chunk + 12);
      bits = GetU16(chunk + 22);
      if (format_tag == kFormatExtensible && size >= 40) format_tag = GetU16(chunk + 32);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_bytes = size;
    }
    pos += 8 + size + (size & 1);
  }
  if (channels == 0 || data == nullptr) throw fail("missing fmt or data chunk");
  const bool pcm16 = format_tag == kFormatPcm && bits == 16;
  const bool float32 = format_tag == kFormatFloat && bits == 32;
  if (!pcm16 && !float32) throw fail("only PCM16 and float32 are supported");
  if (expected_rate > 0 && static_cast<int>(rate) != expected_rate) {
    throw std::runtime_error("sample-rate mismatch in " + path.string() + ": " +
                             std::to_string(rate) + " Hz, expected " +
                             std::to_string(expected_rate) + " Hz");
  }
  const uint32_t bytes_per_sample = bits / 8;
  const uint32_t frames = data_bytes / (bytes_per_sample * channels);
  std::vector<std::vector<double>> samples(channels, std::vector<double>(frames));
  for (uint32_t t = 0; t < frames; ++t) {
    for (uint16_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + (static_cast<size_t>(t) * channels + c) * bytes_per_sample;
      if (pcm16) {
        samples[c][t] = static_cast<int16_t>(GetU16(p)) / 32767.0;
      } else {
        const uint32_t u = GetU32(p);
        float f;
        std::memcpy(&f, &u, 4);
        samples[c][t] = f;
      }
    }
  }
  std::vector<MonoSignal> out;
  out.reserve(channels);
  for (auto& s : samples) out.emplace_back(std::move(s), static_cast<int>(rate));
  return MultichannelAudio(std::move(out));
}

}  // namespace pssl
