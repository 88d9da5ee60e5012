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

#ifndef PSSL_SIGNAL_WAV_H_
#define PSSL_SIGNAL_WAV_H_

#include <filesystem>

#include "pssl/signal/signal.h"

namespace pssl {

enum class WavFormat { kPcm16, kFloat32 };

// Writes interleaved RIFF/WAVE. PCM16 clips to [-1, 1].
void WriteWav(const std::filesystem::path& path, const MultichannelAudio& audio,
              WavFormat format = WavFormat::kFloat32);
void WriteWav(const std::filesystem::path& path, const MonoSignal& signal,
              WavFormat format = WavFormat::kFloat32);

// Reads PCM16 or IEEE float32. If expected_rate > 0 and the file rate
// differs, throws std::runtime_error (no resampling is done).
MultichannelAudio ReadWav(const std::filesystem::path& path,
                          int expected_rate = kCanonicalSampleRate);

}  // namespace pssl

#endif  // PSSL_SIGNAL_WAV_H_
