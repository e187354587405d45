// Copyright 2026 The CMoE Authors
// SPDX-License-Identifier: Apache-2.0
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

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace cmoe {

/// Decoded mono waveform. Samples are in [-1, 1].
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = 0;
  std::string source_id;
  std::string label;

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

enum class SampleFormat { pcm16, pcm32, float32 };

struct WavInfo {
  int sample_rate = 0;
  int channels = 0;
  SampleFormat format = SampleFormat::pcm16;
  std::uint64_t frames = 0;
  std::uint64_t data_offset = 0;

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(frames) / sample_rate : 0.0;
  }
};

/// Reads only the RIFF header. Throws FormatError / UnsupportedFormatError.
WavInfo probe_wav(const std::filesystem::path& path);

/// Decodes PCM16, PCM32 or float32 WAV (1 or 2 channels) into a mono clip.
/// Stereo is folded down by averaging the two channels of each frame.
AudioClip load_audio(const std::filesystem::path& path, std::string source_id = {},
                     std::string label = {});

/// Decodes from an in-memory RIFF image (used by load_audio).
AudioClip decode_wav(std::span<const std::uint8_t> bytes);

/// Writes mono 16-bit PCM. Samples are clamped to [-1, 1] and rounded to the
/// nearest code, so a reload differs from the input by at most 2^-15.
void write_wav_pcm16(const std::filesystem::path& path, std::span<const float> samples,
                     int sample_rate);

/// Serialises a mono 16-bit PCM WAV image into memory.
std::vector<std::uint8_t> encode_wav_pcm16(std::span<const float> samples, int sample_rate);

}  // namespace cmoe
