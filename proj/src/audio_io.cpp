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

#include "cmoe/audio_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "cmoe/common.hpp"

namespace cmoe {
namespace {

static_assert(std::endian::native == std::endian::little, "little-endian host assumed");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T read_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
  T v;
  std::memcpy(&v, bytes.data() + offset, sizeof(T));
  return v;
}

struct ParsedHeader {
  WavInfo info;
  std::uint64_t data_bytes = 0;
};

ParsedHeader parse_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError("not a RIFF/WAVE file");
  }
  ParsedHeader out;
  bool have_fmt = false;
  bool have_data = false;
  std::uint16_t bits = 0;
  std::uint16_t tag = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const auto chunk_size = read_le<std::uint32_t>(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(bytes.data() + pos, "fmt ", 4) == 0) {
      if (chunk_size < 16 || body + chunk_size > bytes.size()) {
        throw FormatError("truncated fmt chunk");
      }
      tag = read_le<std::uint16_t>(bytes, body);
      out.info.channels = read_le<std::uint16_t>(bytes, body + 2);
      out.info.sample_rate = static_cast<int>(read_le<std::uint32_t>(bytes, body + 4));
      bits = read_le<std::uint16_t>(bytes, body + 14);
      if (tag == kFormatExtensible) {
        if (chunk_size < 40) throw FormatError("truncated WAVE_FORMAT_EXTENSIBLE header");
        // First two bytes of the subformat GUID carry the actual format tag.
        tag = read_le<std::uint16_t>(bytes, body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(bytes.data() + pos, "data", 4) == 0) {
      out.info.data_offset = body;
      // Some writers leave the size at 0 or 0xFFFFFFFF when streaming.
      out.data_bytes = std::min<std::uint64_t>(chunk_size, bytes.size() - body);
      have_data = true;
      break;
    }
    pos = body + chunk_size + (chunk_size & 1u);
  }
  if (!have_fmt) throw FormatError("missing fmt chunk");
  if (!have_data) throw FormatError("missing data chunk");
  if (out.info.sample_rate <= 0) throw FormatError("invalid sample rate");
  if (out.info.channels != 1 && out.info.channels != 2) {
    throw UnsupportedFormatError("only mono or stereo audio is supported, got " +
                                 std::to_string(out.info.channels) + " channels");
  }
  if (tag == kFormatPcm && bits == 16) {
    out.info.format = SampleFormat::pcm16;
  } else if (tag == kFormatPcm && bits == 32) {
    out.info.format = SampleFormat::pcm32;
  } else if (tag == kFormatFloat && bits == 32) {
    out.info.format = SampleFormat::float32;
  } else {
    throw UnsupportedFormatError("unsupported encoding: format tag " + std::to_string(tag) +
                                 ", " + std::to_string(bits) + " bits");
  }
  const std::size_t frame_bytes = static_cast<std::size_t>(bits / 8) * out.info.channels;
  out.info.frames = out.data_bytes / frame_bytes;
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path, std::size_t limit) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes;
  if (limit == 0) {
    bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  } else {
    bytes.resize(limit);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(limit));
    bytes.resize(static_cast<std::size_t>(in.gcount()));
  }
  return bytes;
}

}  // namespace

WavInfo probe_wav(const std::filesystem::path& path) {
  // Headers of well-formed files fit comfortably in the first 64 KiB; the data
  // size is then recomputed from the real file size.
  auto head = read_file(path, 1 << 16);
  auto parsed = parse_header(head);
  const auto file_size = std::filesystem::file_size(path);
  const std::size_t frame_bytes =
      (parsed.info.format == SampleFormat::pcm16 ? 2u : 4u) * parsed.info.channels;
  const std::uint32_t declared =
      read_le<std::uint32_t>(head, static_cast<std::size_t>(parsed.info.data_offset) - 4);
  const std::uint64_t available = file_size - parsed.info.data_offset;
  parsed.info.frames = std::min<std::uint64_t>(declared, available) / frame_bytes;
  return parsed.info;
}

AudioClip decode_wav(std::span<const std::uint8_t> bytes) {
  const auto parsed = parse_header(bytes);
  const auto& info = parsed.info;
  if (info.frames == 0) throw EmptyAudioError("audio payload is empty");

  AudioClip clip;
  clip.sample_rate = info.sample_rate;
  clip.samples.resize(info.frames);
  const std::size_t base = info.data_offset;
  const int ch = info.channels;

  auto sample_at = [&](std::size_t index) -> double {
    switch (info.format) {
      case SampleFormat::pcm16:
        return read_le<std::int16_t>(bytes, base + 2 * index) / 32768.0;
      case SampleFormat::pcm32:
        return read_le<std::int32_t>(bytes, base + 4 * index) / 2147483648.0;
      case SampleFormat::float32:
        return std::clamp<double>(read_le<float>(bytes, base + 4 * index), -1.0, 1.0);
    }
    return 0.0;
  };

  for (std::size_t f = 0; f < info.frames; ++f) {
    double v = 0.0;
    for (int c = 0; c < ch; ++c) v += sample_at(f * ch + c);
    clip.samples[f] = static_cast<float>(v / ch);
  }
  return clip;
}

AudioClip load_audio(const std::filesystem::path& path, std::string source_id, std::string label) {
  if (!std::filesystem::exists(path)) throw FormatError("no such file: " + path.string());
  auto bytes = read_file(path, 0);
  AudioClip clip = decode_wav(bytes);
  clip.source_id = source_id.empty() ? path.stem().string() : std::move(source_id);
  clip.label = std::move(label);
  return clip;
}

std::vector<std::uint8_t> encode_wav_pcm16(std::span<const float> samples, int sample_rate) {
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  std::vector<std::uint8_t> out(44 + data_bytes);
  auto put = [&](std::size_t off, auto value) { std::memcpy(out.data() + off, &value, sizeof(value)); };
  std::memcpy(out.data(), "RIFF", 4);
  put(4, static_cast<std::uint32_t>(36 + data_bytes));
  std::memcpy(out.data() + 8, "WAVEfmt ", 8);
  put(16, std::uint32_t{16});
  put(20, std::uint16_t{1});
  put(22, std::uint16_t{1});
  put(24, static_cast<std::uint32_t>(sample_rate));
  put(28, static_cast<std::uint32_t>(sample_rate * 2));
  put(32, std::uint16_t{2});
  put(34, std::uint16_t{16});
  std::memcpy(out.data() + 36, "data", 4);
  put(40, data_bytes);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double x = std::clamp<double>(samples[i], -1.0, 1.0);
    const auto code =
        static_cast<std::int16_t>(std::clamp(std::lround(x * 32768.0), -32768L, 32767L));
    put(44 + 2 * i, code);
  }
  return out;
}

void write_wav_pcm16(const std::filesystem::path& path, std::span<const float> samples,
                     int sample_rate) {
  const auto bytes = encode_wav_pcm16(samples, sample_rate);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace cmoe
