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

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "cmoe/audio_io.hpp"
#include "test_util.hpp"

namespace cmoe {
namespace {

// Minimal RIFF image builder for header edge cases.
std::vector<std::uint8_t> wav_image(std::uint16_t tag, std::uint16_t channels, std::uint32_t rate,
                                    std::uint16_t bits, const std::vector<std::uint8_t>& payload) {
  std::vector<std::uint8_t> b;
  auto put = [&](const void* p, std::size_t n) {
    const auto* c = static_cast<const std::uint8_t*>(p);
    b.insert(b.end(), c, c + n);
  };
  auto u32 = [&](std::uint32_t v) { put(&v, 4); };
  auto u16 = [&](std::uint16_t v) { put(&v, 2); };
  put("RIFF", 4);
  u32(static_cast<std::uint32_t>(36 + payload.size()));
  put("WAVE", 4);
  put("fmt ", 4);
  u32(16);
  u16(tag);
  u16(channels);
  u32(rate);
  u32(rate * channels * bits / 8);
  u16(static_cast<std::uint16_t>(channels * bits / 8));
  u16(bits);
  put("data", 4);
  u32(static_cast<std::uint32_t>(payload.size()));
  b.insert(b.end(), payload.begin(), payload.end());
  return b;
}

template <typename S>
std::vector<std::uint8_t> raw(const std::vector<S>& v) {
  std::vector<std::uint8_t> out(v.size() * sizeof(S));
  std::memcpy(out.data(), v.data(), out.size());
  return out;
}

TEST(AudioIo, Pcm16RoundTripWithinOneCode) {
  test::TempDir dir;
  std::vector<float> x(1000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.9f * std::sin(0.05f * i);
  x[10] = 1.5f;
  x[11] = -1.5f;
  write_wav_pcm16(dir / "a.wav", x, 16000);

  const auto info = probe_wav(dir / "a.wav");
  EXPECT_EQ(info.sample_rate, 16000);
  EXPECT_EQ(info.channels, 1);
  EXPECT_EQ(info.frames, 1000u);
  EXPECT_EQ(info.format, SampleFormat::pcm16);

  const auto clip = load_audio(dir / "a.wav", "src", "cargo");
  ASSERT_EQ(clip.samples.size(), x.size());
  EXPECT_EQ(clip.source_id, "src");
  EXPECT_EQ(clip.label, "cargo");
  EXPECT_DOUBLE_EQ(clip.duration_s(), 1000.0 / 16000.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const float want = std::clamp(x[i], -1.0f, 1.0f);
    EXPECT_LE(std::abs(clip.samples[i] - want), std::ldexp(1.0f, -15)) << i;
  }
}

TEST(AudioIo, StereoFoldsToMean) {
  const std::vector<std::int16_t> pcm{16384, -16384, 8192, 8192, -32768, 0};
  const auto clip = decode_wav(wav_image(1, 2, 8000, 16, raw(pcm)));
  ASSERT_EQ(clip.samples.size(), 3u);
  EXPECT_FLOAT_EQ(clip.samples[0], 0.0f);
  EXPECT_FLOAT_EQ(clip.samples[1], 0.25f);
  EXPECT_FLOAT_EQ(clip.samples[2], -0.5f);
}

TEST(AudioIo, Pcm32AndFloat) {
  const std::vector<std::int32_t> p32{1 << 30, -(1 << 30)};
  const auto a = decode_wav(wav_image(1, 1, 8000, 32, raw(p32)));
  EXPECT_FLOAT_EQ(a.samples[0], 0.5f);
  EXPECT_FLOAT_EQ(a.samples[1], -0.5f);

  const std::vector<float> f32{0.25f, -2.0f, 3.0f};
  const auto b = decode_wav(wav_image(3, 1, 8000, 32, raw(f32)));
  EXPECT_FLOAT_EQ(b.samples[0], 0.25f);
  EXPECT_FLOAT_EQ(b.samples[1], -1.0f);
  EXPECT_FLOAT_EQ(b.samples[2], 1.0f);
}

TEST(AudioIo, Errors) {
  const std::vector<std::uint8_t> junk{'n', 'o', 'p', 'e'};
  EXPECT_THROW(decode_wav(junk), FormatError);

  const std::vector<std::uint8_t> payload(8, 0);
  EXPECT_THROW(decode_wav(wav_image(2, 1, 8000, 4, payload)), UnsupportedFormatError);  // ADPCM
  EXPECT_THROW(decode_wav(wav_image(1, 1, 8000, 8, payload)), UnsupportedFormatError);
  EXPECT_THROW(decode_wav(wav_image(1, 6, 8000, 16, payload)), UnsupportedFormatError);
  EXPECT_THROW(decode_wav(wav_image(1, 1, 8000, 16, {})), EmptyAudioError);

  auto truncated = wav_image(1, 1, 8000, 16, payload);
  truncated.resize(20);
  EXPECT_THROW(decode_wav(truncated), FormatError);

  EXPECT_THROW(load_audio("/nonexistent/x.wav"), FormatError);
}

TEST(AudioIo, ErrorKindsAreData) {
  try {
    decode_wav(wav_image(1, 1, 8000, 16, {}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
  }
}

TEST(AudioIo, EncodeMatchesFile) {
  test::TempDir dir;
  const std::vector<float> x{0.0f, 0.5f, -0.5f};
  write_wav_pcm16(dir / "b.wav", x, 44100);
  const auto bytes = encode_wav_pcm16(x, 44100);
  EXPECT_EQ(test::read_file(dir / "b.wav"), std::string(bytes.begin(), bytes.end()));
  EXPECT_EQ(bytes.size(), 44u + 6u);
}

TEST(AudioIoExamples, FullScaleCode) {
  const std::vector<std::int16_t> pcm{32767, -32768};
  const auto clip = decode_wav(wav_image(1, 1, 8000, 16, raw(pcm)));
  EXPECT_FLOAT_EQ(clip.samples[0], 32767.0f / 32768.0f);
  EXPECT_FLOAT_EQ(clip.samples[1], -1.0f);
}

TEST(AudioIoExamples, SilentSecond) {
  const std::vector<std::int16_t> pcm(52734, 0);
  const auto bytes = wav_image(1, 1, 52734, 16, raw(pcm));
  const auto clip = decode_wav(bytes);
  EXPECT_EQ(clip.samples.size(), 52734u);
  EXPECT_DOUBLE_EQ(clip.duration_s(), 1.0);
  EXPECT_TRUE(std::all_of(clip.samples.begin(), clip.samples.end(), [](float v) { return v == 0.0f; }));
  EXPECT_EQ(decode_wav(bytes).samples, clip.samples);
}

TEST(AudioIoExamples, SymmetricStereoPair) {
  const std::vector<float> f32{0.5f, -0.5f};
  EXPECT_EQ(decode_wav(wav_image(3, 2, 8000, 32, raw(f32))).samples, std::vector<float>{0.0f});
}

}  // namespace
}  // namespace cmoe
