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

#include "cmoe/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "cmoe/common.hpp"
#include "fft.hpp"

namespace cmoe {
namespace {

constexpr double kEps = 1e-9;

std::size_t samples_for_ms(double ms, int sample_rate) {
  return static_cast<std::size_t>(std::floor(ms * sample_rate / 1000.0 + kEps));
}

}  // namespace

std::string to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::stft: return "stft";
    case FeatureKind::mel: return "mel";
    case FeatureKind::bark: return "bark";
    case FeatureKind::cqt: return "cqt";
  }
  return "?";
}

FeatureKind parse_feature_kind(const std::string& s) {
  if (s == "stft") return FeatureKind::stft;
  if (s == "mel") return FeatureKind::mel;
  if (s == "bark") return FeatureKind::bark;
  if (s == "cqt") return FeatureKind::cqt;
  throw ConfigError("unknown feature kind '" + s + "'");
}

WindowKind parse_window(const std::string& s) {
  if (s == "hann") return WindowKind::hann;
  if (s == "hamming") return WindowKind::hamming;
  if (s == "rect") return WindowKind::rect;
  throw ConfigError("unknown window '" + s + "'");
}

StftComponent parse_stft_component(const std::string& s) {
  if (s == "real") return StftComponent::real;
  if (s == "magnitude") return StftComponent::magnitude;
  throw ConfigError("unknown STFT component '" + s + "'");
}

// ---------------------------------------------------------------------------
// Framing

std::size_t FramingPlan::frame_samples(int sample_rate) const {
  return samples_for_ms(frame_len_ms, sample_rate);
}

std::size_t FramingPlan::shift_samples(int sample_rate) const {
  return std::max<std::size_t>(1, samples_for_ms(shift_ms, sample_rate));
}

std::size_t FramingPlan::frame_count(std::size_t n_samples, int sample_rate) const {
  const double duration_ms = 1000.0 * static_cast<double>(n_samples) / sample_rate;
  return static_cast<std::size_t>(std::llround(duration_ms / shift_ms));
}

void FramingPlan::validate() const {
  if (!(frame_len_ms > 0.0) || !(shift_ms > 0.0) || shift_ms > frame_len_ms) {
    throw PlanError("framing requires 0 < shift_ms <= frame_len_ms");
  }
}

void EffectiveBand::validate(int sample_rate) const {
  if (!(f_lo >= 0.0) || !(f_lo < f_hi) || f_hi > sample_rate / 2.0 + kEps) {
    throw BandError("effective band must satisfy 0 <= f_lo < f_hi <= sr/2");
  }
}

std::vector<double> make_window(WindowKind kind, std::size_t n) {
  std::vector<double> w(n, 1.0);
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t i = 0; i < n; ++i) {
    const double phase = two_pi * static_cast<double>(i) / static_cast<double>(n);
    switch (kind) {
      case WindowKind::hann: w[i] = 0.5 - 0.5 * std::cos(phase); break;
      case WindowKind::hamming: w[i] = 0.54 - 0.46 * std::cos(phase); break;
      case WindowKind::rect: break;
    }
  }
  return w;
}

std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  if (m >= static_cast<std::ptrdiff_t>(n)) m = period - m;
  return static_cast<std::size_t>(m);
}

RowMatrix<double> frame_signal(std::span<const float> segment, int sample_rate,
                               const FramingPlan& plan) {
  plan.validate();
  const std::size_t frame_len = plan.frame_samples(sample_rate);
  if (frame_len == 0 || segment.size() < frame_len) {
    throw TooShortError("segment shorter than one frame");
  }
  const std::size_t shift = plan.shift_samples(sample_rate);
  const std::size_t n_frames = plan.frame_count(segment.size(), sample_rate);
  const auto window = make_window(plan.window, frame_len);
  const auto pad = static_cast<std::ptrdiff_t>(frame_len / 2);

  RowMatrix<double> frames(static_cast<Eigen::Index>(n_frames), static_cast<Eigen::Index>(frame_len));
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(n_frames); ++t) {
    const std::ptrdiff_t start = t * static_cast<std::ptrdiff_t>(shift) - pad;
    for (std::size_t j = 0; j < frame_len; ++j) {
      const auto src = reflect_index(start + static_cast<std::ptrdiff_t>(j), segment.size());
      frames(t, static_cast<Eigen::Index>(j)) = segment[src] * window[j];
    }
  }
  return frames;
}

// ---------------------------------------------------------------------------
// STFT

std::pair<std::size_t, std::size_t> band_bins(const EffectiveBand& band, int sample_rate,
                                              std::size_t n_fft) {
  band.validate(sample_rate);
  const double width = static_cast<double>(sample_rate) / static_cast<double>(n_fft);
  auto first = static_cast<std::size_t>(std::ceil(band.f_lo / width - kEps));
  auto last = static_cast<std::size_t>(std::floor(band.f_hi / width + kEps));
  last = std::min(last, n_fft / 2);
  if (first > last) throw BandError("effective band contains no FFT bins");
  return {first, last};
}

RowMatrix<std::complex<double>> frame_spectra(const RowMatrix<double>& frames) {
  const auto n_frames = frames.rows();
  const auto n = static_cast<std::size_t>(frames.cols());
  const auto n_bins = static_cast<Eigen::Index>(n / 2 + 1);
  RowMatrix<std::complex<double>> out(n_frames, n_bins);
#pragma omp parallel for schedule(static)
  for (Eigen::Index t = 0; t < n_frames; ++t) {
    fft::forward_real(std::span<const double>(frames.row(t).data(), n),
                      std::span<std::complex<double>>(out.row(t).data(), static_cast<std::size_t>(n_bins)));
  }
  return out;
}

Spectrogram stft_spectrogram(const RowMatrix<double>& frames, int sample_rate,
                             StftComponent component, const EffectiveBand& band) {
  const auto n_fft = static_cast<std::size_t>(frames.cols());
  const auto [first, last] = band_bins(band, sample_rate, n_fft);
  const auto spectra = frame_spectra(frames);
  Spectrogram out;
  out.kind = FeatureKind::stft;
  out.band = band;
  out.sample_rate = sample_rate;
  const auto width = static_cast<Eigen::Index>(last - first + 1);
  out.data.resize(frames.rows(), width);
  for (Eigen::Index t = 0; t < frames.rows(); ++t) {
    for (Eigen::Index k = 0; k < width; ++k) {
      const auto& x = spectra(t, static_cast<Eigen::Index>(first) + k);
      out.data(t, k) = static_cast<float>(component == StftComponent::real ? x.real() : std::abs(x));
    }
  }
  return out;
}

RowMatrix<double> power_spectrum(const RowMatrix<double>& frames) {
  return frame_spectra(frames).cwiseAbs2();
}

// ---------------------------------------------------------------------------
// Mel / Bark

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }
double hz_to_bark(double f) { return 6.0 * std::asinh(f / 600.0); }
double bark_to_hz(double b) { return 600.0 * std::sinh(b / 6.0); }

FilterBank build_filterbank(FilterScale scale, std::size_t n_filters, const EffectiveBand& band,
                            int sample_rate, std::size_t n_fft) {
  if (n_filters == 0) throw DegenerateFilterError("filterbank needs at least one filter");
  const auto [first, last] = band_bins(band, sample_rate, n_fft);
  if (n_filters > last - first + 1) {
    throw DegenerateFilterError(std::to_string(n_filters) + " filters exceed the " +
                                std::to_string(last - first + 1) + " FFT bins in the band");
  }
  auto warp = scale == FilterScale::mel ? hz_to_mel : hz_to_bark;
  auto unwarp = scale == FilterScale::mel ? mel_to_hz : bark_to_hz;

  const double lo = warp(band.f_lo);
  const double hi = warp(band.f_hi);
  std::vector<double> edges(n_filters + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = unwarp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_filters + 1));
  }

  FilterBank fb;
  fb.scale = scale;
  fb.f_lo = band.f_lo;
  fb.f_hi = band.f_hi;
  const std::size_t n_bins = n_fft / 2 + 1;
  fb.matrix = RowMatrix<double>::Zero(static_cast<Eigen::Index>(n_filters), static_cast<Eigen::Index>(n_bins));
  fb.center_freqs.resize(n_filters);
  const double width = static_cast<double>(sample_rate) / static_cast<double>(n_fft);

  for (std::size_t j = 0; j < n_filters; ++j) {
    const double left = edges[j];
    const double center = edges[j + 1];
    const double right = edges[j + 2];
    fb.center_freqs[j] = center;
    double row_sum = 0.0;
    for (std::size_t k = first; k <= last; ++k) {
      const double f = static_cast<double>(k) * width;
      double w = 0.0;
      if (f > left && f <= center) {
        w = (f - left) / (center - left);
      } else if (f > center && f < right) {
        w = (right - f) / (right - center);
      }
      fb.matrix(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = w;
      row_sum += w;
    }
    if (row_sum <= 0.0) {
      // Filter narrower than one bin spacing: collapse onto the nearest bin.
      auto k = static_cast<std::size_t>(std::llround(center / width));
      k = std::clamp(k, first, last);
      fb.matrix(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = 1.0;
    }
  }
  return fb;
}

Spectrogram apply_filterbank(const RowMatrix<double>& power, const FilterBank& fb, double log_floor) {
  if (static_cast<std::size_t>(power.cols()) != fb.n_bins()) {
    throw ShapeError("power spectrum has " + std::to_string(power.cols()) +
                     " bins but the filterbank expects " + std::to_string(fb.n_bins()));
  }
  RowMatrix<double> energy = power * fb.matrix.transpose();
  Spectrogram out;
  out.kind = fb.scale == FilterScale::mel ? FeatureKind::mel : FeatureKind::bark;
  out.band = {fb.f_lo, fb.f_hi};
  out.data = energy.unaryExpr([log_floor](double e) { return std::log10(std::max(e, log_floor)); })
                 .cast<float>();
  return out;
}

// ---------------------------------------------------------------------------
// CQT

std::size_t CqtPlan::n_bins() const {
  return static_cast<std::size_t>(std::floor(bins_per_octave * std::log2(f_max / f_min) + kEps)) + 1;
}

std::vector<double> CqtPlan::center_freqs() const {
  std::vector<double> f(n_bins());
  for (std::size_t k = 0; k < f.size(); ++k) {
    f[k] = f_min * std::exp2(static_cast<double>(k) / bins_per_octave);
  }
  return f;
}

double CqtPlan::q_factor() const { return 1.0 / (std::exp2(1.0 / bins_per_octave) - 1.0); }

void CqtPlan::validate(int sample_rate) const {
  if (!(f_min > 0.0)) throw PlanError("CQT f_min must be positive");
  if (!(f_max >= f_min)) throw PlanError("CQT f_max must be >= f_min");
  if (f_max > sample_rate / 2.0 + kEps) throw PlanError("CQT f_max exceeds the Nyquist frequency");
  if (bins_per_octave < 1) throw PlanError("CQT needs at least one bin per octave");
  if (!(hop_ms > 0.0)) throw PlanError("CQT hop must be positive");
}

CqtTransform::CqtTransform(const CqtPlan& plan, int sample_rate)
    : plan_(plan), sample_rate_(sample_rate) {
  plan_.validate(sample_rate);
  freqs_ = plan_.center_freqs();
  hop_ = std::max<std::size_t>(1, samples_for_ms(plan_.hop_ms, sample_rate));
  const double q = plan_.q_factor();
  const auto longest = static_cast<std::size_t>(std::ceil(q * sample_rate / freqs_.front()));
  n_fft_ = std::bit_ceil(std::max<std::size_t>(longest, 2));

  kernels_.resize(freqs_.size());
  const std::size_t n_half = n_fft_ / 2 + 1;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(freqs_.size()); ++k) {
    const double fk = freqs_[static_cast<std::size_t>(k)];
    const auto len = static_cast<std::size_t>(std::ceil(q * sample_rate / fk));
    const auto window = make_window(WindowKind::hann, len);
    std::vector<std::complex<double>> buf(n_fft_);
    const std::size_t start = n_fft_ / 2 - len / 2;
    for (std::size_t n = 0; n < len; ++n) {
      const double t = (static_cast<double>(n) - static_cast<double>(len / 2)) / sample_rate;
      const double phase = 2.0 * std::numbers::pi * fk * t;
      buf[start + n] = window[n] / static_cast<double>(len) *
                       std::complex<double>(std::cos(phase), std::sin(phase));
    }
    std::vector<std::complex<double>> spec(n_fft_);
    fft::forward_complex(buf, spec);
    // <x, kernel> = (1/N) sum_j X[j] conj(K[j]); real x makes negative
    // frequencies redundant and the analytic kernel has ~no energy there.
    double peak = 0.0;
    for (std::size_t j = 0; j < n_half; ++j) peak = std::max(peak, std::abs(spec[j]));
    auto& row = kernels_[static_cast<std::size_t>(k)];
    for (std::size_t j = 0; j < n_half; ++j) {
      if (std::abs(spec[j]) >= 1e-3 * peak) {
        row.index.push_back(static_cast<std::uint32_t>(j));
        row.weight.push_back(std::conj(spec[j]) / static_cast<double>(n_fft_));
      }
    }
  }
}

std::size_t CqtTransform::frame_count(std::size_t n_samples) const {
  const double duration_ms = 1000.0 * static_cast<double>(n_samples) / sample_rate_;
  return static_cast<std::size_t>(std::llround(duration_ms / plan_.hop_ms));
}

Spectrogram CqtTransform::operator()(std::span<const float> segment) const {
  if (segment.empty()) throw TooShortError("empty segment");
  const std::size_t n_frames = frame_count(segment.size());
  Spectrogram out;
  out.kind = FeatureKind::cqt;
  out.band = {freqs_.front(), freqs_.back()};
  out.sample_rate = sample_rate_;
  out.data.resize(static_cast<Eigen::Index>(n_frames), static_cast<Eigen::Index>(freqs_.size()));
  const auto half = static_cast<std::ptrdiff_t>(n_fft_ / 2);
#pragma omp parallel
  {
    std::vector<double> frame(n_fft_);
    std::vector<std::complex<double>> spec(n_fft_ / 2 + 1);
#pragma omp for schedule(static)
    for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(n_frames); ++t) {
      const std::ptrdiff_t start = t * static_cast<std::ptrdiff_t>(hop_) - half;
      for (std::size_t j = 0; j < n_fft_; ++j) {
        frame[j] = segment[reflect_index(start + static_cast<std::ptrdiff_t>(j), segment.size())];
      }
      fft::forward_real(frame, spec);
      for (std::size_t k = 0; k < kernels_.size(); ++k) {
        const auto& row = kernels_[k];
        std::complex<double> acc = 0.0;
        for (std::size_t e = 0; e < row.index.size(); ++e) acc += spec[row.index[e]] * row.weight[e];
        out.data(t, static_cast<Eigen::Index>(k)) = static_cast<float>(std::abs(acc));
      }
    }
  }
  return out;
}

Spectrogram cqt_spectrogram(std::span<const float> segment, int sample_rate, const CqtPlan& plan) {
  return CqtTransform(plan, sample_rate)(segment);
}

// ---------------------------------------------------------------------------
// Extractor

FeatureExtractor::FeatureExtractor(FeatureConfig config, int sample_rate)
    : config_(std::move(config)), sample_rate_(sample_rate) {
  config_.framing.validate();
  config_.band.validate(sample_rate);
  switch (config_.kind) {
    case FeatureKind::mel:
    case FeatureKind::bark:
      filterbank_ = build_filterbank(
          config_.kind == FeatureKind::mel ? FilterScale::mel : FilterScale::bark, config_.n_filters,
          config_.band, sample_rate, config_.framing.frame_samples(sample_rate));
      break;
    case FeatureKind::cqt:
      cqt_ = std::make_shared<CqtTransform>(
          CqtPlan{config_.band.f_lo, config_.band.f_hi, config_.cqt_bins_per_octave, config_.cqt_hop_ms},
          sample_rate);
      break;
    case FeatureKind::stft:
      break;
  }
}

EffectiveBand FeatureExtractor::stft_band() const {
  if (!config_.stft_keep_low_bins) return config_.band;
  const double width = static_cast<double>(sample_rate_) /
                       static_cast<double>(config_.framing.frame_samples(sample_rate_));
  return {std::min(width, config_.band.f_lo), config_.band.f_hi};
}

Spectrogram FeatureExtractor::operator()(std::span<const float> segment) const {
  Spectrogram out;
  switch (config_.kind) {
    case FeatureKind::stft:
      out = stft_spectrogram(frame_signal(segment, sample_rate_, config_.framing), sample_rate_,
                             config_.stft_component, stft_band());
      break;
    case FeatureKind::mel:
    case FeatureKind::bark:
      out = apply_filterbank(power_spectrum(frame_signal(segment, sample_rate_, config_.framing)),
                             filterbank_, config_.log_floor);
      break;
    case FeatureKind::cqt:
      out = (*cqt_)(segment);
      break;
  }
  out.sample_rate = sample_rate_;
  return out;
}

std::pair<std::size_t, std::size_t> FeatureExtractor::output_shape(std::size_t n_samples) const {
  switch (config_.kind) {
    case FeatureKind::stft: {
      const auto [first, last] =
          band_bins(stft_band(), sample_rate_, config_.framing.frame_samples(sample_rate_));
      return {config_.framing.frame_count(n_samples, sample_rate_), last - first + 1};
    }
    case FeatureKind::mel:
    case FeatureKind::bark:
      return {config_.framing.frame_count(n_samples, sample_rate_), config_.n_filters};
    case FeatureKind::cqt:
      return {cqt_->frame_count(n_samples), cqt_->center_freqs().size()};
  }
  return {0, 0};
}

// ---------------------------------------------------------------------------
// Cache files

namespace {

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FormatError("truncated feature file");
  return v;
}

}  // namespace

void save_feature(const std::filesystem::path& path, const Spectrogram& spec) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + tmp.string());
    out.write(kFeatureMagic, sizeof(kFeatureMagic));
    put<std::uint8_t>(out, kFeatureVersion);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(spec.kind));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(spec.time_frames()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(spec.freq_bins()));
    put<double>(out, spec.band.f_lo);
    put<double>(out, spec.band.f_hi);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(spec.sample_rate));
    out.write(reinterpret_cast<const char*>(spec.data.data()),
              static_cast<std::streamsize>(sizeof(float) * spec.data.size()));
  }
  std::filesystem::rename(tmp, path);
}

Spectrogram load_feature(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CacheMissError("no cached feature at " + path.string());
  char magic[sizeof(kFeatureMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kFeatureMagic, sizeof(magic)) != 0) {
    throw FormatError("bad feature magic in " + path.string());
  }
  if (get<std::uint8_t>(in) != kFeatureVersion) throw FormatError("unsupported feature version");
  Spectrogram spec;
  const auto kind = get<std::uint8_t>(in);
  if (kind > static_cast<std::uint8_t>(FeatureKind::cqt)) throw FormatError("bad feature kind");
  spec.kind = static_cast<FeatureKind>(kind);
  const auto rows = get<std::uint32_t>(in);
  const auto cols = get<std::uint32_t>(in);
  spec.band.f_lo = get<double>(in);
  spec.band.f_hi = get<double>(in);
  spec.sample_rate = static_cast<int>(get<std::uint32_t>(in));
  spec.data.resize(rows, cols);
  in.read(reinterpret_cast<char*>(spec.data.data()),
          static_cast<std::streamsize>(sizeof(float) * spec.data.size()));
  if (!in) throw FormatError("truncated feature payload in " + path.string());
  spec.source_segment_id = path.stem().string();
  return spec;
}

}  // namespace cmoe
