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

#include <Eigen/Core>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cmoe {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class FeatureKind : std::uint8_t { stft = 0, mel = 1, bark = 2, cqt = 3 };
enum class WindowKind { hann, hamming, rect };
enum class StftComponent { real, magnitude };
enum class FilterScale { mel, bark };

std::string to_string(FeatureKind k);
FeatureKind parse_feature_kind(const std::string& s);
WindowKind parse_window(const std::string& s);
StftComponent parse_stft_component(const std::string& s);

/// Framing with reflective centre padding: frame t is centred on sample
/// t * shift, so the frame count is round(duration / shift).
struct FramingPlan {
  double frame_len_ms = 50.0;
  double shift_ms = 25.0;
  WindowKind window = WindowKind::hann;

  std::size_t frame_samples(int sample_rate) const;
  std::size_t shift_samples(int sample_rate) const;
  std::size_t frame_count(std::size_t n_samples, int sample_rate) const;
  void validate() const;
};

struct EffectiveBand {
  double f_lo = 100.0;
  double f_hi = 0.0;

  /// Throws BandError unless 0 <= f_lo < f_hi <= sample_rate / 2.
  void validate(int sample_rate) const;
};

/// Periodic window of length n.
std::vector<double> make_window(WindowKind kind, std::size_t n);

/// Windowed frames, n_frames x frame_len.
RowMatrix<double> frame_signal(std::span<const float> segment, int sample_rate,
                               const FramingPlan& plan);

/// Index of a sample after mirror reflection about both ends, for any
/// (possibly far out of range) position. Mirrors numpy's "reflect" mode.
std::size_t reflect_index(std::ptrdiff_t i, std::size_t n);

struct Spectrogram {
  FeatureKind kind = FeatureKind::stft;
  RowMatrix<float> data;  // time x frequency
  EffectiveBand band;
  int sample_rate = 0;
  std::string source_segment_id;

  std::size_t time_frames() const { return static_cast<std::size_t>(data.rows()); }
  std::size_t freq_bins() const { return static_cast<std::size_t>(data.cols()); }
};

/// FFT bins k with f_lo <= k * sr / n_fft <= f_hi, as [first, last].
std::pair<std::size_t, std::size_t> band_bins(const EffectiveBand& band, int sample_rate,
                                              std::size_t n_fft);

/// Complex half spectrum (n/2 + 1 bins) of every frame; FFT size = frame length.
RowMatrix<std::complex<double>> frame_spectra(const RowMatrix<double>& frames);

Spectrogram stft_spectrogram(const RowMatrix<double>& frames, int sample_rate,
                             StftComponent component, const EffectiveBand& band);

/// |X|^2 over the full half spectrum.
RowMatrix<double> power_spectrum(const RowMatrix<double>& frames);

double hz_to_mel(double f);
double mel_to_hz(double m);
double hz_to_bark(double f);
double bark_to_hz(double b);

struct FilterBank {
  FilterScale scale = FilterScale::mel;
  double f_lo = 0.0;
  double f_hi = 0.0;
  RowMatrix<double> matrix;  // n_filters x n_bins
  std::vector<double> center_freqs;

  std::size_t n_filters() const { return static_cast<std::size_t>(matrix.rows()); }
  std::size_t n_bins() const { return static_cast<std::size_t>(matrix.cols()); }
};

/// Triangular filters with centres uniformly spaced on the warped scale.
FilterBank build_filterbank(FilterScale scale, std::size_t n_filters, const EffectiveBand& band,
                            int sample_rate, std::size_t n_fft);

/// out[t, j] = log10(max(sum_bin fb[j, bin] * power[t, bin], log_floor)).
Spectrogram apply_filterbank(const RowMatrix<double>& power, const FilterBank& fb,
                             double log_floor = 1e-10);

struct CqtPlan {
  double f_min = 100.0;
  double f_max = 0.0;
  int bins_per_octave = 48;
  double hop_ms = 33.33;

  std::size_t n_bins() const;
  std::vector<double> center_freqs() const;
  double q_factor() const;
  void validate(int sample_rate) const;
};

/// Constant-Q magnitude spectrogram computed with a sparse spectral kernel:
/// each hop's centred FFT is multiplied against precomputed kernel spectra.
class CqtTransform {
 public:
  CqtTransform(const CqtPlan& plan, int sample_rate);

  Spectrogram operator()(std::span<const float> segment) const;

  std::size_t fft_size() const { return n_fft_; }
  std::size_t frame_count(std::size_t n_samples) const;
  const std::vector<double>& center_freqs() const { return freqs_; }

 private:
  struct SparseRow {
    std::vector<std::uint32_t> index;
    std::vector<std::complex<double>> weight;
  };

  CqtPlan plan_;
  int sample_rate_;
  std::size_t n_fft_ = 0;
  std::size_t hop_ = 0;
  std::vector<double> freqs_;
  std::vector<SparseRow> kernels_;
};

Spectrogram cqt_spectrogram(std::span<const float> segment, int sample_rate, const CqtPlan& plan);

/// Everything needed to turn a waveform segment into one spectrogram.
struct FeatureConfig {
  FeatureKind kind = FeatureKind::stft;
  FramingPlan framing;
  EffectiveBand band;
  std::size_t n_filters = 300;
  StftComponent stft_component = StftComponent::real;
  /// STFT only: keep every non-DC bin below f_lo, so the frequency axis runs
  /// from the first bin to f_hi.
  bool stft_keep_low_bins = false;
  int cqt_bins_per_octave = 48;
  double cqt_hop_ms = 33.33;
  double log_floor = 1e-10;
};

class FeatureExtractor {
 public:
  FeatureExtractor(FeatureConfig config, int sample_rate);

  Spectrogram operator()(std::span<const float> segment) const;

  /// Output dimensions for a segment of n_samples.
  std::pair<std::size_t, std::size_t> output_shape(std::size_t n_samples) const;

  const FeatureConfig& config() const { return config_; }
  int sample_rate() const { return sample_rate_; }

 private:
  EffectiveBand stft_band() const;

  FeatureConfig config_;
  int sample_rate_;
  FilterBank filterbank_;  // mel / bark only
  std::shared_ptr<CqtTransform> cqt_;
};

// Feature cache: "CMOEFEAT\0", version byte, kind u8, time u32, freq u32,
// f_lo f64, f_hi f64, sample_rate u32, then time*freq little-endian float32.
inline constexpr char kFeatureMagic[9] = {'C', 'M', 'O', 'E', 'F', 'E', 'A', 'T', '\0'};
inline constexpr std::uint8_t kFeatureVersion = 1;

void save_feature(const std::filesystem::path& path, const Spectrogram& spec);
Spectrogram load_feature(const std::filesystem::path& path);

}  // namespace cmoe
