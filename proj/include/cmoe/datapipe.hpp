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
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cmoe/audio_io.hpp"
#include "cmoe/features.hpp"
#include "cmoe/tensor.hpp"

namespace cmoe {

enum class Split { train, test, val };

std::string to_string(Split s);
Split parse_split(const std::string& s);

/// One CSV record split on commas; double-quoted fields may contain commas.
std::vector<std::string> split_csv_line(const std::string& line);

struct ManifestEntry {
  std::string source_id;
  std::filesystem::path path;
  std::string label;
  std::optional<Split> split;  // unset until a split table assigns it
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  std::vector<std::string> class_names;  // sorted
  int sample_rate = 0;                   // 0 = take from the audio
  EffectiveBand band;

  std::size_t class_index(const std::string& label) const;
  const ManifestEntry& entry(const std::string& source_id) const;
};

/// CSV `source_id,path,label,split`; relative paths resolve against the
/// manifest's directory and an empty split column means "assigned later".
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const Manifest& manifest);
/// Recomputes class_names from the entries and checks source-id uniqueness.
void finalize_manifest(Manifest& manifest);

/// CSV `category,train_ids,test_ids`, ids separated by spaces; "Else" stands
/// for every manifest source of that category not listed on the other side.
struct SplitRow {
  std::string category;
  bool train_else = false;
  std::vector<std::string> train_ids;
  bool test_else = false;
  std::vector<std::string> test_ids;
};

struct SplitTable {
  std::vector<SplitRow> rows;
  const SplitRow* find(const std::string& category) const;
};

SplitTable load_split_table(const std::filesystem::path& path);

/// Numeric file id of a source: the first run of digits in its id. "080" and
/// "80" denote the same file.
std::optional<std::uint64_t> numeric_file_id(const std::string& source_id);

/// Assigns train/test to every manifest entry from the table. LeakageError if
/// any source lands in both splits, ManifestError for sources the table does
/// not cover.
Manifest apply_split_table(const Manifest& manifest, const SplitTable& table);

struct Segment {
  std::string segment_id;  // "<source_id>#<k>"
  std::string source_id;
  double start_s = 0.0;
  double end_s = 0.0;
  Split split = Split::train;
  std::string label;
  std::size_t label_index = 0;
};

using SegmentIndex = std::vector<Segment>;

struct SegmentParams {
  double len_s = 30.0;
  double hop_s = 15.0;
};

/// floor((duration - len) / hop) + 1, or 0 when the clip is shorter than len.
std::size_t segment_count(double duration_s, const SegmentParams& p);

/// Segments of one source ordered by start; short sources give an empty list.
SegmentIndex segment_source(const std::string& source_id, double duration_s,
                            const SegmentParams& p);
SegmentIndex segment_clip(const AudioClip& clip, const SegmentParams& p);

struct SplitIndices {
  SegmentIndex train;
  SegmentIndex test;
};

/// Segments every manifest entry (durations read from the WAV headers) and
/// groups them by split. Entries must already have a split.
SplitIndices build_split(const Manifest& manifest, const SegmentParams& p);
SplitIndices build_split(const Manifest& manifest, const SplitTable& table, const SegmentParams& p);

/// Throws LeakageError if two indices share a source id.
void check_disjoint_sources(const SegmentIndex& a, const SegmentIndex& b, const std::string& what);

struct CarveOptions {
  double fraction = 0.15;
  bool source_level = false;  // carve whole sources instead of segments
  bool stratified = false;    // carve per class
};

struct CarvedSplit {
  SegmentIndex train;
  SegmentIndex val;
};

/// round(fraction * n) segments (or sources) drawn uniformly under seed.
CarvedSplit carve_validation(const SegmentIndex& train, const CarveOptions& opt,
                             std::uint64_t seed);

/// Batches of positions into an index of length n: a permutation derived from
/// (seed, epoch) when shuffling, then consecutive chunks; the last may be short.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   std::uint64_t seed, std::size_t epoch,
                                                   bool shuffle = true);

/// Extracted features for a segment index, held in memory in index order.
struct FeatureSet {
  std::size_t time = 0;
  std::size_t freq = 0;
  std::vector<std::vector<float>> features;  // time * freq each
  std::vector<std::int64_t> labels;
  std::vector<std::string> segment_ids;
  std::vector<std::string> source_ids;

  std::size_t size() const { return features.size(); }
};

struct Batch {
  Tensor<float> inputs;  // [N, 1, T, F]
  std::vector<std::int64_t> labels;
  std::vector<std::string> segment_ids;
};

Batch gather_batch(const FeatureSet& set, const std::vector<std::size_t>& positions);

/// Produces features per segment, either by extraction from audio or from a
/// cache directory of per-segment feature files.
class FeatureStore {
 public:
  /// A band upper edge of 0 stands for the Nyquist frequency of each source.
  FeatureStore(const Manifest& manifest, FeatureConfig config, SegmentParams segments,
               std::filesystem::path cache_dir = {}, bool cache_only = false);

  /// Loads from the cache when present and consistent, otherwise extracts
  /// (and writes the cache if a directory is set). In cache-only mode a
  /// missing file raises CacheMissError.
  Spectrogram get(const Segment& seg);

  /// Writes the cache file unless an up-to-date one exists; returns whether it wrote.
  bool ensure_cached(const Segment& seg);

  std::filesystem::path cache_path(const Segment& seg) const;

  FeatureSet load_set(const SegmentIndex& index);

 private:
  const AudioClip& clip(const std::string& source_id);
  const FeatureExtractor& extractor(int sample_rate);
  Spectrogram extract(const Segment& seg);
  bool cache_valid(const std::filesystem::path& p);

  const Manifest& manifest_;
  FeatureConfig config_;
  SegmentParams segments_;
  std::filesystem::path cache_dir_;
  bool cache_only_;
  std::map<std::string, AudioClip> clips_;
  std::map<int, std::unique_ptr<FeatureExtractor>> extractors_;
};

// ---------------------------------------------------------------------------
// Synthetic data

struct SyntheticSpec {
  std::size_t num_classes = 4;
  std::size_t modes_per_class = 2;
  std::size_t tones_per_mode = 2;
  int sample_rate = 8000;
  double f_lo = 150.0;   // tone grid range
  double f_hi = 3600.0;
  double segment_s = 1.6;
  double hop_s = 0.8;
  std::size_t segments_per_source = 5;
  std::size_t train_sources_per_mode = 5;
  std::size_t test_sources_per_mode = 2;
  double snr_db = 10.0;  // infinite = noise-free
  double amp_jitter = 0.2;
  std::uint64_t seed = 7;
  /// Optional explicit tone table, [class][mode][tone] in Hz.
  std::vector<std::vector<std::vector<double>>> tones;

  double clip_seconds() const;
  void validate() const;
};

struct SyntheticDataset {
  Manifest manifest;
  std::map<std::string, std::size_t> latent_mode;  // source_id -> class * modes + mode
  std::vector<std::vector<std::vector<double>>> tones;
};

/// Tone table drawn from a Mel-spaced grid (shuffled under the spec seed)
/// unless the spec carries one.
std::vector<std::vector<std::vector<double>>> synthetic_tones(const SyntheticSpec& spec);

/// Waveform of one source.
std::vector<float> synthesize_source(const SyntheticSpec& spec,
                                     const std::vector<double>& tone_freqs, std::uint64_t seed);

/// Writes <dir>/audio/*.wav, <dir>/manifest.csv and <dir>/latent.csv.
SyntheticDataset generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& dir);

std::map<std::string, std::size_t> load_latent_modes(const std::filesystem::path& path);

}  // namespace cmoe
