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

#include "cmoe/datapipe.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include "cmoe/common.hpp"
#include "cmoe/rng.hpp"

namespace cmoe {

namespace fs = std::filesystem;

namespace {

constexpr double kTimeEps = 1e-9;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string tok; is >> tok;) out.push_back(tok);
  return out;
}

bool is_else(const std::string& s) {
  std::string lower;
  for (char c : trim(s)) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return lower == "else";
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string sanitize(const std::string& id) {
  std::string out;
  for (char c : id) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ||
                    c == '.' || c == '#';
    out += ok ? c : '_';
  }
  return out;
}

}  // namespace

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::test: return "test";
    case Split::val: return "val";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  if (s == "val") return Split::val;
  throw ManifestError("unknown split '" + s + "'");
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// ---------------------------------------------------------------------------
// Manifest

std::size_t Manifest::class_index(const std::string& label) const {
  auto it = std::lower_bound(class_names.begin(), class_names.end(), label);
  if (it == class_names.end() || *it != label) {
    throw ManifestError("label '" + label + "' is not a known class");
  }
  return static_cast<std::size_t>(it - class_names.begin());
}

const ManifestEntry& Manifest::entry(const std::string& source_id) const {
  for (const auto& e : entries) {
    if (e.source_id == source_id) return e;
  }
  throw ManifestError("unknown source '" + source_id + "'");
}

void finalize_manifest(Manifest& manifest) {
  std::set<std::string> ids, labels;
  for (const auto& e : manifest.entries) {
    if (e.source_id.empty()) throw ManifestError("manifest entry with empty source_id");
    if (!ids.insert(e.source_id).second) {
      throw ManifestError("duplicate source_id '" + e.source_id + "' in manifest");
    }
    labels.insert(e.label);
  }
  manifest.class_names.assign(labels.begin(), labels.end());
}

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot read manifest " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ManifestError("empty manifest " + path.string());
  const auto header = split_csv_line(line);
  if (header.size() < 3 || trim(header[0]) != "source_id" || trim(header[1]) != "path" ||
      trim(header[2]) != "label" || (header.size() > 3 && trim(header[3]) != "split")) {
    throw ManifestError("manifest header must be source_id,path,label,split");
  }
  Manifest m;
  const fs::path base = path.parent_path();
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() < 3) {
      throw ManifestError(path.string() + ":" + std::to_string(lineno) + ": too few columns");
    }
    ManifestEntry e;
    e.source_id = trim(f[0]);
    e.path = trim(f[1]);
    if (e.path.is_relative()) e.path = base / e.path;
    e.label = trim(f[2]);
    if (f.size() > 3 && !trim(f[3]).empty()) e.split = parse_split(trim(f[3]));
    m.entries.push_back(std::move(e));
  }
  finalize_manifest(m);
  return m;
}

void save_manifest(const fs::path& path, const Manifest& manifest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ManifestError("cannot write manifest " + path.string());
  out << "source_id,path,label,split\n";
  const fs::path base = path.parent_path();
  for (const auto& e : manifest.entries) {
    // In-memory paths are absolute or relative to the working directory.
    fs::path p = e.path;
    const auto rel = fs::absolute(p).lexically_normal().lexically_relative(
        fs::absolute(base.empty() ? fs::path(".") : base).lexically_normal());
    if (!rel.empty() && *rel.begin() != "..") p = rel;
    out << csv_field(e.source_id) << ',' << csv_field(p.generic_string()) << ','
        << csv_field(e.label) << ',' << (e.split ? to_string(*e.split) : std::string()) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Split tables

const SplitRow* SplitTable::find(const std::string& category) const {
  for (const auto& r : rows) {
    if (r.category == category) return &r;
  }
  return nullptr;
}

SplitTable load_split_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot read split table " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ManifestError("empty split table " + path.string());
  SplitTable t;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 3) throw ManifestError("split table rows need 3 columns: " + line);
    SplitRow r;
    r.category = trim(f[0]);
    r.train_else = is_else(f[1]);
    if (!r.train_else) r.train_ids = split_ws(f[1]);
    r.test_else = is_else(f[2]);
    if (!r.test_else) r.test_ids = split_ws(f[2]);
    if (t.find(r.category)) throw ManifestError("duplicate category '" + r.category + "'");
    t.rows.push_back(std::move(r));
  }
  return t;
}

std::optional<std::uint64_t> numeric_file_id(const std::string& source_id) {
  const std::string name = fs::path(source_id).filename().string();
  std::size_t i = 0;
  while (i < name.size() && !std::isdigit(static_cast<unsigned char>(name[i]))) ++i;
  if (i == name.size()) return std::nullopt;
  std::uint64_t v = 0;
  for (; i < name.size() && std::isdigit(static_cast<unsigned char>(name[i])); ++i) {
    v = v * 10 + static_cast<std::uint64_t>(name[i] - '0');
  }
  return v;
}

Manifest apply_split_table(const Manifest& manifest, const SplitTable& table) {
  auto parse_ids = [](const SplitRow& row, const std::vector<std::string>& ids) {
    std::set<std::uint64_t> out;
    for (const auto& s : ids) {
      auto v = numeric_file_id(s);
      if (!v) throw ManifestError("non-numeric id '" + s + "' in row '" + row.category + "'");
      out.insert(*v);
    }
    return out;
  };

  struct RowSets {
    std::set<std::uint64_t> train, test, seen;
  };
  std::map<std::string, RowSets> sets;
  for (const auto& row : table.rows) {
    if (row.train_else && row.test_else) {
      throw ManifestError("row '" + row.category + "' uses Else on both sides");
    }
    RowSets rs{parse_ids(row, row.train_ids), parse_ids(row, row.test_ids), {}};
    for (auto id : rs.train) {
      if (rs.test.count(id)) {
        throw LeakageError("category '" + row.category + "': id " + std::to_string(id) +
                           " is listed in both train and test");
      }
    }
    sets.emplace(row.category, std::move(rs));
  }

  Manifest out = manifest;
  for (auto& e : out.entries) {
    const SplitRow* row = table.find(e.label);
    if (!row) throw ManifestError("split table has no row for category '" + e.label + "'");
    const auto id = numeric_file_id(e.source_id);
    if (!id) throw ManifestError("source '" + e.source_id + "' has no numeric file id");
    auto& rs = sets.at(e.label);
    const bool listed_train = rs.train.count(*id) > 0;
    const bool listed_test = rs.test.count(*id) > 0;
    const bool in_train = row->train_else ? !listed_test : listed_train;
    const bool in_test = row->test_else ? !listed_train : listed_test;
    if (in_train && in_test) {
      throw LeakageError("source '" + e.source_id + "' falls in both train and test");
    }
    if (!in_train && !in_test) {
      throw ManifestError("source '" + e.source_id + "' (category '" + e.label +
                          "') is not covered by the split table");
    }
    if (!rs.seen.insert(*id).second) {
      throw ManifestError("category '" + e.label + "' has two sources with file id " +
                          std::to_string(*id));
    }
    e.split = in_train ? Split::train : Split::test;
  }
  for (const auto& [category, rs] : sets) {
    for (const auto* side : {&rs.train, &rs.test}) {
      for (auto id : *side) {
        if (!rs.seen.count(id)) {
          spdlog::info("split table: {} id {} not in manifest, skipped", category, id);
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Segmentation

std::size_t segment_count(double duration_s, const SegmentParams& p) {
  if (!(p.len_s > 0.0) || !(p.hop_s > 0.0)) throw ConfigError("segment length and hop must be positive");
  if (duration_s + kTimeEps < p.len_s) return 0;
  return static_cast<std::size_t>(std::floor((duration_s - p.len_s) / p.hop_s + kTimeEps)) + 1;
}

SegmentIndex segment_source(const std::string& source_id, double duration_s,
                            const SegmentParams& p) {
  const std::size_t n = segment_count(duration_s, p);
  if (n == 0) {
    spdlog::info("skipping {}: {:.3f} s is shorter than one {:.3f} s segment", source_id,
                 duration_s, p.len_s);
  }
  SegmentIndex out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    Segment s;
    s.segment_id = source_id + "#" + std::to_string(k);
    s.source_id = source_id;
    s.start_s = static_cast<double>(k) * p.hop_s;
    s.end_s = s.start_s + p.len_s;
    out.push_back(std::move(s));
  }
  return out;
}

SegmentIndex segment_clip(const AudioClip& clip, const SegmentParams& p) {
  auto segs = segment_source(clip.source_id, clip.duration_s(), p);
  for (auto& s : segs) s.label = clip.label;
  return segs;
}

void check_disjoint_sources(const SegmentIndex& a, const SegmentIndex& b, const std::string& what) {
  std::set<std::string> ids;
  for (const auto& s : a) ids.insert(s.source_id);
  for (const auto& s : b) {
    if (ids.count(s.source_id)) {
      throw LeakageError(what + ": source '" + s.source_id + "' appears on both sides");
    }
  }
}

SplitIndices build_split(const Manifest& manifest, const SegmentParams& p) {
  SplitIndices out;
  for (const auto& e : manifest.entries) {
    if (!e.split) throw ManifestError("source '" + e.source_id + "' has no split assigned");
    if (*e.split == Split::val) {
      throw ManifestError("manifest split must be train or test for '" + e.source_id + "'");
    }
    const WavInfo info = probe_wav(e.path);
    auto segs = segment_source(e.source_id, info.duration_s(), p);
    for (auto& s : segs) {
      s.split = *e.split;
      s.label = e.label;
      s.label_index = manifest.class_index(e.label);
    }
    auto& dst = *e.split == Split::train ? out.train : out.test;
    dst.insert(dst.end(), segs.begin(), segs.end());
  }
  check_disjoint_sources(out.train, out.test, "train/test");
  return out;
}

SplitIndices build_split(const Manifest& manifest, const SplitTable& table,
                         const SegmentParams& p) {
  return build_split(apply_split_table(manifest, table), p);
}

// ---------------------------------------------------------------------------
// Validation carve and batching

CarvedSplit carve_validation(const SegmentIndex& train, const CarveOptions& opt,
                             std::uint64_t seed) {
  if (!(opt.fraction > 0.0 && opt.fraction < 1.0)) {
    throw ConfigError("validation fraction must lie in (0, 1)");
  }
  if (train.empty()) throw ContractError("cannot carve validation from an empty training index");

  // Units are segments or whole sources; groups are classes when stratified.
  std::vector<std::vector<std::size_t>> units;  // unit -> segment positions
  if (opt.source_level) {
    std::map<std::string, std::size_t> unit_of;
    for (std::size_t i = 0; i < train.size(); ++i) {
      auto [it, fresh] = unit_of.emplace(train[i].source_id, units.size());
      if (fresh) units.emplace_back();
      units[it->second].push_back(i);
    }
  } else {
    for (std::size_t i = 0; i < train.size(); ++i) units.push_back({i});
  }
  std::vector<std::vector<std::size_t>> groups;
  if (opt.stratified) {
    std::map<std::size_t, std::size_t> group_of;
    for (std::size_t u = 0; u < units.size(); ++u) {
      const auto label = train[units[u].front()].label_index;
      auto [it, fresh] = group_of.emplace(label, groups.size());
      if (fresh) groups.emplace_back();
      groups[it->second].push_back(u);
    }
  } else {
    groups.emplace_back(units.size());
    std::iota(groups[0].begin(), groups[0].end(), std::size_t{0});
  }

  Rng rng(seed);
  std::vector<bool> in_val(train.size(), false);
  for (auto& g : groups) {
    const auto k = static_cast<std::size_t>(std::llround(opt.fraction * static_cast<double>(g.size())));
    rng.shuffle(g);
    for (std::size_t i = 0; i < k; ++i) {
      for (auto pos : units[g[i]]) in_val[pos] = true;
    }
  }
  CarvedSplit out;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (in_val[i]) {
      out.val.push_back(train[i]);
      out.val.back().split = Split::val;
    } else {
      out.train.push_back(train[i]);
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   std::uint64_t seed, std::size_t epoch,
                                                   bool shuffle) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle) {
    Rng rng(derive_seed(seed, epoch));
    rng.shuffle(order);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < n; i += batch_size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch_size)));
  }
  return batches;
}

Batch gather_batch(const FeatureSet& set, const std::vector<std::size_t>& positions) {
  Batch b;
  const std::size_t plane = set.time * set.freq;
  std::vector<float> data(positions.size() * plane);
  for (std::size_t k = 0; k < positions.size(); ++k) {
    const auto p = positions[k];
    if (p >= set.size()) throw ContractError("batch position out of range");
    std::copy(set.features[p].begin(), set.features[p].end(), data.begin() + k * plane);
    b.labels.push_back(set.labels[p]);
    b.segment_ids.push_back(set.segment_ids[p]);
  }
  b.inputs = Tensor<float>({positions.size(), 1, set.time, set.freq}, std::move(data));
  return b;
}

// ---------------------------------------------------------------------------
// Feature store

FeatureStore::FeatureStore(const Manifest& manifest, FeatureConfig config, SegmentParams segments,
                           fs::path cache_dir, bool cache_only)
    : manifest_(manifest),
      config_(std::move(config)),
      segments_(segments),
      cache_dir_(std::move(cache_dir)),
      cache_only_(cache_only) {
  if (cache_only_ && cache_dir_.empty()) {
    throw ConfigError("cache-only feature loading needs a cache directory");
  }
}

fs::path FeatureStore::cache_path(const Segment& seg) const {
  return cache_dir_ / to_string(config_.kind) / (sanitize(seg.segment_id) + ".feat");
}

const AudioClip& FeatureStore::clip(const std::string& source_id) {
  auto it = clips_.find(source_id);
  if (it != clips_.end()) return it->second;
  // Keep a single decoded source resident; indices are grouped by source.
  clips_.clear();
  const auto& e = manifest_.entry(source_id);
  auto c = load_audio(e.path, e.source_id, e.label);
  if (manifest_.sample_rate != 0 && c.sample_rate != manifest_.sample_rate) {
    throw ManifestError("source '" + source_id + "' has sample rate " +
                        std::to_string(c.sample_rate) + ", expected " +
                        std::to_string(manifest_.sample_rate));
  }
  return clips_.emplace(source_id, std::move(c)).first->second;
}

const FeatureExtractor& FeatureStore::extractor(int sample_rate) {
  auto& slot = extractors_[sample_rate];
  if (!slot) {
    FeatureConfig c = config_;
    if (c.band.f_hi <= 0.0) c.band.f_hi = sample_rate / 2.0;
    slot = std::make_unique<FeatureExtractor>(c, sample_rate);
  }
  return *slot;
}

Spectrogram FeatureStore::extract(const Segment& seg) {
  const AudioClip& c = clip(seg.source_id);
  const auto sr = static_cast<double>(c.sample_rate);
  const auto len = static_cast<std::size_t>(std::llround(segments_.len_s * sr));
  auto start = static_cast<std::size_t>(std::llround(seg.start_s * sr));
  if (len > c.samples.size()) {
    throw TooShortError("source '" + seg.source_id + "' is shorter than one segment");
  }
  start = std::min(start, c.samples.size() - len);
  auto spec = extractor(c.sample_rate)(std::span<const float>(c.samples).subspan(start, len));
  spec.source_segment_id = seg.segment_id;
  return spec;
}

bool FeatureStore::cache_valid(const fs::path& p) {
  if (!fs::exists(p)) return false;
  try {
    const auto spec = load_feature(p);
    if (spec.kind != config_.kind) return false;
    const int sr = manifest_.sample_rate ? manifest_.sample_rate : spec.sample_rate;
    const auto& ex = extractor(sr);
    const auto n = static_cast<std::size_t>(std::llround(segments_.len_s * sr));
    const auto [t, f] = ex.output_shape(n);
    return spec.time_frames() == t && spec.freq_bins() == f && spec.sample_rate == sr;
  } catch (const Error&) {
    return false;
  }
}

bool FeatureStore::ensure_cached(const Segment& seg) {
  if (cache_dir_.empty()) throw ConfigError("no feature cache directory configured");
  const auto p = cache_path(seg);
  if (cache_valid(p)) return false;
  if (cache_only_) throw CacheMissError("missing cached feature " + p.string());
  fs::create_directories(p.parent_path());
  save_feature(p, extract(seg));
  return true;
}

Spectrogram FeatureStore::get(const Segment& seg) {
  if (!cache_dir_.empty()) {
    const auto p = cache_path(seg);
    if (fs::exists(p)) {
      auto spec = load_feature(p);
      spec.source_segment_id = seg.segment_id;
      return spec;
    }
    if (cache_only_) throw CacheMissError("missing cached feature " + p.string());
    auto spec = extract(seg);
    fs::create_directories(p.parent_path());
    save_feature(p, spec);
    return spec;
  }
  return extract(seg);
}

FeatureSet FeatureStore::load_set(const SegmentIndex& index) {
  FeatureSet set;
  for (const auto& seg : index) {
    const auto spec = get(seg);
    if (set.features.empty()) {
      set.time = spec.time_frames();
      set.freq = spec.freq_bins();
    } else if (spec.time_frames() != set.time || spec.freq_bins() != set.freq) {
      throw ShapeError("segment " + seg.segment_id + " has feature shape " +
                       std::to_string(spec.time_frames()) + "x" + std::to_string(spec.freq_bins()) +
                       ", expected " + std::to_string(set.time) + "x" + std::to_string(set.freq));
    }
    set.features.emplace_back(spec.data.data(), spec.data.data() + spec.data.size());
    set.labels.push_back(static_cast<std::int64_t>(seg.label_index));
    set.segment_ids.push_back(seg.segment_id);
    set.source_ids.push_back(seg.source_id);
  }
  return set;
}

// ---------------------------------------------------------------------------
// Synthetic data

double SyntheticSpec::clip_seconds() const {
  return segment_s + hop_s * static_cast<double>(segments_per_source - 1);
}

void SyntheticSpec::validate() const {
  if (num_classes == 0 || modes_per_class == 0 || tones_per_mode == 0) {
    throw SpecError("synthetic spec needs at least one class, mode and tone");
  }
  if (segments_per_source == 0 || train_sources_per_mode == 0 || test_sources_per_mode == 0) {
    throw SpecError("synthetic spec needs segments and sources on both splits");
  }
  if (sample_rate <= 0 || !(f_lo > 0.0) || !(f_hi > f_lo) || f_hi >= sample_rate / 2.0) {
    throw SpecError("synthetic tone range must satisfy 0 < f_lo < f_hi < sr/2");
  }
  if (!(segment_s > 0.0) || !(hop_s > 0.0)) throw SpecError("segment length and hop must be positive");
  if (!(amp_jitter >= 0.0 && amp_jitter < 1.0)) throw SpecError("amp_jitter must lie in [0, 1)");
  if (!tones.empty()) {
    if (tones.size() != num_classes) throw SpecError("tone table must have one entry per class");
    std::map<double, std::pair<std::size_t, std::size_t>> owner;
    for (std::size_t c = 0; c < tones.size(); ++c) {
      if (tones[c].size() != modes_per_class) throw SpecError("tone table mode count mismatch");
      for (std::size_t m = 0; m < tones[c].size(); ++m) {
        if (tones[c][m].size() != tones_per_mode) throw SpecError("tone table tone count mismatch");
        for (double f : tones[c][m]) {
          if (!(f > 0.0) || f >= sample_rate / 2.0) throw SpecError("tone outside (0, sr/2)");
          auto [it, fresh] = owner.emplace(f, std::make_pair(c, m));
          if (!fresh && it->second != std::make_pair(c, m)) {
            throw SpecError("tone " + std::to_string(f) + " Hz is shared by two modes");
          }
        }
      }
    }
  }
}

std::vector<std::vector<std::vector<double>>> synthetic_tones(const SyntheticSpec& spec) {
  spec.validate();
  if (!spec.tones.empty()) return spec.tones;
  const std::size_t k = spec.num_classes * spec.modes_per_class * spec.tones_per_mode;
  std::vector<double> grid(k);
  const double lo = hz_to_mel(spec.f_lo), hi = hz_to_mel(spec.f_hi);
  for (std::size_t i = 0; i < k; ++i) {
    const double t = k == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(k - 1);
    grid[i] = std::round(mel_to_hz(lo + t * (hi - lo)));
  }
  Rng rng(derive_seed(spec.seed, 0x70e5));
  rng.shuffle(grid);
  std::vector<std::vector<std::vector<double>>> out(
      spec.num_classes, std::vector<std::vector<double>>(spec.modes_per_class));
  std::size_t next = 0;
  for (auto& cls : out) {
    for (auto& mode : cls) {
      mode.assign(grid.begin() + static_cast<std::ptrdiff_t>(next),
                  grid.begin() + static_cast<std::ptrdiff_t>(next + spec.tones_per_mode));
      std::sort(mode.begin(), mode.end());
      next += spec.tones_per_mode;
    }
  }
  return out;
}

std::vector<float> synthesize_source(const SyntheticSpec& spec,
                                     const std::vector<double>& tone_freqs, std::uint64_t seed) {
  Rng rng(seed);
  const auto n = static_cast<std::size_t>(std::llround(spec.clip_seconds() * spec.sample_rate));
  const double base = 0.5 / static_cast<double>(tone_freqs.size());
  std::vector<double> amp, phase;
  double power = 0.0;
  for (std::size_t i = 0; i < tone_freqs.size(); ++i) {
    amp.push_back(base * (1.0 + spec.amp_jitter * rng.uniform(-1.0, 1.0)));
    phase.push_back(rng.uniform(0.0, 2.0 * std::numbers::pi));
    power += 0.5 * amp.back() * amp.back();
  }
  const double sigma =
      std::isfinite(spec.snr_db) ? std::sqrt(power / std::pow(10.0, spec.snr_db / 10.0)) : 0.0;
  std::vector<float> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    double v = 0.0;
    for (std::size_t i = 0; i < tone_freqs.size(); ++i) {
      v += amp[i] * std::sin(2.0 * std::numbers::pi * tone_freqs[i] * static_cast<double>(t) /
                                 spec.sample_rate +
                             phase[i]);
    }
    if (sigma > 0.0) v += sigma * rng.normal();
    out[t] = static_cast<float>(std::clamp(v, -1.0, 1.0));
  }
  return out;
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec, const fs::path& dir) {
  SyntheticDataset ds;
  ds.tones = synthetic_tones(spec);
  fs::create_directories(dir / "audio");
  ds.manifest.sample_rate = spec.sample_rate;
  std::size_t counter = 0;
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    for (std::size_t m = 0; m < spec.modes_per_class; ++m) {
      const std::size_t total = spec.train_sources_per_mode + spec.test_sources_per_mode;
      for (std::size_t k = 0; k < total; ++k, ++counter) {
        char id[32];
        std::snprintf(id, sizeof(id), "src%04zu", counter);
        const auto samples =
            synthesize_source(spec, ds.tones[c][m], derive_seed(spec.seed, counter));
        const fs::path rel = fs::path("audio") / (std::string(id) + ".wav");
        write_wav_pcm16(dir / rel, samples, spec.sample_rate);
        ManifestEntry e;
        e.source_id = id;
        e.path = dir / rel;
        e.label = "class" + std::to_string(c);
        e.split = k < spec.train_sources_per_mode ? Split::train : Split::test;
        ds.manifest.entries.push_back(std::move(e));
        ds.latent_mode[id] = c * spec.modes_per_class + m;
      }
    }
  }
  finalize_manifest(ds.manifest);
  save_manifest(dir / "manifest.csv", ds.manifest);
  std::ofstream latent(dir / "latent.csv", std::ios::trunc);
  latent << "source_id,latent_mode\n";
  for (const auto& e : ds.manifest.entries) latent << e.source_id << ',' << ds.latent_mode[e.source_id] << '\n';
  return ds;
}

std::map<std::string, std::size_t> load_latent_modes(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot read latent sidecar " + path.string());
  std::string line;
  std::getline(in, line);
  std::map<std::string, std::size_t> out;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 2) throw ManifestError("latent sidecar rows need 2 columns");
    out[trim(f[0])] = static_cast<std::size_t>(std::stoul(trim(f[1])));
  }
  return out;
}

}  // namespace cmoe
