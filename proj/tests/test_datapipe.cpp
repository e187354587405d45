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

#include <algorithm>
#include <cmath>
#include <set>

#include "cmoe/datapipe.hpp"
#include "cmoe/rng.hpp"
#include "test_util.hpp"

namespace cmoe {
namespace {

namespace fs = std::filesystem;
using test::TempDir;

fs::path split_table_path(const std::string& name) {
  return fs::path(CMOE_SOURCE_DIR) / "data" / "splits" / name;
}

/// Counts window starts directly: every k*hop with k*hop + len <= duration.
std::size_t brute_segment_count(double duration, double len, double hop) {
  std::size_t n = 0;
  for (std::size_t k = 0;; ++k) {
    if (static_cast<double>(k) * hop + len > duration + 1e-9) break;
    ++n;
  }
  return n;
}

/// Manifest with one entry per id in the table (both sides), no audio needed.
Manifest manifest_from_table(const SplitTable& table) {
  Manifest m;
  for (const auto& row : table.rows) {
    for (const auto* ids : {&row.train_ids, &row.test_ids}) {
      for (const auto& id : *ids) {
        ManifestEntry e;
        e.source_id = row.category + "_" + id;
        e.path = e.source_id + ".wav";
        e.label = row.category;
        m.entries.push_back(e);
      }
    }
  }
  finalize_manifest(m);
  return m;
}

SegmentIndex fake_train(std::size_t sources, std::size_t per_source, std::size_t classes) {
  SegmentIndex idx;
  for (std::size_t s = 0; s < sources; ++s) {
    for (std::size_t k = 0; k < per_source; ++k) {
      Segment seg;
      seg.source_id = "s" + std::to_string(s);
      seg.segment_id = seg.source_id + "#" + std::to_string(k);
      seg.label_index = s % classes;
      idx.push_back(seg);
    }
  }
  return idx;
}

SyntheticSpec small_spec() {
  SyntheticSpec s;
  s.num_classes = 2;
  s.modes_per_class = 1;
  s.tones_per_mode = 2;
  s.segment_s = 0.5;
  s.hop_s = 0.25;
  s.segments_per_source = 2;
  s.train_sources_per_mode = 2;
  s.test_sources_per_mode = 1;
  return s;
}

TEST(Segmentation, CountMatchesBruteForce) {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const double len = rng.uniform(0.5, 40.0);
    const double hop = rng.uniform(0.25, len);
    const double dur = rng.uniform(0.0, 300.0);
    ASSERT_EQ(segment_count(dur, {len, hop}), brute_segment_count(dur, len, hop))
        << "dur=" << dur << " len=" << len << " hop=" << hop;
  }
}

TEST(Segmentation, NinetySecondClip) {
  const auto segs = segment_source("a", 90.0, {30.0, 15.0});
  ASSERT_EQ(segs.size(), 5u);
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_DOUBLE_EQ(segs[k].start_s, 15.0 * static_cast<double>(k));
    EXPECT_DOUBLE_EQ(segs[k].end_s, segs[k].start_s + 30.0);
    EXPECT_EQ(segs[k].segment_id, "a#" + std::to_string(k));
  }
}

TEST(Segmentation, ShortClips) {
  EXPECT_EQ(segment_count(30.0, {}), 1u);
  EXPECT_EQ(segment_count(29.0, {}), 0u);
  EXPECT_EQ(segment_count(44.9, {}), 1u);
  EXPECT_EQ(segment_count(45.0, {}), 2u);
  EXPECT_TRUE(segment_source("b", 29.0, {}).empty());
  EXPECT_THROW(segment_count(10.0, {0.0, 1.0}), ConfigError);
}

TEST(Segmentation, DisjointCheck) {
  const auto a = segment_source("x", 60.0, {});
  const auto b = segment_source("y", 60.0, {});
  EXPECT_NO_THROW(check_disjoint_sources(a, b, "t"));
  EXPECT_THROW(check_disjoint_sources(a, segment_source("x", 30.0, {}), "t"), LeakageError);
}

TEST(SplitTable, ShipsearTableHasNoOverlap) {
  const auto table = load_split_table(split_table_path("shipsear.csv"));
  EXPECT_EQ(table.rows.size(), 9u);
  const auto m = apply_split_table(manifest_from_table(table), table);
  std::set<std::string> train, test;
  for (const auto& e : m.entries) {
    ASSERT_TRUE(e.split.has_value());
    (*e.split == Split::train ? train : test).insert(e.source_id);
  }
  for (const auto& id : test) EXPECT_EQ(train.count(id), 0u) << id;
  EXPECT_EQ(train.size() + test.size(), m.entries.size());
  EXPECT_EQ(m.entry("Dredger_95").split, Split::test);
  EXPECT_EQ(m.entry("Passenger ship_06").split, Split::train);
  EXPECT_EQ(m.entry("Passenger ship_9").split, Split::test);
}

TEST(SplitTable, LeadingZerosNameTheSameFile) {
  EXPECT_EQ(numeric_file_id("shipsear_080"), 80u);
  EXPECT_EQ(numeric_file_id("80"), 80u);
  EXPECT_EQ(numeric_file_id("dir/06__x.wav"), 6u);
  EXPECT_FALSE(numeric_file_id("none").has_value());
}

TEST(SplitTable, IdOnBothSidesIsLeakage) {
  auto table = load_split_table(split_table_path("shipsear.csv"));
  const auto m = manifest_from_table(table);
  for (auto& r : table.rows) {
    if (r.category == "Dredger") r.train_ids.push_back("95");
  }
  EXPECT_THROW(apply_split_table(m, table), LeakageError);
}

TEST(SplitTable, ElseTakesTheRemainder) {
  const auto table = load_split_table(split_table_path("deepship.csv"));
  ASSERT_EQ(table.rows.size(), 4u);
  Manifest m;
  for (int id : {1, 3, 100, 101}) {
    ManifestEntry e;
    e.source_id = "cargo_" + std::to_string(id);
    e.label = "Cargo ship";
    m.entries.push_back(e);
  }
  finalize_manifest(m);
  const auto out = apply_split_table(m, table);
  EXPECT_EQ(out.entry("cargo_1").split, Split::test);
  EXPECT_EQ(out.entry("cargo_3").split, Split::train);
  EXPECT_EQ(out.entry("cargo_100").split, Split::test);
  EXPECT_EQ(out.entry("cargo_101").split, Split::train);
}

TEST(SplitTable, CoverageErrors) {
  SplitTable t;
  t.rows.push_back({"A", false, {"1"}, false, {"2"}});
  Manifest m;
  m.entries.push_back({"a_3", "a_3.wav", "A", std::nullopt});
  finalize_manifest(m);
  EXPECT_THROW(apply_split_table(m, t), ManifestError);

  Manifest other;
  other.entries.push_back({"b_1", "b_1.wav", "B", std::nullopt});
  finalize_manifest(other);
  EXPECT_THROW(apply_split_table(other, t), ManifestError);

  Manifest dup;
  dup.entries.push_back({"a_1", "x.wav", "A", std::nullopt});
  dup.entries.push_back({"a_01", "y.wav", "A", std::nullopt});
  finalize_manifest(dup);
  EXPECT_THROW(apply_split_table(dup, t), ManifestError);

  SplitTable both;
  both.rows.push_back({"A", true, {}, true, {}});
  EXPECT_THROW(apply_split_table(m, both), ManifestError);
}

TEST(Carve, FifteenPercentOfHundred) {
  const auto train = fake_train(20, 5, 4);
  const auto c = carve_validation(train, {}, 3);
  EXPECT_EQ(c.val.size(), 15u);
  EXPECT_EQ(c.train.size(), 85u);
  for (const auto& s : c.val) EXPECT_EQ(s.split, Split::val);
}

TEST(Carve, SameSeedSameCarve) {
  const auto train = fake_train(20, 5, 4);
  const auto a = carve_validation(train, {}, 9);
  const auto b = carve_validation(train, {}, 9);
  const auto c = carve_validation(train, {}, 10);
  auto ids = [](const SegmentIndex& idx) {
    std::vector<std::string> v;
    for (const auto& s : idx) v.push_back(s.segment_id);
    return v;
  };
  EXPECT_EQ(ids(a.val), ids(b.val));
  EXPECT_NE(ids(a.val), ids(c.val));
}

TEST(Carve, SourceLevelKeepsSourcesWhole) {
  const auto train = fake_train(20, 5, 4);
  const auto c = carve_validation(train, {0.15, true, false}, 4);
  EXPECT_EQ(c.val.size(), 15u);  // 3 of 20 sources
  EXPECT_NO_THROW(check_disjoint_sources(c.train, c.val, "carve"));
}

TEST(Carve, StratifiedDrawsPerClass) {
  const auto train = fake_train(20, 5, 4);
  const auto c = carve_validation(train, {0.2, false, true}, 5);
  std::vector<std::size_t> per(4, 0);
  for (const auto& s : c.val) ++per[s.label_index];
  for (auto n : per) EXPECT_EQ(n, 5u);
}

TEST(Carve, Errors) {
  const auto train = fake_train(2, 2, 1);
  EXPECT_THROW(carve_validation(train, {0.0}, 1), ConfigError);
  EXPECT_THROW(carve_validation(train, {1.0}, 1), ConfigError);
  EXPECT_THROW(carve_validation({}, {}, 1), ContractError);
}

TEST(Batches, TenByFour) {
  const auto b = make_batches(10, 4, 1, 0, false);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[0], (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_EQ(b[1], (std::vector<std::size_t>{4, 5, 6, 7}));
  EXPECT_EQ(b[2], (std::vector<std::size_t>{8, 9}));
}

TEST(Batches, ShuffleIsAPermutationPerEpoch) {
  const auto a = make_batches(10, 4, 1, 0);
  const auto again = make_batches(10, 4, 1, 0);
  const auto next = make_batches(10, 4, 1, 1);
  EXPECT_EQ(a, again);
  EXPECT_NE(a, next);
  std::vector<std::size_t> all;
  for (const auto& v : a) all.insert(all.end(), v.begin(), v.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(all[i], i);
  EXPECT_EQ(a.back().size(), 2u);
  EXPECT_THROW(make_batches(3, 0, 1, 0), ConfigError);
}

TEST(Batches, GatherStacksRows) {
  FeatureSet set;
  set.time = 2;
  set.freq = 3;
  for (int i = 0; i < 3; ++i) {
    set.features.push_back(std::vector<float>(6, static_cast<float>(i)));
    set.labels.push_back(i);
    set.segment_ids.push_back("s" + std::to_string(i));
    set.source_ids.push_back("s");
  }
  const auto b = gather_batch(set, {2, 0});
  EXPECT_EQ(b.inputs.shape(), (std::vector<std::size_t>{2, 1, 2, 3}));
  EXPECT_EQ(b.inputs.values()[0], 2.0f);
  EXPECT_EQ(b.inputs.values()[6], 0.0f);
  EXPECT_EQ(b.labels, (std::vector<std::int64_t>{2, 0}));
  EXPECT_THROW(gather_batch(set, {3}), ContractError);
}

TEST(Manifest, SaveLoadRoundTrip) {
  TempDir dir;
  Manifest m;
  m.entries.push_back({"a,1", dir.path() / "audio" / "a.wav", "Tug boat", Split::train});
  m.entries.push_back({"b", "/abs/b.wav", "Cargo", Split::test});
  m.entries.push_back({"c", dir.path() / "c.wav", "Cargo", std::nullopt});
  finalize_manifest(m);
  save_manifest(dir / "manifest.csv", m);
  EXPECT_NE(test::read_file(dir / "manifest.csv").find("audio/a.wav"), std::string::npos);
  const auto back = load_manifest(dir / "manifest.csv");
  ASSERT_EQ(back.entries.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.entries[i].source_id, m.entries[i].source_id);
    EXPECT_EQ(back.entries[i].path.lexically_normal(), m.entries[i].path.lexically_normal());
    EXPECT_EQ(back.entries[i].label, m.entries[i].label);
    EXPECT_EQ(back.entries[i].split, m.entries[i].split);
  }
  EXPECT_EQ(back.class_names, (std::vector<std::string>{"Cargo", "Tug boat"}));
}

TEST(Manifest, Errors) {
  TempDir dir;
  test::write_file(dir / "bad.csv", "id,file\n");
  EXPECT_THROW(load_manifest(dir / "bad.csv"), ManifestError);
  test::write_file(dir / "dup.csv", "source_id,path,label,split\na,x.wav,A,train\na,y.wav,A,test\n");
  EXPECT_THROW(load_manifest(dir / "dup.csv"), ManifestError);
  EXPECT_THROW(load_manifest(dir / "missing.csv"), ManifestError);
}

TEST(Synthetic, ByteIdenticalUnderSeed) {
  TempDir a, b;
  const auto spec = small_spec();
  const auto da = generate_synthetic(spec, a.path());
  generate_synthetic(spec, b.path());
  ASSERT_EQ(da.manifest.entries.size(), 6u);
  for (const auto& e : da.manifest.entries) {
    const auto rel = e.path.lexically_relative(a.path());
    EXPECT_EQ(test::read_file(a.path() / rel), test::read_file(b.path() / rel)) << rel;
  }
  EXPECT_EQ(test::read_file(a / "manifest.csv"), test::read_file(b / "manifest.csv"));
  EXPECT_EQ(test::read_file(a / "latent.csv"), test::read_file(b / "latent.csv"));
}

TEST(Synthetic, LayoutAndSegments) {
  TempDir dir;
  const auto spec = small_spec();
  const auto ds = generate_synthetic(spec, dir.path());
  const auto m = load_manifest(dir / "manifest.csv");
  const auto split = build_split(m, {spec.segment_s, spec.hop_s});
  EXPECT_EQ(split.train.size(), 2u * 2u * 2u);
  EXPECT_EQ(split.test.size(), 2u * 1u * 2u);
  EXPECT_EQ(load_latent_modes(dir / "latent.csv"), ds.latent_mode);
  std::set<double> all;
  for (const auto& cls : ds.tones) {
    for (const auto& mode : cls) all.insert(mode.begin(), mode.end());
  }
  EXPECT_EQ(all.size(), 4u);
}

TEST(Synthetic, SpecValidation) {
  auto s = small_spec();
  EXPECT_NO_THROW(s.validate());
  s.tones = {{{200.0, 400.0}}, {{400.0, 800.0}}};
  EXPECT_THROW(s.validate(), SpecError);
  s.tones = {{{200.0, 400.0}}, {{600.0, 800.0}}};
  EXPECT_NO_THROW(s.validate());
  s = small_spec();
  s.f_hi = 4000.0;
  EXPECT_THROW(s.validate(), SpecError);
  s = small_spec();
  s.train_sources_per_mode = 0;
  EXPECT_THROW(s.validate(), SpecError);
}

class StoreTest : public ::testing::Test {
 protected:
  void SetUp() override {
    spec_ = small_spec();
    generate_synthetic(spec_, dir_ / "data");
    manifest_ = load_manifest(dir_ / "data" / "manifest.csv");
    split_ = build_split(manifest_, {spec_.segment_s, spec_.hop_s});
    config_.kind = FeatureKind::mel;
    config_.n_filters = 20;
  }

  TempDir dir_;
  SyntheticSpec spec_;
  Manifest manifest_;
  SplitIndices split_;
  FeatureConfig config_;
};

TEST_F(StoreTest, CacheOnlyMissRaises) {
  FeatureStore store(manifest_, config_, {spec_.segment_s, spec_.hop_s}, dir_ / "cache", true);
  EXPECT_THROW(store.get(split_.train[0]), CacheMissError);
  EXPECT_THROW(FeatureStore(manifest_, config_, {}, {}, true), ConfigError);
}

TEST_F(StoreTest, EnsureCachedIsIdempotent) {
  const SegmentParams p{spec_.segment_s, spec_.hop_s};
  FeatureStore store(manifest_, config_, p, dir_ / "cache");
  EXPECT_TRUE(store.ensure_cached(split_.train[0]));
  const auto path = store.cache_path(split_.train[0]);
  const auto bytes = test::read_file(path);
  EXPECT_FALSE(store.ensure_cached(split_.train[0]));
  EXPECT_EQ(test::read_file(path), bytes);

  FeatureStore cached(manifest_, config_, p, dir_ / "cache", true);
  const auto a = cached.get(split_.train[0]);
  FeatureStore fresh(manifest_, config_, p);
  const auto b = fresh.get(split_.train[0]);
  EXPECT_EQ(a.time_frames(), b.time_frames());
  EXPECT_EQ(a.freq_bins(), b.freq_bins());
  EXPECT_TRUE(a.data == b.data);
}

TEST_F(StoreTest, LoadSetFollowsIndexOrder) {
  FeatureStore store(manifest_, config_, {spec_.segment_s, spec_.hop_s});
  const auto set = store.load_set(split_.test);
  ASSERT_EQ(set.size(), split_.test.size());
  EXPECT_EQ(set.freq, 20u);
  for (std::size_t i = 0; i < set.size(); ++i) {
    EXPECT_EQ(set.segment_ids[i], split_.test[i].segment_id);
    EXPECT_EQ(set.labels[i], static_cast<std::int64_t>(split_.test[i].label_index));
    EXPECT_EQ(set.features[i].size(), set.time * set.freq);
  }
}

}  // namespace
}  // namespace cmoe
