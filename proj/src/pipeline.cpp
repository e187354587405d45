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

#include "cmoe/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <map>

#include "cmoe/checkpoint.hpp"

namespace cmoe {

PreparedData prepare_data(const RunConfig& config) {
  PreparedData d;
  if (config.dataset.manifest.empty()) throw ConfigError("dataset.manifest is not set");
  d.manifest = load_manifest(config.dataset.manifest);
  if (config.dataset.sample_rate > 0) d.manifest.sample_rate = config.dataset.sample_rate;
  d.manifest.band = config.dataset.band;
  if (!config.dataset.split_table.empty()) {
    d.manifest = apply_split_table(d.manifest, load_split_table(config.dataset.split_table));
  }
  d.split = build_split(d.manifest, config.dataset.segments);
  if (d.split.train.empty()) throw ManifestError("no training segments");
  if (d.split.test.empty()) throw ManifestError("no test segments");

  FeatureStore store(d.manifest, config.feature, config.dataset.segments, config.cache_dir);
  d.train = store.load_set(d.split.train);
  d.test = store.load_set(d.split.test);
  spdlog::info("data: {} train / {} test segments, {} classes, features {}x{}", d.train.size(),
               d.test.size(), d.manifest.class_names.size(), d.train.time, d.train.freq);
  return d;
}

FeatureSet subset(const FeatureSet& set, const std::vector<std::size_t>& positions) {
  FeatureSet out;
  out.time = set.time;
  out.freq = set.freq;
  for (auto p : positions) {
    out.features.push_back(set.features.at(p));
    out.labels.push_back(set.labels.at(p));
    out.segment_ids.push_back(set.segment_ids.at(p));
    out.source_ids.push_back(set.source_ids.at(p));
  }
  return out;
}

ModelConfig model_config(const RunConfig& config, std::size_t num_classes) {
  ModelConfig m = config.model;
  m.head.num_classes = num_classes;
  return m;
}

SeedRun run_seed(const RunConfig& config, const PreparedData& data, std::uint64_t seed,
                 const std::filesystem::path& out_dir) {
  SeedRun run;
  run.seed = seed;

  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < data.train.size(); ++i) position[data.train.segment_ids[i]] = i;
  auto positions_of = [&](const SegmentIndex& idx) {
    std::vector<std::size_t> pos;
    for (const auto& s : idx) pos.push_back(position.at(s.segment_id));
    return pos;
  };

  FeatureSet train_set, val_set;
  if (config.dataset.val.fraction > 0.0) {
    const auto carved = carve_validation(data.split.train, config.dataset.val, seed);
    train_set = subset(data.train, positions_of(carved.train));
    val_set = subset(data.train, positions_of(carved.val));
  } else {
    train_set = data.train;
  }

  TrainConfig tc = config.train;
  tc.seed = seed;
  tc.out_dir = out_dir;
  Model<float> model(model_config(config, data.manifest.class_names.size()), seed);
  run.train = train(model, train_set, val_set.size() ? &val_set : nullptr, tc);
  if (!out_dir.empty()) {
    auto reg = model.registry();
    load_checkpoint(run.train.best_checkpoint, reg);
  }
  run.test = evaluate(model, data.test, config.train.batch_size);
  return run;
}

}  // namespace cmoe
