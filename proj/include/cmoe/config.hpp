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

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cmoe/datapipe.hpp"
#include "cmoe/features.hpp"
#include "cmoe/moe.hpp"
#include "cmoe/trainer.hpp"

namespace cmoe {

struct DatasetConfig {
  std::filesystem::path manifest;
  std::filesystem::path split_table;  // empty: the manifest carries the split
  int sample_rate = 0;                // 0: taken from the audio
  EffectiveBand band{100.0, 0.0};     // f_hi 0: Nyquist
  SegmentParams segments;
  CarveOptions val;
  std::filesystem::path latent;  // synthetic latent-mode sidecar, optional
};

/// One run: dataset, features, model, training, outputs. JSON file with the
/// sections dataset / feature / model / train / out; unknown keys are rejected.
struct RunConfig {
  DatasetConfig dataset;
  FeatureConfig feature;
  std::filesystem::path cache_dir;
  ModelConfig model;
  TrainConfig train;
  std::vector<std::uint64_t> seeds{42, 123};
  std::filesystem::path out_dir{"runs"};

  /// Feature config with the band resolved against a sample rate.
  FeatureConfig feature_for(int sample_rate) const;
  void validate() const;
};

/// "section.key" -> raw value from the command line.
using Overrides = std::vector<std::pair<std::string, std::string>>;

/// Defaults, then the file (if non-empty), then the overrides. Relative paths
/// in the file resolve against the file's directory.
RunConfig load_run_config(const std::filesystem::path& path, const Overrides& overrides = {});
RunConfig parse_run_config(const std::string& json_text, const Overrides& overrides = {},
                           const std::filesystem::path& base_dir = {});
std::string dump_run_config(const RunConfig& config);

/// Every accepted "section.key".
std::vector<std::string> run_config_keys();

}  // namespace cmoe
