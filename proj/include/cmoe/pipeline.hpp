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

// Glue from a RunConfig to trained and evaluated models.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cmoe/config.hpp"

namespace cmoe {

struct PreparedData {
  Manifest manifest;
  SplitIndices split;
  FeatureSet train;  // every training segment; validation is carved per seed
  FeatureSet test;
};

/// Manifest (+ split table), segmentation and feature extraction.
PreparedData prepare_data(const RunConfig& config);

/// Rows of `set` at `positions`, in that order.
FeatureSet subset(const FeatureSet& set, const std::vector<std::size_t>& positions);

/// The model configuration with the class count taken from the data.
ModelConfig model_config(const RunConfig& config, std::size_t num_classes);

struct SeedRun {
  std::uint64_t seed = 0;
  TrainResult train;
  EvalResult test;
};

/// Carves validation under `seed`, trains and evaluates on the test split.
/// With an output directory the best-validation checkpoint is reloaded before
/// testing; without one the final weights are tested.
SeedRun run_seed(const RunConfig& config, const PreparedData& data, std::uint64_t seed,
                 const std::filesystem::path& out_dir);

}  // namespace cmoe
