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
#include <functional>
#include <string>
#include <vector>

#include "cmoe/datapipe.hpp"
#include "cmoe/moe.hpp"
#include "cmoe/optim.hpp"

namespace cmoe {

struct EpochMetrics {
  std::size_t epoch = 0;
  double ce_loss = 0.0;
  double balance_loss = 0.0;
  double val_acc = 0.0;
  double train_acc = 0.0;
  std::vector<double> ef;  // dispatch fractions over the epoch
  double seconds = 0.0;
};

struct TrainConfig {
  double lr = 5e-4;
  double weight_decay = 1e-5;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  std::uint64_t seed = 42;
  optim::Schedule schedule = optim::Schedule::cosine;
  bool shuffle = true;
  /// Empty: no files are written.
  std::filesystem::path out_dir;
  /// Optional; called after every epoch, returning true ends training early.
  std::function<bool(const EpochMetrics&)> should_stop;

  void validate() const;
};

struct TrainResult {
  std::vector<EpochMetrics> history;
  double best_val_acc = -1.0;
  std::size_t best_epoch = 0;
  std::filesystem::path best_checkpoint;
  std::filesystem::path final_checkpoint;
  std::filesystem::path metrics_path;
};

struct ExpertRecord {
  std::string segment_id;
  std::string source_id;
  std::size_t label = 0;
  std::size_t predicted = 0;
  std::size_t chosen = 0;
  std::vector<double> probs;
};

struct EvalResult {
  double accuracy = 0.0;
  std::vector<double> per_class;  // NaN for classes without samples
  std::vector<std::vector<std::size_t>> confusion;  // [actual][predicted]
  std::vector<ExpertRecord> records;
  std::size_t total = 0;
  std::size_t correct = 0;
};

/// Segment-level evaluation in eval mode without gradient recording.
EvalResult evaluate(Model<float>& model, const FeatureSet& set, std::size_t batch_size = 32);

/// Runs the training loop: per epoch, seed-derived batches through
/// forward, total loss, backward and an AdamW step, then validation. With an
/// output directory it writes metrics.csv, best.ckpt (best validation
/// accuracy, first epoch on ties) and final.ckpt. Without a validation set the
/// epoch's training accuracy stands in. A non-finite loss raises NumericError
/// naming the batch.
TrainResult train(Model<float>& model, const FeatureSet& train_set, const FeatureSet* val_set,
                  const TrainConfig& config);

/// Writes the metrics file: epoch,ce_loss,balance_loss,val_acc,ef_0..ef_{m-1},seconds.
void write_metrics(const std::filesystem::path& path, const std::vector<EpochMetrics>& history,
                   std::size_t num_experts);

}  // namespace cmoe
