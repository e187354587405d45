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
#include <fstream>
#include <limits>
#include <sstream>

#include "cmoe/checkpoint.hpp"
#include "cmoe/rng.hpp"
#include "cmoe/trainer.hpp"
#include "test_util.hpp"

namespace cmoe {
namespace {

using test::TempDir;

constexpr std::size_t kSide = 32;

FeatureSet toy_set(std::size_t n, std::size_t classes, std::uint64_t seed) {
  Rng rng(seed);
  FeatureSet s;
  s.time = kSide;
  s.freq = kSide;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % classes;
    std::vector<float> f(kSide * kSide);
    for (std::size_t t = 0; t < kSide; ++t) {
      for (std::size_t k = 0; k < kSide; ++k) {
        const double tone = k / 8 == c ? 2.0 : 0.0;
        f[t * kSide + k] = static_cast<float>(tone + 0.3 * rng.normal());
      }
    }
    s.features.push_back(std::move(f));
    s.labels.push_back(static_cast<std::int64_t>(c));
    s.segment_ids.push_back("seg" + std::to_string(i));
    s.source_ids.push_back("src" + std::to_string(i / 2));
  }
  return s;
}

ModelConfig small_model(std::size_t experts, bool balance = true) {
  ModelConfig m;
  m.head.num_experts = experts;
  m.head.num_classes = 2;
  m.head.hidden = 16;
  m.head.balance = balance;
  return m;
}

TrainConfig quick(std::size_t epochs, const std::filesystem::path& out = {}) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = 4;
  c.lr = 1e-3;
  c.seed = 3;
  c.out_dir = out;
  return c;
}

std::vector<std::vector<float>> snapshot(Model<float>& model) {
  std::vector<std::vector<float>> out;
  for (const auto& p : model.registry().params) out.push_back(p.tensor.values());
  return out;
}

TEST(Trainer, ZeroLearningRateLeavesParameters) {
  Model<float> model(small_model(2), 1);
  const auto before = snapshot(model);
  auto cfg = quick(1);
  cfg.lr = 0.0;
  train(model, toy_set(8, 2, 1), nullptr, cfg);
  EXPECT_EQ(snapshot(model), before);
}

TEST(Trainer, StepChangesParameters) {
  Model<float> model(small_model(2), 1);
  const auto before = snapshot(model);
  train(model, toy_set(8, 2, 1), nullptr, quick(1));
  EXPECT_NE(snapshot(model), before);
}

TEST(Trainer, BalanceOffGivesZeroBalanceColumn) {
  Model<float> model(small_model(2, false), 1);
  const auto r = train(model, toy_set(8, 2, 1), nullptr, quick(2));
  ASSERT_EQ(r.history.size(), 2u);
  for (const auto& e : r.history) {
    EXPECT_EQ(e.balance_loss, 0.0);
    EXPECT_GT(e.ce_loss, 0.0);
    ASSERT_EQ(e.ef.size(), 2u);
    EXPECT_NEAR(e.ef[0] + e.ef[1], 1.0, 1e-12);
  }
}

TEST(Trainer, BalanceOnIsAtLeastAlpha) {
  Model<float> model(small_model(2), 1);
  const auto r = train(model, toy_set(8, 2, 1), nullptr, quick(1));
  // m * sum(ef * P) >= alpha for any dispatch (Cauchy-Schwarz on the means).
  EXPECT_GE(r.history[0].balance_loss, 1e-2 * (1.0 - 1e-5));
}

TEST(Trainer, WritesMetricsAndCheckpoints) {
  TempDir dir;
  Model<float> model(small_model(3), 1);
  const auto val = toy_set(4, 2, 9);
  const auto r = train(model, toy_set(8, 2, 1), &val, quick(2, dir.path()));
  ASSERT_TRUE(std::filesystem::exists(r.metrics_path));
  ASSERT_TRUE(std::filesystem::exists(r.best_checkpoint));
  ASSERT_TRUE(std::filesystem::exists(r.final_checkpoint));
  std::istringstream in(test::read_file(r.metrics_path));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "epoch,ce_loss,balance_loss,val_acc,ef_0,ef_1,ef_2,seconds");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 7);
  }
  EXPECT_EQ(rows, 2u);
  EXPECT_LT(r.best_epoch, 2u);
  EXPECT_EQ(r.best_val_acc, r.history[r.best_epoch].val_acc);
}

TEST(Trainer, CheckpointReproducesAccuracy) {
  TempDir dir;
  const auto data = toy_set(8, 2, 1);
  Model<float> model(small_model(2), 1);
  train(model, data, nullptr, quick(2, dir.path()));
  const auto a = evaluate(model, data, 4);

  Model<float> fresh(small_model(2), 99);
  auto reg = fresh.registry();
  load_checkpoint(dir / "final.ckpt", reg);
  const auto b = evaluate(fresh, data, 4);
  EXPECT_EQ(a.accuracy, b.accuracy);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].chosen, b.records[i].chosen);
    EXPECT_EQ(a.records[i].probs, b.records[i].probs);
  }
}

TEST(Trainer, SameSeedSameHistory) {
  const auto data = toy_set(8, 2, 1);
  Model<float> m1(small_model(2), 5), m2(small_model(2), 5);
  const auto r1 = train(m1, data, nullptr, quick(2));
  const auto r2 = train(m2, data, nullptr, quick(2));
  for (std::size_t e = 0; e < 2; ++e) {
    EXPECT_EQ(r1.history[e].ce_loss, r2.history[e].ce_loss);
    EXPECT_EQ(r1.history[e].ef, r2.history[e].ef);
  }
  EXPECT_EQ(snapshot(m1), snapshot(m2));
}

TEST(Trainer, ShouldStopEndsEarly) {
  Model<float> model(small_model(2), 1);
  auto cfg = quick(5);
  cfg.should_stop = [](const EpochMetrics& m) { return m.epoch == 1; };
  EXPECT_EQ(train(model, toy_set(8, 2, 1), nullptr, cfg).history.size(), 2u);
}

TEST(Trainer, NonFiniteLossNamesTheBatch) {
  auto data = toy_set(8, 2, 1);
  data.features[3][5] = std::numeric_limits<float>::quiet_NaN();
  Model<float> model(small_model(2), 1);
  auto cfg = quick(1);
  cfg.shuffle = false;
  try {
    train(model, data, nullptr, cfg);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("seg3"), std::string::npos) << e.what();
  }
}

TEST(Trainer, ConfigAndInputErrors) {
  Model<float> model(small_model(2), 1);
  auto cfg = quick(1);
  cfg.batch_size = 0;
  EXPECT_THROW(train(model, toy_set(4, 2, 1), nullptr, cfg), ConfigError);
  EXPECT_THROW(train(model, FeatureSet{}, nullptr, quick(1)), ContractError);
}

TEST(Evaluate, DeterministicAndConsistent) {
  const auto data = toy_set(6, 2, 4);
  Model<float> model(small_model(3), 2);
  const auto a = evaluate(model, data, 4);
  const auto b = evaluate(model, data, 3);
  EXPECT_EQ(a.accuracy, b.accuracy);
  ASSERT_EQ(a.records.size(), 6u);
  std::size_t diag = 0, total = 0;
  for (std::size_t i = 0; i < a.confusion.size(); ++i) {
    for (std::size_t j = 0; j < a.confusion[i].size(); ++j) total += a.confusion[i][j];
    diag += a.confusion[i][i];
  }
  EXPECT_EQ(total, 6u);
  EXPECT_EQ(diag, a.correct);
  EXPECT_DOUBLE_EQ(a.accuracy, static_cast<double>(a.correct) / 6.0);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(a.records[i].predicted, b.records[i].predicted);
    EXPECT_EQ(a.records[i].chosen, b.records[i].chosen);
    double s = 0.0;
    for (double p : a.records[i].probs) s += p;
    EXPECT_NEAR(s, 1.0, 1e-5);
  }
}

TEST(Evaluate, EmptyClassIsNaN) {
  auto data = toy_set(4, 1, 4);
  Model<float> model(small_model(1), 2);
  const auto r = evaluate(model, data, 4);
  ASSERT_EQ(r.per_class.size(), 2u);
  EXPECT_TRUE(std::isnan(r.per_class[1]));
}

TEST(Checkpoint, RoundTripWithOptimizer) {
  TempDir dir;
  Model<float> a(small_model(2), 1);
  train(a, toy_set(4, 2, 1), nullptr, quick(1, dir.path()));
  Model<float> b(small_model(2), 7);
  auto reg = b.registry();
  optim::AdamW<float> opt(reg.params, {});
  load_checkpoint(dir / "final.ckpt", reg, &opt);
  EXPECT_EQ(snapshot(a), snapshot(b));
  auto ra = a.registry();
  for (std::size_t i = 0; i < ra.buffers.size(); ++i) {
    EXPECT_EQ(*ra.buffers[i].data, *reg.buffers[i].data) << ra.buffers[i].name;
  }
}

TEST(Checkpoint, RejectsMismatches) {
  TempDir dir;
  Model<float> a(small_model(2), 1);
  save_checkpoint(dir / "a.ckpt", a.registry());

  Model<float> other(small_model(3), 1);
  auto reg = other.registry();
  EXPECT_THROW(load_checkpoint(dir / "a.ckpt", reg), CheckpointError);

  auto bytes = test::read_file(dir / "a.ckpt");
  bytes[0] = 'X';
  test::write_file(dir / "bad.ckpt", bytes);
  auto reg_a = a.registry();
  EXPECT_THROW(load_checkpoint(dir / "bad.ckpt", reg_a), CheckpointError);

  test::write_file(dir / "short.ckpt", test::read_file(dir / "a.ckpt").substr(0, 100));
  EXPECT_THROW(load_checkpoint(dir / "short.ckpt", reg_a), CheckpointError);
  EXPECT_THROW(load_checkpoint(dir / "none.ckpt", reg_a), CheckpointError);
}

TEST(Checkpoint, DoubleModelsRoundTrip) {
  TempDir dir;
  Model<double> a(small_model(2), 1);
  save_checkpoint(dir / "d.ckpt", a.registry());
  Model<double> b(small_model(2), 2);
  auto reg = b.registry();
  load_checkpoint(dir / "d.ckpt", reg);
  auto ra = a.registry();
  for (std::size_t i = 0; i < ra.params.size(); ++i) {
    EXPECT_EQ(ra.params[i].tensor.values(), reg.params[i].tensor.values());
  }
}

}  // namespace
}  // namespace cmoe
