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

#include "cmoe/trainer.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

#include "cmoe/checkpoint.hpp"

namespace cmoe {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (!(lr >= 0.0)) throw ConfigError("learning rate must be non-negative");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
}

EvalResult evaluate(Model<float>& model, const FeatureSet& set, std::size_t batch_size) {
  if (set.size() == 0) throw ContractError("cannot evaluate an empty segment index");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  NoGradGuard guard;
  const std::size_t classes = model.config().head.num_classes;
  EvalResult res;
  res.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  for (const auto& positions : make_batches(set.size(), batch_size, 0, 0, false)) {
    const Batch b = gather_batch(set, positions);
    const auto out = model(b.inputs, false);
    const std::size_t m = out.decision.probs.dim(1);
    for (std::size_t k = 0; k < positions.size(); ++k) {
      const float* row = out.logits.values().data() + k * classes;
      ExpertRecord r;
      r.segment_id = b.segment_ids[k];
      r.source_id = set.source_ids[positions[k]];
      r.label = static_cast<std::size_t>(b.labels[k]);
      r.predicted = argmax_lowest(row, row + classes);
      r.chosen = out.decision.chosen[k];
      for (std::size_t j = 0; j < m; ++j) r.probs.push_back(out.decision.probs.values()[k * m + j]);
      if (r.label >= classes) throw LabelError("label outside the model's class range");
      ++res.confusion[r.label][r.predicted];
      res.correct += r.label == r.predicted;
      ++res.total;
      res.records.push_back(std::move(r));
    }
  }
  res.accuracy = static_cast<double>(res.correct) / static_cast<double>(res.total);
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t row = 0;
    for (auto v : res.confusion[c]) row += v;
    res.per_class.push_back(row ? static_cast<double>(res.confusion[c][c]) / static_cast<double>(row)
                                : std::numeric_limits<double>::quiet_NaN());
  }
  return res;
}

void write_metrics(const fs::path& path, const std::vector<EpochMetrics>& history,
                   std::size_t num_experts) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write metrics file " + path.string());
  out << "epoch,ce_loss,balance_loss,val_acc";
  for (std::size_t j = 0; j < num_experts; ++j) out << ",ef_" << j;
  out << ",seconds\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::string(buf);
  };
  for (const auto& m : history) {
    out << m.epoch << ',' << num(m.ce_loss) << ',' << num(m.balance_loss) << ',' << num(m.val_acc);
    for (double f : m.ef) out << ',' << num(f);
    out << ',' << num(m.seconds) << '\n';
  }
}

TrainResult train(Model<float>& model, const FeatureSet& train_set, const FeatureSet* val_set,
                  const TrainConfig& config) {
  config.validate();
  if (train_set.size() == 0) throw ContractError("training set is empty");
  const std::size_t m = model.config().head.num_experts;

  auto reg = model.registry();
  optim::AdamWConfig oc;
  oc.lr = config.lr;
  oc.weight_decay = config.weight_decay;
  optim::AdamW<float> opt(reg.params, oc);

  TrainResult result;
  const bool write = !config.out_dir.empty();
  if (write) {
    fs::create_directories(config.out_dir);
    result.metrics_path = config.out_dir / "metrics.csv";
    result.best_checkpoint = config.out_dir / "best.ckpt";
    result.final_checkpoint = config.out_dir / "final.ckpt";
  }

  const std::size_t steps_per_epoch = (train_set.size() + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = steps_per_epoch * config.epochs;
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochMetrics em;
    em.epoch = epoch;
    std::vector<std::size_t> counts(m, 0);
    double ce_sum = 0.0, bal_sum = 0.0;
    std::size_t seen = 0, correct = 0;

    for (const auto& positions :
         make_batches(train_set.size(), config.batch_size, config.seed, epoch, config.shuffle)) {
      const Batch b = gather_batch(train_set, positions);
      auto out = model(b.inputs, true);
      auto ce = ops::cross_entropy(out.logits, b.labels);
      auto loss = out.balance.defined() ? ops::add(ce, out.balance) : ce;
      const double loss_v = loss.item();
      if (!std::isfinite(loss_v)) {
        std::string ids;
        for (const auto& id : b.segment_ids) ids += (ids.empty() ? "" : " ") + id;
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch [" +
                           ids + "]");
      }
      opt.zero_grad();
      backward(loss);
      opt.step(optim::learning_rate(config.schedule, config.lr, step, total_steps));
      ++step;

      const std::size_t n = positions.size();
      ce_sum += static_cast<double>(ce.item()) * static_cast<double>(n);
      if (out.balance.defined()) bal_sum += static_cast<double>(out.balance.item()) * n;
      for (std::size_t j = 0; j < m; ++j) counts[j] += out.stats.counts[j];
      const std::size_t classes = out.logits.dim(1);
      for (std::size_t k = 0; k < n; ++k) {
        const float* row = out.logits.values().data() + k * classes;
        correct += static_cast<std::int64_t>(argmax_lowest(row, row + classes)) == b.labels[k];
      }
      seen += n;
    }
    opt.zero_grad();

    em.ce_loss = ce_sum / static_cast<double>(seen);
    em.balance_loss = bal_sum / static_cast<double>(seen);
    em.train_acc = static_cast<double>(correct) / static_cast<double>(seen);
    for (std::size_t j = 0; j < m; ++j) em.ef.push_back(double(counts[j]) / double(seen));
    em.val_acc = (val_set && val_set->size() > 0)
                     ? evaluate(model, *val_set, config.batch_size).accuracy
                     : em.train_acc;
    em.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(em);

    if (em.val_acc > result.best_val_acc) {
      result.best_val_acc = em.val_acc;
      result.best_epoch = epoch;
      if (write) save_checkpoint(result.best_checkpoint, reg);
    }
    if (write) write_metrics(result.metrics_path, result.history, m);
    spdlog::debug("epoch {} ce={:.4f} bal={:.4f} val={:.3f}", epoch, em.ce_loss, em.balance_loss,
                  em.val_acc);
    if (config.should_stop && config.should_stop(em)) break;
  }
  if (write) save_checkpoint(result.final_checkpoint, reg, &opt);
  return result;
}

}  // namespace cmoe
