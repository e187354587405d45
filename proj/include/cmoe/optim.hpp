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

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "cmoe/nn.hpp"

namespace cmoe::optim {

struct AdamWConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;
};

/// AdamW with bias correction and decoupled weight decay:
/// theta <- theta - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * theta.
/// Parameters without a gradient buffer are skipped (their moments stay put).
template <typename T>
class AdamW {
 public:
  AdamW(std::vector<nn::NamedParam<T>> params, AdamWConfig config)
      : params_(std::move(params)), config_(config) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
      m_.emplace_back(p.tensor.numel(), T(0));
      v_.emplace_back(p.tensor.numel(), T(0));
    }
  }

  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    const T b1 = static_cast<T>(config_.beta1), b2 = static_cast<T>(config_.beta2);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i].tensor;
      if (!p.has_grad()) continue;
      auto g = p.grad();
      auto w = p.data();
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t j = 0; j < w.size(); ++j) {
        m[j] = b1 * m[j] + (T(1) - b1) * g[j];
        v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
        const double mhat = m[j] / bc1;
        const double vhat = v[j] / bc2;
        const double update = mhat / (std::sqrt(vhat) + config_.eps) + config_.weight_decay * w[j];
        w[j] = static_cast<T>(w[j] - lr * update);
      }
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
  }

  std::size_t step_count() const { return t_; }
  void set_step_count(std::size_t t) { t_ = t; }
  const AdamWConfig& config() const { return config_; }
  const std::vector<nn::NamedParam<T>>& params() const { return params_; }
  std::vector<std::vector<T>>& first_moments() { return m_; }
  std::vector<std::vector<T>>& second_moments() { return v_; }

 private:
  std::vector<nn::NamedParam<T>> params_;
  AdamWConfig config_;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
  std::size_t t_ = 0;
};

enum class Schedule { cosine, constant };

inline Schedule parse_schedule(const std::string& s) {
  if (s == "cosine") return Schedule::cosine;
  if (s == "constant") return Schedule::constant;
  throw ConfigError("unknown schedule '" + s + "' (expected cosine or constant)");
}

inline std::string to_string(Schedule s) { return s == Schedule::cosine ? "cosine" : "constant"; }

/// Learning rate for optimizer step `step` of `total`: cosine decays from
/// max_lr at step 0 towards 0 at step `total`.
inline double learning_rate(Schedule s, double max_lr, std::size_t step, std::size_t total) {
  if (s == Schedule::constant || total == 0) return max_lr;
  const double progress = std::min(1.0, static_cast<double>(step) / static_cast<double>(total));
  return 0.5 * max_lr * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace cmoe::optim
