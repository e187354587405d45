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

// Mixture-of-experts classification head: a linear router picks one expert
// per sample (top-1), each expert is Linear-BN-ReLU-Linear, an optional
// residual expert sees every sample, and a balance term penalises skewed
// routing.

#include <string>
#include <vector>

#include "cmoe/backbone.hpp"
#include "cmoe/nn.hpp"

namespace cmoe {

enum class NormFunc { softmax, sigmoid };

NormFunc parse_norm_func(const std::string& s);
std::string to_string(NormFunc f);

struct HeadConfig {
  std::size_t num_experts = 4;
  std::size_t num_classes = 2;
  std::size_t in_dim = 512;
  std::size_t hidden = 128;
  NormFunc norm = NormFunc::softmax;
  bool residual = false;
  bool balance = true;
  double alpha = 1e-2;

  void validate() const;
};

/// Index of the largest entry; the lowest index wins ties.
template <typename It>
std::size_t argmax_lowest(It first, It last) {
  std::size_t best = 0, i = 0;
  for (auto it = first; it != last; ++it, ++i) {
    if (*it > *(first + static_cast<std::ptrdiff_t>(best))) best = i;
  }
  return best;
}

template <typename T>
struct RoutingDecision {
  Tensor<T> scores;  // [N, m]
  Tensor<T> probs;   // [N, m], connected to the router
  std::vector<std::size_t> chosen;
};

struct BalanceStats {
  std::vector<std::size_t> counts;
  std::vector<double> ef;
  std::vector<double> ep;
  double alpha = 0.0;
  std::size_t m = 0;
  std::size_t n = 0;
};

template <typename T>
Tensor<T> normalize_scores(const Tensor<T>& scores, NormFunc f) {
  return f == NormFunc::softmax ? ops::softmax(scores) : ops::sigmoid(scores);
}

/// Routing from router scores. `chosen` is the argmax of the scores, which is
/// the argmax of the probabilities for either (strictly increasing) normalizer.
template <typename T>
RoutingDecision<T> route(const Tensor<T>& scores, NormFunc f) {
  if (!scores.defined() || scores.rank() != 2 || scores.dim(1) == 0) {
    throw ShapeError("route: scores must be [N, m]");
  }
  RoutingDecision<T> d;
  d.scores = scores;
  d.probs = normalize_scores(scores, f);
  const std::size_t n = scores.dim(0), m = scores.dim(1);
  d.chosen.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = scores.values().data() + i * m;
    d.chosen[i] = argmax_lowest(row, row + m);
  }
  return d;
}

/// Counts and fractions for one batch. ep uses the probability values.
template <typename T>
BalanceStats balance_stats(const RoutingDecision<T>& d, double alpha) {
  BalanceStats s;
  s.n = d.chosen.size();
  s.m = d.probs.dim(1);
  s.alpha = alpha;
  if (s.n == 0) throw ContractError("balance statistics need a non-empty batch");
  s.counts.assign(s.m, 0);
  for (auto c : d.chosen) {
    if (c >= s.m) throw ContractError("routing chose a nonexistent expert");
    ++s.counts[c];
  }
  s.ef.resize(s.m);
  s.ep.assign(s.m, 0.0);
  for (std::size_t j = 0; j < s.m; ++j) s.ef[j] = double(s.counts[j]) / double(s.n);
  for (std::size_t i = 0; i < s.n; ++i)
    for (std::size_t j = 0; j < s.m; ++j) s.ep[j] += d.probs.values()[i * s.m + j];
  for (auto& v : s.ep) v /= double(s.n);
  return s;
}

/// alpha * m * sum_j ef_j * ep_j with ef constant and ep = mean of probs.
template <typename T>
Tensor<T> balance_loss(const Tensor<T>& probs, const std::vector<std::size_t>& chosen,
                       double alpha) {
  if (!probs.defined() || probs.rank() != 2 || probs.dim(0) == 0) {
    throw ContractError("balance loss needs a non-empty [N, m] probability batch");
  }
  const std::size_t n = probs.dim(0), m = probs.dim(1);
  if (chosen.size() != n) throw ShapeError("balance loss: chosen count does not match batch");
  std::vector<T> ef(m, T(0));
  for (auto c : chosen) {
    if (c >= m) throw ContractError("routing chose a nonexistent expert");
    ef[c] += T(1);
  }
  for (auto& v : ef) v /= static_cast<T>(n);
  auto ep = ops::mean_axis(probs, 0);
  return ops::scale(ops::dot_const(ep, ef), static_cast<T>(alpha * static_cast<double>(m)));
}

/// Cross entropy plus the balance term when given.
template <typename T>
Tensor<T> total_loss(const Tensor<T>& logits, const std::vector<std::int64_t>& labels,
                     const Tensor<T>& balance) {
  auto ce = ops::cross_entropy(logits, labels);
  return balance.defined() ? ops::add(ce, balance) : ce;
}

template <typename T>
class ExpertLayer {
 public:
  ExpertLayer() = default;
  ExpertLayer(std::size_t in, std::size_t hidden, std::size_t classes, Rng& rng)
      : linear1(in, hidden, rng), bn(hidden), linear2(hidden, classes, rng) {}

  /// A single-row batch in train mode normalises with the running statistics
  /// and leaves them untouched.
  Tensor<T> operator()(const Tensor<T>& x, bool train) {
    auto h = linear1(x);
    const bool batch_mode = train && x.dim(0) > 1;
    h = bn(h, batch_mode, batch_mode);
    return linear2(ops::relu(h));
  }

  void collect(const std::string& prefix, nn::Registry<T>& reg) {
    linear1.collect(nn::join(prefix, "linear1"), reg);
    bn.collect(nn::join(prefix, "bn"), reg);
    linear2.collect(nn::join(prefix, "linear2"), reg);
  }

  nn::Linear<T> linear1;
  nn::BatchNorm<T> bn;
  nn::Linear<T> linear2;
};

template <typename T>
struct HeadOutput {
  Tensor<T> logits;
  Tensor<T> logits_exp;
  RoutingDecision<T> decision;
  BalanceStats stats;
  Tensor<T> balance;  // undefined when balancing is off
};

template <typename T>
class MoEHead {
 public:
  MoEHead(const HeadConfig& config, Rng& rng) : config_(config) {
    config.validate();
    router = nn::Linear<T>(config.in_dim, config.num_experts, rng);
    for (std::size_t j = 0; j < config.num_experts; ++j) {
      experts.emplace_back(config.in_dim, config.hidden, config.num_classes, rng);
    }
    if (config.residual) {
      residual_expert = ExpertLayer<T>(config.in_dim, config.hidden, config.num_classes, rng);
    }
  }

  /// Runs only the experts that receive samples; rows keep input order.
  Tensor<T> dispatch(const Tensor<T>& r, const std::vector<std::size_t>& chosen, bool train) {
    const std::size_t n = r.dim(0);
    if (chosen.size() != n) throw ShapeError("dispatch: chosen count does not match batch");
    for (auto c : chosen) {
      if (c >= experts.size()) throw ContractError("routing chose a nonexistent expert");
    }
    Tensor<T> logits;
    for (std::size_t j = 0; j < experts.size(); ++j) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i] == j) idx.push_back(i);
      }
      if (idx.empty()) continue;
      auto part = ops::scatter_rows(experts[j](ops::take_rows(r, idx), train), idx, n);
      logits = logits.defined() ? ops::add(logits, part) : part;
    }
    return logits;
  }

  HeadOutput<T> operator()(const Tensor<T>& r, bool train) {
    if (!r.defined() || r.rank() != 2 || r.dim(1) != config_.in_dim || r.dim(0) == 0) {
      throw ShapeError("head expects a non-empty [N," + std::to_string(config_.in_dim) + "] batch");
    }
    HeadOutput<T> out;
    out.decision = route(router(r), config_.norm);
    out.stats = balance_stats(out.decision, config_.alpha);
    out.logits_exp = dispatch(r, out.decision.chosen, train);
    out.logits = config_.residual ? ops::add(out.logits_exp, residual_expert(r, train))
                                  : out.logits_exp;
    if (config_.balance) {
      out.balance = balance_loss(out.decision.probs, out.decision.chosen, config_.alpha);
    }
    return out;
  }

  void collect(const std::string& prefix, nn::Registry<T>& reg) {
    router.collect(nn::join(prefix, "router"), reg);
    for (std::size_t j = 0; j < experts.size(); ++j) {
      experts[j].collect(nn::join(prefix, "expert" + std::to_string(j)), reg);
    }
    if (config_.residual) residual_expert.collect(nn::join(prefix, "residual"), reg);
  }

  const HeadConfig& config() const { return config_; }

  nn::Linear<T> router;
  std::vector<ExpertLayer<T>> experts;
  ExpertLayer<T> residual_expert;

 private:
  HeadConfig config_;
};

struct ModelConfig {
  BackboneConfig backbone;
  HeadConfig head;
};

/// Backbone followed by the expert head.
template <typename T>
class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed)
      : rng_(seed), backbone(config.backbone, rng_), head(config.head, rng_), config_(config) {}

  HeadOutput<T> operator()(const Tensor<T>& x, bool train) { return head(backbone(x, train), train); }

  nn::Registry<T> registry() {
    nn::Registry<T> reg;
    backbone.collect("backbone", reg);
    head.collect("head", reg);
    return reg;
  }

  const ModelConfig& config() const { return config_; }

 private:
  Rng rng_;

 public:
  Backbone<T> backbone;
  MoEHead<T> head;

 private:
  ModelConfig config_;
};

}  // namespace cmoe
