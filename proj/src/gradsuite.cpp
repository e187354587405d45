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

#include "cmoe/gradsuite.hpp"

#include <algorithm>
#include <functional>
#include <map>

#include "cmoe/backbone.hpp"
#include "cmoe/moe.hpp"

namespace cmoe {

namespace {

using T = double;

Tensor<T> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor<T>(std::move(shape), std::move(v), true);
}

/// Moves values off the ReLU kink so that +-h never crosses it.
void push_off_zero(Tensor<T>& t, double margin) {
  for (auto& v : t.values()) {
    if (std::abs(v) < margin) v = v < 0 ? -margin : margin;
  }
}

void jitter_params(nn::Registry<T>& reg, Rng& rng, double amount) {
  for (auto& p : reg.params) {
    for (auto& v : p.tensor.values()) v += rng.uniform(-amount, amount);
  }
}

std::vector<GradCheckInput<T>> inputs_of(nn::Registry<T>& reg) {
  std::vector<GradCheckInput<T>> in;
  for (auto& p : reg.params) in.push_back({p.name, p.tensor});
  return in;
}

GradCheckOptions check_options(const GradSuiteOptions& opt, std::uint64_t seed,
                               std::size_t max_coords = 0) {
  GradCheckOptions o;
  o.h = opt.h;
  o.seed = derive_seed(seed, 0x6763);
  o.max_coords_per_input = max_coords;
  return o;
}

/// Scalar loss sum(y * w) with a fixed random projection w.
struct Projector {
  std::vector<T> w;
  Tensor<T> operator()(const Tensor<T>& y, Rng& rng) {
    if (w.size() != y.numel()) w = random_projection<T>(y.numel(), rng);
    return ops::dot_const(ops::flatten(y), w);
  }
};

using CaseFn = std::function<GradCheckReport(std::uint64_t, const GradSuiteOptions&)>;

const std::vector<std::pair<std::string, CaseFn>>& cases() {
  static const std::vector<std::pair<std::string, CaseFn>> table = {
      {"conv2d",
       [](std::uint64_t seed, const GradSuiteOptions& opt) {
         Rng rng(seed);
         auto x = random_tensor({2, 3, 7, 6}, rng);
         auto w = random_tensor({4, 3, 3, 3}, rng);
         auto b = random_tensor({4}, rng);
         Projector proj;
         auto loss = [&] { return proj(ops::conv2d(x, w, b, 2, 1), rng); };
         return gradient_check<T>(loss, {{"x", x}, {"weight", w}, {"bias", b}},
                                  check_options(opt, seed));
       }},
      {"batch_norm",
       [](std::uint64_t seed, const GradSuiteOptions& opt) {
         Rng rng(seed);
         auto x = random_tensor({4, 3, 3, 2}, rng, -2.0, 2.0);
         auto g = random_tensor({3}, rng, 0.5, 1.5);
         auto b = random_tensor({3}, rng);
         auto x2 = random_tensor({5, 4}, rng, -2.0, 2.0);
         auto g2 = random_tensor({4}, rng, 0.5, 1.5);
         auto b2 = random_tensor({4}, rng);
         ops::RunningStats<T> s(3), s2(4);
         Projector p1, p2;
         auto loss = [&] {
           ops::BatchNormOptions o;
           return ops::add(p1(ops::batch_norm(x, g, b, s, o), rng),
                           p2(ops::batch_norm(x2, g2, b2, s2, o), rng));
         };
         return gradient_check<T>(
             loss, {{"x", x}, {"gamma", g}, {"beta", b}, {"x2", x2}, {"gamma2", g2}, {"beta2", b2}},
             check_options(opt, seed));
       }},
      {"linear",
       [](std::uint64_t seed, const GradSuiteOptions& opt) {
         Rng rng(seed);
         auto x = random_tensor({3, 5}, rng);
         auto w = random_tensor({4, 5}, rng);
         auto b = random_tensor({4}, rng);
         Projector proj;
         auto loss = [&] { return proj(ops::linear(x, w, b), rng); };
         return gradient_check<T>(loss, {{"x", x}, {"weight", w}, {"bias", b}},
                                  check_options(opt, seed));
       }},
      {"relu",
       [](std::uint64_t seed, const GradSuiteOptions& opt) {
         Rng rng(seed);
         auto x = random_tensor({3, 7}, rng);
         push_off_zero(x, 1e-2);
         Projector proj;
         auto loss = [&] { return proj(ops::relu(x), rng); };
         return gradient_check<T>(loss, {{"x", x}}, check_options(opt, seed));
       }},
      {"max_pool",
       [](std::uint64_t seed, const GradSuiteOptions& opt) {
         Rng rng(seed);
         auto x = random_tensor({2, 2, 7, 7}, rng);
         Projector proj;
         auto loss = [&] { return proj(ops::max_pool2d(x, 3, 2, 1), rng); };
         return gradient_check<T>(loss, {{"x", x}}, check_options(opt, seed));
       }},
      {"softmax",
       [](std::uint64_t seed, const GradSuiteOptions& opt) {
         Rng rng(seed);
         auto x = random_tensor({3, 5}, rng, -3.0, 3.0);
         Projector proj;
         auto loss = [&] { return proj(ops::softmax(x), rng); };
         return gradient_check<T>(loss, {{"x", x}}, check_options(opt, seed));
       }},
      {"sigmoid",
       [](std::uint64_t seed, const GradSuiteOptions& opt) {
         Rng rng(seed);
         auto x = random_tensor({3, 5}, rng, -4.0, 4.0);
         Projector proj;
         auto loss = [&] { return proj(ops::sigmoid(x), rng); };
         return gradient_check<T>(loss, {{"x", x}}, check_options(opt, seed));
       }},
      {"attention_pool",
       [](std::uint64_t seed, const GradSuiteOptions& opt) {
         Rng rng(seed);
         nn::AttentionPool2d<T> pool(8, 2, rng);
         nn::Registry<T> reg;
         pool.collect("pool", reg);
         jitter_params(reg, rng, 0.1);
         auto x = random_tensor({2, 8, 3, 2}, rng);
         Projector proj;
         auto loss = [&] { return proj(pool(x), rng); };
         auto in = inputs_of(reg);
         in.push_back({"x", x});
         return gradient_check<T>(loss, in, check_options(opt, seed));
       }},
      {"cross_entropy",
       [](std::uint64_t seed, const GradSuiteOptions& opt) {
         Rng rng(seed);
         auto logits = random_tensor({4, 5}, rng, -3.0, 3.0);
         std::vector<std::int64_t> labels(4);
         for (auto& l : labels) l = static_cast<std::int64_t>(rng.below(5));
         auto loss = [&] { return ops::cross_entropy(logits, labels); };
         return gradient_check<T>(loss, {{"logits", logits}}, check_options(opt, seed));
       }},
      {"basic_block",
       [](std::uint64_t seed, const GradSuiteOptions& opt) {
         Rng rng(seed);
         BasicBlock<T> same(3, 3, 1, rng), down(3, 4, 2, rng);
         nn::Registry<T> reg;
         same.collect("same", reg);
         down.collect("down", reg);
         jitter_params(reg, rng, 0.1);
         auto x = random_tensor({3, 3, 6, 6}, rng);
         Projector proj;
         auto loss = [&] { return proj(down(same(x, true), true), rng); };
         auto in = inputs_of(reg);
         in.push_back({"x", x});
         return gradient_check<T>(loss, in, check_options(opt, seed));
       }},
      {"moe_head",
       [](std::uint64_t seed, const GradSuiteOptions& opt) {
         Rng rng(seed);
         HeadConfig cfg;
         cfg.num_experts = 3;
         cfg.num_classes = 4;
         cfg.in_dim = 6;
         cfg.hidden = 5;
         cfg.residual = true;
         cfg.balance = true;
         cfg.alpha = 0.5;  // large enough that the router gradient is visible
         MoEHead<T> head(cfg, rng);
         nn::Registry<T> reg;
         head.collect("head", reg);
         jitter_params(reg, rng, 0.1);
         auto r = random_tensor({9, 6}, rng);
         std::vector<std::int64_t> labels(9);
         for (auto& l : labels) l = static_cast<std::int64_t>(rng.below(4));
         auto loss = [&] {
           auto out = head(r, true);
           return total_loss(out.logits, labels, out.balance);
         };
         auto in = inputs_of(reg);
         in.push_back({"r", r});
         return gradient_check<T>(loss, in, check_options(opt, seed));
       }},
      {"model",
       [](std::uint64_t seed, const GradSuiteOptions& opt) {
         ModelConfig cfg;
         cfg.backbone.min_input = std::min<std::size_t>(cfg.backbone.min_input, opt.model_input);
         cfg.head.num_experts = 2;
         cfg.head.num_classes = 3;
         cfg.head.alpha = 0.5;
         Model<T> model(cfg, seed);
         Rng rng(derive_seed(seed, 0x6d6f));
         auto reg = model.registry();
         const std::size_t n = opt.model_batch, side = opt.model_input;
         auto x = random_tensor({n, 1, side, side}, rng);
         std::vector<std::int64_t> labels(n);
         for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<std::int64_t>(i % 3);
         auto loss = [&] {
           auto out = model(x, true);
           return total_loss(out.logits, labels, out.balance);
         };
         auto in = inputs_of(reg);
         in.push_back({"x", x});
         auto o = check_options(opt, seed, opt.model_coords_per_param);
         o.h = opt.model_h;
         o.fourth_order = true;
         o.refine = 2;
         o.refine_threshold = opt.tolerance;
         return gradient_check<T>(loss, in, o);
       }},
  };
  return table;
}

}  // namespace

std::vector<std::string> gradient_suite_cases(bool include_model) {
  std::vector<std::string> names;
  for (const auto& [name, fn] : cases()) {
    if (name == "model" && !include_model) continue;
    names.push_back(name);
  }
  return names;
}

GradCheckReport run_gradient_case(const std::string& op, std::uint64_t seed,
                                  const GradSuiteOptions& opt) {
  for (const auto& [name, fn] : cases()) {
    if (name == op) return fn(seed, opt);
  }
  throw ConfigError("unknown gradient check case '" + op + "'");
}

std::vector<GradSuiteResult> run_gradient_suite(const GradSuiteOptions& opt) {
  std::vector<GradSuiteResult> out;
  for (const auto& name : gradient_suite_cases(opt.include_model)) {
    for (auto seed : opt.seeds) {
      GradSuiteResult r;
      r.op = name;
      r.seed = seed;
      r.report = run_gradient_case(name, seed, opt);
      r.pass = r.report.max_rel_err < opt.tolerance;
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace cmoe
