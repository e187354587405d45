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
#include <set>

#include "cmoe/backbone.hpp"
#include "cmoe/gradcheck.hpp"
#include "cmoe/gradsuite.hpp"
#include "cmoe/moe.hpp"
#include "test_util.hpp"

namespace cmoe {
namespace {

using T64 = Tensor<double>;

TEST(Backbone, TrunkParameterCount) {
  Rng rng(1);
  Backbone<float> net({}, rng);
  EXPECT_EQ(net.trunk_parameter_count(), 11170240u);
  nn::Registry<float> reg;
  net.collect("backbone", reg);
  const std::size_t pool = 4 * (512 * 512 + 512);
  EXPECT_EQ(reg.param_count(), 11170240u + pool);
}

TEST(Backbone, NamesAreUnique) {
  Rng rng(1);
  Model<float> model({}, 3);
  auto reg = model.registry();
  std::set<std::string> names;
  for (const auto& p : reg.params) EXPECT_TRUE(names.insert(p.name).second) << p.name;
  for (const auto& b : reg.buffers) EXPECT_TRUE(names.insert(b.name).second) << b.name;
}

TEST(Backbone, RepresentationShape) {
  Rng rng(2);
  Backbone<float> net({}, rng);
  NoGradGuard guard;
  for (auto [t, f] : {std::pair<std::size_t, std::size_t>{32, 32}, {64, 40}, {45, 99}}) {
    const auto x = test::filled<float>({3, 1, t, f}, 0.01, 0.0, 1.0, false);
    EXPECT_EQ(net(x, false).shape(), (Shape{3, 512}));
    EXPECT_EQ(net(x, true).shape(), (Shape{3, 512}));
  }
}

TEST(Backbone, InputContract) {
  Rng rng(3);
  Backbone<float> net({}, rng);
  NoGradGuard guard;
  EXPECT_THROW(net(Tensor<float>::zeros({2, 32, 32}), false), ShapeError);
  EXPECT_THROW(net(Tensor<float>::zeros({2, 2, 32, 32}), false), ShapeError);
  EXPECT_THROW(net(Tensor<float>::zeros({2, 1, 31, 64}), false), ShapeError);
}

TEST(Backbone, DuplicateRowsAndZeroInput) {
  Rng rng(4);
  Backbone<float> net({}, rng);
  NoGradGuard guard;
  auto x = test::filled<float>({2, 1, 40, 36}, 0.37, 0.0, 1.0, false);
  std::copy_n(x.values().begin(), 40 * 36, x.values().begin() + 40 * 36);
  const auto r = net(x, false);
  for (std::size_t c = 0; c < 512; ++c) ASSERT_EQ(r.values()[c], r.values()[512 + c]);

  const auto z = net(Tensor<float>::zeros({2, 1, 40, 36}), false);
  for (float v : z.values()) ASSERT_TRUE(std::isfinite(v));
  EXPECT_EQ(net(Tensor<float>::zeros({2, 1, 40, 36}), false).values(), z.values());
}

TEST(BasicBlock, ZeroResidualBranchIsRelu) {
  Rng rng(5);
  BasicBlock<double> block(2, 2, 1, rng);
  std::fill(block.conv2.weight.values().begin(), block.conv2.weight.values().end(), 0.0);
  const auto x = test::filled<double>({2, 2, 5, 5}, 0.7, 0.2, 1.0, false);
  for (bool train : {false, true}) {
    const auto y = block(x, train);
    for (std::size_t i = 0; i < x.numel(); ++i) ASSERT_DOUBLE_EQ(y.values()[i], std::max(0.0, x.values()[i]));
  }
}

TEST(BasicBlock, StrideTwoHalvesAndWidens) {
  Rng rng(6);
  BasicBlock<float> block(64, 128, 2, rng);
  EXPECT_TRUE(block.has_projection);
  NoGradGuard guard;
  EXPECT_EQ(block(Tensor<float>::zeros({1, 64, 16, 10}), false).shape(), (Shape{1, 128, 8, 5}));
  EXPECT_THROW(block(Tensor<float>::zeros({1, 32, 16, 10}), false), ShapeError);
}

TEST(BasicBlock, GradCheckTiny) {
  Rng rng(7);
  BasicBlock<double> block(2, 2, 1, rng);
  auto x = test::filled<double>({1, 2, 6, 6}, 0.61, 0.3);
  const auto proj = test::fill(72, 0.05, 0.7);
  std::vector<GradCheckInput<double>> inputs{{"x", x}, {"conv1", block.conv1.weight}, {"conv2", block.conv2.weight}};
  const auto r = gradient_check<double>(
      [&] { return ops::dot_const(block(x, false), proj); }, inputs, {.h = 1e-6});
  EXPECT_LT(r.max_rel_err, 1e-5) << r.worst;
}

TEST(Head, GradCheckWithFrozenRouting) {
  Rng rng(8);
  HeadConfig cfg;
  cfg.num_experts = 3;
  cfg.num_classes = 4;
  cfg.in_dim = 6;
  cfg.hidden = 5;
  cfg.residual = true;
  cfg.alpha = 0.5;
  MoEHead<double> head(cfg, rng);
  std::vector<double> v(9 * 6);
  for (auto& e : v) e = rng.uniform(-1.0, 1.0);
  auto r = T64({9, 6}, v, true);
  const std::vector<std::int64_t> labels{0, 1, 2, 3, 0, 1, 2, 3, 0};
  auto loss = [&] {
    auto out = head(r, false);
    return total_loss(out.logits, labels, out.balance);
  };
  nn::Registry<double> reg;
  head.collect("head", reg);
  std::vector<GradCheckInput<double>> inputs{{"r", r}};
  for (const auto& p : reg.params) inputs.push_back({p.name, p.tensor});
  const auto r1 = gradient_check<double>(loss, inputs, {.h = 1e-6});
  EXPECT_LT(r1.max_rel_err, 1e-4) << r1.worst;
}

TEST(GradSuite, OperatorCasesAllSeeds) {
  GradSuiteOptions opt;
  opt.include_model = false;
  const auto results = run_gradient_suite(opt);
  EXPECT_EQ(results.size(), gradient_suite_cases(false).size() * opt.seeds.size());
  for (const auto& r : results) {
    EXPECT_TRUE(r.pass) << r.op << " seed " << r.seed << " err " << r.report.max_rel_err << " at " << r.report.worst;
    EXPECT_GT(r.report.coords, 0u) << r.op;
  }
}

TEST(GradSuite, CaseList) {
  const auto ops = gradient_suite_cases(true);
  for (const char* name : {"conv2d", "batch_norm", "linear", "relu", "max_pool", "softmax", "sigmoid",
                           "attention_pool", "cross_entropy", "basic_block", "moe_head", "model"}) {
    EXPECT_NE(std::find(ops.begin(), ops.end(), name), ops.end()) << name;
  }
  EXPECT_ANY_THROW(run_gradient_case("nonexistent", 1));
}

}  // namespace
}  // namespace cmoe
