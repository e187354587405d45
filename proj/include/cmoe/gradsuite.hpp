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

// Finite-difference checks over every differentiable operator and the
// composite layers built from them, at 64-bit.

#include <cstdint>
#include <string>
#include <vector>

#include "cmoe/gradcheck.hpp"

namespace cmoe {

struct GradSuiteResult {
  std::string op;
  std::uint64_t seed = 0;
  GradCheckReport report;
  bool pass = false;
};

struct GradSuiteOptions {
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  double tolerance = 1e-5;
  double h = 1e-6;
  /// Include the full backbone + head (sampled coordinates).
  bool include_model = true;
  std::size_t model_batch = 4;
  std::size_t model_input = 32;
  std::size_t model_coords_per_param = 1;
  /// The deep model is strongly curved; it uses the fourth-order stencil.
  double model_h = 1e-6;
};

/// Names of the checked cases, in execution order.
std::vector<std::string> gradient_suite_cases(bool include_model);

/// Runs one case for one seed.
GradCheckReport run_gradient_case(const std::string& op, std::uint64_t seed,
                                  const GradSuiteOptions& opt = {});

std::vector<GradSuiteResult> run_gradient_suite(const GradSuiteOptions& opt = {});

}  // namespace cmoe
