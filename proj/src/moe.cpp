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

#include "cmoe/moe.hpp"

namespace cmoe {

NormFunc parse_norm_func(const std::string& s) {
  if (s == "softmax") return NormFunc::softmax;
  if (s == "sigmoid") return NormFunc::sigmoid;
  throw ConfigError("unknown norm_func '" + s + "' (expected softmax or sigmoid)");
}

std::string to_string(NormFunc f) { return f == NormFunc::softmax ? "softmax" : "sigmoid"; }

void HeadConfig::validate() const {
  if (num_experts < 1) throw ConfigError("num_experts must be at least 1");
  if (num_classes < 1) throw ConfigError("num_classes must be at least 1");
  if (in_dim == 0 || hidden == 0) throw ConfigError("head dimensions must be positive");
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be non-negative");
}

}  // namespace cmoe
