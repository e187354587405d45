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

// Central finite differences against backward(). Intended for 64-bit tensors
// and small shapes.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "cmoe/ops.hpp"
#include "cmoe/rng.hpp"

namespace cmoe {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst;  // "<input>[<index>]"
  std::size_t coords = 0;
  std::size_t refined = 0;  // coordinates re-measured with a smaller step
};

/// |a - n| / max(1, |a|, |n|).
inline double grad_rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

template <typename T>
struct GradCheckInput {
  std::string name;
  Tensor<T> tensor;
};

struct GradCheckOptions {
  double h = 1e-5;
  /// When nonzero, at most this many coordinates per input, drawn with `seed`.
  std::size_t max_coords_per_input = 0;
  std::uint64_t seed = 0;
  /// Fourth-order stencil (f(-2h), f(-h), f(h), f(2h)) instead of the central pair.
  bool fourth_order = false;
  /// Coordinates whose error exceeds refine_threshold are re-measured with the
  /// step divided by 10, up to `refine` times; the smallest error is kept.
  /// A step that straddles a ReLU or max-pool switch gives a biased difference.
  std::size_t refine = 0;
  double refine_threshold = 1e-5;
};

/// `loss` must rebuild the graph from the inputs' current values and return a
/// scalar. Each input must have requires_grad set.
template <typename T>
GradCheckReport gradient_check(const std::function<Tensor<T>()>& loss,
                               std::vector<GradCheckInput<T>> inputs,
                               const GradCheckOptions& opt = {}) {
  for (auto& in : inputs) in.tensor.zero_grad();
  backward(loss());

  GradCheckReport report;
  Rng rng(opt.seed);
  for (auto& in : inputs) {
    const std::size_t n = in.tensor.numel();
    std::vector<T> analytic(n, T(0));
    if (in.tensor.has_grad()) std::copy_n(in.tensor.grad().begin(), n, analytic.begin());

    std::vector<std::size_t> coords(n);
    for (std::size_t i = 0; i < n; ++i) coords[i] = i;
    if (opt.max_coords_per_input && n > opt.max_coords_per_input) {
      rng.shuffle(coords);
      coords.resize(opt.max_coords_per_input);
      std::sort(coords.begin(), coords.end());
    }

    NoGradGuard guard;
    auto values = in.tensor.data();
    for (auto i : coords) {
      const T orig = values[i];
      auto at = [&](double d) {
        values[i] = static_cast<T>(orig + d);
        const double v = static_cast<double>(loss().item());
        values[i] = orig;
        return v;
      };
      auto numeric = [&](double h) {
        return opt.fourth_order
                   ? (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h)
                   : (at(h) - at(-h)) / (2.0 * h);
      };
      const double a = static_cast<double>(analytic[i]);
      double h = opt.h;
      double err = grad_rel_err(a, numeric(h));
      for (std::size_t r = 0; r < opt.refine && err > opt.refine_threshold; ++r) {
        h /= 10.0;
        err = std::min(err, grad_rel_err(a, numeric(h)));
        if (r == 0) ++report.refined;
      }
      ++report.coords;
      if (report.worst.empty() || err > report.max_rel_err) {
        report.max_rel_err = err;
        report.worst = in.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  for (auto& in : inputs) in.tensor.zero_grad();
  return report;
}

/// Random fixed projection used to turn a tensor-valued op into a scalar loss.
template <typename T>
std::vector<T> random_projection(std::size_t n, Rng& rng) {
  std::vector<T> w(n);
  for (auto& v : w) v = static_cast<T>(rng.uniform(-1.0, 1.0));
  return w;
}

}  // namespace cmoe
