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

// Differentiable operators over Tensor<T>. Every op validates shapes, computes
// its forward value eagerly and, when recording, attaches a backward closure.

#include <cstdint>
#include <vector>

#include "cmoe/tensor.hpp"

namespace cmoe::ops {

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

/// Softmax over the last dimension, with max subtraction.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x);

/// x [N, C_in, H, W], weight [C_out, C_in, kH, kW], optional bias [C_out].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t stride, std::size_t pad);

template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& x, std::size_t kernel, std::size_t stride, std::size_t pad);

template <typename T>
struct RunningStats {
  std::vector<T> mean;
  std::vector<T> var;

  RunningStats() = default;
  explicit RunningStats(std::size_t c) : mean(c, T(0)), var(c, T(1)) {}
};

struct BatchNormOptions {
  bool train = true;
  double momentum = 0.1;
  double eps = 1e-5;
  /// Train-mode only: whether to fold the batch statistics into the running stats.
  bool update_stats = true;
};

/// Per-channel normalisation of [N, C] or [N, C, H, W]. Train mode uses the
/// batch statistics and needs more than one value per channel.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     RunningStats<T>& stats, const BatchNormOptions& opt);

/// y = x W^T + b over the last dimension of x; weight [out, in], bias optional [out].
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

/// Batched matmul a [B, M, K] x b [B, K, N] (or b [B, N, K] with trans_b).
template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b, bool trans_b = false);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

/// [N, ...] -> [N, prod(...)].
template <typename T>
Tensor<T> flatten(const Tensor<T>& x);

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& order);

template <typename T>
Tensor<T> sum(const Tensor<T>& x);

template <typename T>
Tensor<T> mean(const Tensor<T>& x);

/// Mean over one axis, which is removed from the shape.
template <typename T>
Tensor<T> mean_axis(const Tensor<T>& x, std::size_t axis);

/// Mean over the batch of -log softmax(logits)[label]; logits [N, C].
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<std::int64_t>& labels);

/// Rows idx of x [N, ...] stacked into [k, ...].
template <typename T>
Tensor<T> take_rows(const Tensor<T>& x, const std::vector<std::size_t>& idx);

/// Inverse of take_rows: a [n_rows, ...] tensor, zero except rows idx.
template <typename T>
Tensor<T> scatter_rows(const Tensor<T>& rows, const std::vector<std::size_t>& idx,
                       std::size_t n_rows);

/// Scalar sum_i x_i * c_i with c constant.
template <typename T>
Tensor<T> dot_const(const Tensor<T>& x, const std::vector<T>& c);

}  // namespace cmoe::ops
