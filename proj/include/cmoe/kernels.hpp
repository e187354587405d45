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

// Compute kernels behind the differentiable ops. The top-level namespace holds
// the OpenMP-parallel versions used by training; `reference` holds direct
// serial loops kept as the oracle for tests and as the benchmark baseline.
//
// All backward kernels accumulate (+=) into their outputs. Parallel loops
// partition outputs, never reductions, so results do not depend on the
// thread count.

#include <cstddef>
#include <cstdint>

namespace cmoe::kernels {

struct ConvGeometry {
  std::size_t n = 1, c_in = 1, h = 1, w = 1;
  std::size_t c_out = 1, kh = 1, kw = 1;
  std::size_t stride = 1, pad = 0;

  std::size_t h_out() const { return (h + 2 * pad - kh) / stride + 1; }
  std::size_t w_out() const { return (w + 2 * pad - kw) / stride + 1; }
  std::size_t patch() const { return c_in * kh * kw; }
};

struct PoolGeometry {
  std::size_t n = 1, c = 1, h = 1, w = 1;
  std::size_t k = 1, stride = 1, pad = 0;

  std::size_t h_out() const { return (h + 2 * pad - k) / stride + 1; }
  std::size_t w_out() const { return (w + 2 * pad - k) / stride + 1; }
};

/// c[m x n] (+)= op(a) * op(b); op(a) is m x k, op(b) is k x n, row-major.
template <typename T>
void matmul(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
            bool trans_a, bool trans_b, bool accumulate);

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* weight, const T* bias, T* y);

/// Any of dx / dweight / dbias may be null.
template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* x, const T* weight, const T* dy, T* dx,
                     T* dweight, T* dbias);

/// argmax stores the winning flat index within the input plane; ties go to the
/// first position in raster order.
template <typename T>
void max_pool2d_forward(const PoolGeometry& g, const T* x, T* y, std::int32_t* argmax);

template <typename T>
void max_pool2d_backward(const PoolGeometry& g, const T* dy, const std::int32_t* argmax, T* dx);

/// Batch statistics per channel over (n, hw). Writes the normalised output,
/// the batch mean, 1/sqrt(var + eps) and the unbiased variance.
template <typename T>
void batch_norm_forward_train(std::size_t n, std::size_t c, std::size_t hw, const T* x,
                              const T* gamma, const T* beta, T eps, T* y, T* mean, T* invstd,
                              T* var_unbiased);

template <typename T>
void batch_norm_backward_train(std::size_t n, std::size_t c, std::size_t hw, const T* x,
                               const T* gamma, const T* mean, const T* invstd, const T* dy, T* dx,
                               T* dgamma, T* dbeta);

namespace reference {

template <typename T>
void matmul(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
            bool trans_a, bool trans_b, bool accumulate);

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* weight, const T* bias, T* y);

template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* x, const T* weight, const T* dy, T* dx,
                     T* dweight, T* dbias);

template <typename T>
void max_pool2d_forward(const PoolGeometry& g, const T* x, T* y, std::int32_t* argmax);

template <typename T>
void max_pool2d_backward(const PoolGeometry& g, const T* dy, const std::int32_t* argmax, T* dx);

template <typename T>
void batch_norm_forward_train(std::size_t n, std::size_t c, std::size_t hw, const T* x,
                              const T* gamma, const T* beta, T eps, T* y, T* mean, T* invstd,
                              T* var_unbiased);

template <typename T>
void batch_norm_backward_train(std::size_t n, std::size_t c, std::size_t hw, const T* x,
                               const T* gamma, const T* mean, const T* invstd, const T* dy, T* dx,
                               T* dgamma, T* dbeta);

}  // namespace reference
}  // namespace cmoe::kernels
