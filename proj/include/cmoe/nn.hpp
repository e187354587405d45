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

// Layers holding parameters, plus the registry used to enumerate them by name
// for the optimizer, checkpoints and gradient checks.

#include <cmath>
#include <string>
#include <vector>

#include "cmoe/ops.hpp"
#include "cmoe/rng.hpp"
#include "cmoe/tensor.hpp"

namespace cmoe::nn {

template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T> tensor;  // shares the layer's node
};

template <typename T>
struct NamedBuffer {
  std::string name;
  std::vector<T>* data;
};

template <typename T>
struct Registry {
  std::vector<NamedParam<T>> params;
  std::vector<NamedBuffer<T>> buffers;

  void param(const std::string& name, const Tensor<T>& t) {
    if (t.defined()) params.push_back({name, t});
  }
  void buffer(const std::string& name, std::vector<T>& v) { buffers.push_back({name, &v}); }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& p : params) n += p.tensor.numel();
    return n;
  }
};

inline std::string join(const std::string& prefix, const std::string& name) {
  return prefix.empty() ? name : prefix + "." + name;
}

/// Kaiming-uniform: U(-b, b) with b = sqrt(6 / fan_in).
template <typename T>
Tensor<T> kaiming_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(rng.uniform(-bound, bound));
  return Tensor<T>(std::move(shape), std::move(v), true);
}

template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng, bool bias = true)
      : weight(kaiming_uniform<T>({out, in}, in, rng)) {
    if (bias) this->bias = Tensor<T>::zeros({out}, true);
  }

  Tensor<T> operator()(const Tensor<T>& x) const { return ops::linear(x, weight, bias); }

  void collect(const std::string& prefix, Registry<T>& reg) {
    reg.param(join(prefix, "weight"), weight);
    reg.param(join(prefix, "bias"), bias);
  }

  Tensor<T> weight;
  Tensor<T> bias;
};

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride, std::size_t pad,
         Rng& rng, bool bias = false)
      : weight(kaiming_uniform<T>({out, in, kernel, kernel}, in * kernel * kernel, rng)),
        stride(stride),
        pad(pad) {
    if (bias) this->bias = Tensor<T>::zeros({out}, true);
  }

  Tensor<T> operator()(const Tensor<T>& x) const {
    return ops::conv2d(x, weight, bias, stride, pad);
  }

  void collect(const std::string& prefix, Registry<T>& reg) {
    reg.param(join(prefix, "weight"), weight);
    reg.param(join(prefix, "bias"), bias);
  }

  Tensor<T> weight;
  Tensor<T> bias;
  std::size_t stride = 1;
  std::size_t pad = 0;
};

/// Batch norm over channels of [N, C] or [N, C, H, W].
template <typename T>
class BatchNorm {
 public:
  BatchNorm() = default;
  explicit BatchNorm(std::size_t c)
      : gamma(Tensor<T>::full({c}, T(1), true)), beta(Tensor<T>::zeros({c}, true)), stats(c) {}

  Tensor<T> operator()(const Tensor<T>& x, bool train, bool update_stats = true) {
    ops::BatchNormOptions opt;
    opt.train = train;
    opt.momentum = momentum;
    opt.eps = eps;
    opt.update_stats = update_stats;
    return ops::batch_norm(x, gamma, beta, stats, opt);
  }

  void collect(const std::string& prefix, Registry<T>& reg) {
    reg.param(join(prefix, "weight"), gamma);
    reg.param(join(prefix, "bias"), beta);
    reg.buffer(join(prefix, "running_mean"), stats.mean);
    reg.buffer(join(prefix, "running_var"), stats.var);
  }

  Tensor<T> gamma;
  Tensor<T> beta;
  ops::RunningStats<T> stats;
  double momentum = 0.1;
  double eps = 1e-5;
};

/// Multi-head self-attention over the spatial positions of a feature map,
/// followed by the mean over positions: [N, C, H, W] -> [N, C].
template <typename T>
class AttentionPool2d {
 public:
  AttentionPool2d() = default;
  AttentionPool2d(std::size_t channels, std::size_t heads, Rng& rng)
      : query(channels, channels, rng),
        key(channels, channels, rng),
        value(channels, channels, rng),
        out(channels, channels, rng),
        channels_(channels),
        heads_(heads) {
    if (heads == 0 || channels % heads != 0) {
      throw ShapeError("attention pool: heads must divide the channel count");
    }
  }

  Tensor<T> operator()(const Tensor<T>& x) const {
    if (!x.defined() || x.rank() != 4 || x.dim(1) != channels_) {
      throw ShapeError("attention pool: expected [N," + std::to_string(channels_) + ",H,W], got " +
                       (x.defined() ? shape_str(x.shape()) : std::string("undefined")));
    }
    const std::size_t n = x.dim(0), tokens = x.dim(2) * x.dim(3);
    if (tokens == 0) throw ShapeError("attention pool: empty spatial extent");
    const std::size_t hd = channels_ / heads_;

    auto seq = ops::permute(ops::reshape(x, {n, channels_, tokens}), {0, 2, 1});  // [N, L, C]
    auto split = [&](const Tensor<T>& t) {
      auto h = ops::permute(ops::reshape(t, {n, tokens, heads_, hd}), {0, 2, 1, 3});
      return ops::reshape(h, {n * heads_, tokens, hd});
    };
    auto q = split(query(seq));
    auto k = split(key(seq));
    auto v = split(value(seq));
    auto scores = ops::scale(ops::bmm(q, k, true), static_cast<T>(1.0 / std::sqrt(double(hd))));
    auto attended = ops::bmm(ops::softmax(scores), v);  // [N*heads, L, hd]
    auto merged = ops::reshape(
        ops::permute(ops::reshape(attended, {n, heads_, tokens, hd}), {0, 2, 1, 3}),
        {n, tokens, channels_});
    return ops::mean_axis(out(merged), 1);
  }

  void collect(const std::string& prefix, Registry<T>& reg) {
    query.collect(join(prefix, "query"), reg);
    key.collect(join(prefix, "key"), reg);
    value.collect(join(prefix, "value"), reg);
    out.collect(join(prefix, "out"), reg);
  }

  std::size_t heads() const { return heads_; }

  Linear<T> query, key, value, out;

 private:
  std::size_t channels_ = 0;
  std::size_t heads_ = 1;
};

}  // namespace cmoe::nn
