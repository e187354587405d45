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

// Residual convolutional trunk with attention pooling: a single-channel
// spectrogram batch [N, 1, T, F] maps to representations [N, 512].

#include <array>
#include <sstream>
#include <string>

#include "cmoe/nn.hpp"

namespace cmoe {

/// conv3x3-BN-ReLU-conv3x3-BN plus a skip path, ReLU after the sum. The skip
/// is a 1x1 convolution + BN when the block changes width or stride.
template <typename T>
class BasicBlock {
 public:
  BasicBlock() = default;
  BasicBlock(std::size_t in, std::size_t out, std::size_t stride, Rng& rng)
      : conv1(in, out, 3, stride, 1, rng),
        bn1(out),
        conv2(out, out, 3, 1, 1, rng),
        bn2(out),
        in_(in),
        out_(out) {
    if (in != out || stride != 1) {
      has_projection = true;
      proj_conv = nn::Conv2d<T>(in, out, 1, stride, 0, rng);
      proj_bn = nn::BatchNorm<T>(out);
    }
  }

  Tensor<T> operator()(const Tensor<T>& x, bool train) {
    if (!x.defined() || x.rank() != 4 || x.dim(1) != in_) {
      throw ShapeError("basic block expects [N," + std::to_string(in_) + ",H,W], got " +
                       (x.defined() ? shape_str(x.shape()) : std::string("undefined")));
    }
    auto f = bn2(conv2(ops::relu(bn1(conv1(x), train))), train);
    auto skip = has_projection ? proj_bn(proj_conv(x), train) : x;
    return ops::relu(ops::add(f, skip));
  }

  void collect(const std::string& prefix, nn::Registry<T>& reg) {
    conv1.collect(nn::join(prefix, "conv1"), reg);
    bn1.collect(nn::join(prefix, "bn1"), reg);
    conv2.collect(nn::join(prefix, "conv2"), reg);
    bn2.collect(nn::join(prefix, "bn2"), reg);
    if (has_projection) {
      proj_conv.collect(nn::join(prefix, "downsample.conv"), reg);
      proj_bn.collect(nn::join(prefix, "downsample.bn"), reg);
    }
  }

  nn::Conv2d<T> conv1;
  nn::BatchNorm<T> bn1;
  nn::Conv2d<T> conv2;
  nn::BatchNorm<T> bn2;
  bool has_projection = false;
  nn::Conv2d<T> proj_conv;
  nn::BatchNorm<T> proj_bn;

 private:
  std::size_t in_ = 0;
  std::size_t out_ = 0;
};

struct BackboneConfig {
  std::size_t attn_heads = 4;
  /// Smallest accepted time / frequency extent of the input.
  std::size_t min_input = 32;
};

template <typename T>
class Backbone {
 public:
  static constexpr std::size_t kStemChannels = 64;
  static constexpr std::size_t kOutDim = 512;
  static constexpr std::array<std::size_t, 4> kWidths{64, 128, 256, 512};

  Backbone(const BackboneConfig& config, Rng& rng)
      : config_(config),
        stem_conv(1, kStemChannels, 7, 2, 3, rng),
        stem_bn(kStemChannels) {
    std::size_t in = kStemChannels;
    for (std::size_t s = 0; s < kWidths.size(); ++s) {
      const std::size_t stride = s == 0 ? 1 : 2;
      stages[s][0] = BasicBlock<T>(in, kWidths[s], stride, rng);
      stages[s][1] = BasicBlock<T>(kWidths[s], kWidths[s], 1, rng);
      in = kWidths[s];
    }
    pool = nn::AttentionPool2d<T>(kOutDim, config.attn_heads, rng);
  }

  /// Convolutional trunk only: [N, 1, T, F] -> [N, 512, T', F'].
  Tensor<T> features(const Tensor<T>& x, bool train) {
    if (!x.defined() || x.rank() != 4) {
      throw ShapeError("backbone expects a 4-D [N,1,T,F] batch, got " +
                       (x.defined() ? shape_str(x.shape()) : std::string("undefined")));
    }
    if (x.dim(1) != 1) throw ShapeError("backbone expects a single input channel");
    if (x.dim(2) < config_.min_input || x.dim(3) < config_.min_input) {
      throw ShapeError("backbone input " + shape_str(x.shape()) + " smaller than " +
                       std::to_string(config_.min_input) + " in time or frequency");
    }
    auto h = ops::max_pool2d(ops::relu(stem_bn(stem_conv(x), train)), 3, 2, 1);
    for (auto& stage : stages) {
      for (auto& block : stage) h = block(h, train);
    }
    return h;
  }

  Tensor<T> operator()(const Tensor<T>& x, bool train) { return pool(features(x, train)); }

  void collect(const std::string& prefix, nn::Registry<T>& reg) {
    stem_conv.collect(nn::join(prefix, "stem.conv"), reg);
    stem_bn.collect(nn::join(prefix, "stem.bn"), reg);
    for (std::size_t s = 0; s < stages.size(); ++s) {
      for (std::size_t b = 0; b < 2; ++b) {
        stages[s][b].collect(
            nn::join(prefix, "layer" + std::to_string(s + 1) + ".block" + std::to_string(b)), reg);
      }
    }
    pool.collect(nn::join(prefix, "pool"), reg);
  }

  /// Parameters of the convolutional trunk (convolutions and batch norms).
  std::size_t trunk_parameter_count() {
    nn::Registry<T> reg;
    collect("", reg);
    std::size_t n = 0;
    for (const auto& p : reg.params) {
      if (p.name.rfind("pool.", 0) != 0) n += p.tensor.numel();
    }
    return n;
  }

  std::string describe() {
    nn::Registry<T> reg;
    collect("backbone", reg);
    std::ostringstream os;
    for (const auto& p : reg.params) os << p.name << ' ' << shape_str(p.tensor.shape()) << '\n';
    os << "trunk_params=" << trunk_parameter_count() << '\n';
    os << "total_params=" << reg.param_count() << '\n';
    return os.str();
  }

  const BackboneConfig& config() const { return config_; }

 private:
  BackboneConfig config_;

 public:
  nn::Conv2d<T> stem_conv;
  nn::BatchNorm<T> stem_bn;
  std::array<std::array<BasicBlock<T>, 2>, 4> stages;
  nn::AttentionPool2d<T> pool;
};

}  // namespace cmoe
