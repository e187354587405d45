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

#include "cmoe/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cmoe/kernels.hpp"

namespace cmoe::ops {

namespace {

template <typename T>
using Node = detail::Node<T>;

// Gradient buffer of input i, or an empty span when it takes no gradient.
template <typename T>
std::span<T> input_grad(Node<T>& self, std::size_t i) {
  auto& in = *self.inputs[i];
  return in.requires_grad ? in.grad_buffer() : std::span<T>();
}

template <typename T>
const std::vector<T>& input_value(const Node<T>& self, std::size_t i) {
  return self.inputs[i]->value;
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

template <typename T>
void require_rank(const Tensor<T>& x, std::size_t rank, const char* op) {
  if (!x.defined() || x.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     (x.defined() ? shape_str(x.shape()) : std::string("undefined")));
  }
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  return Tensor<T>::make_result(a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      auto g = input_grad(self, k);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  return Tensor<T>::make_result(a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      auto g = input_grad(self, k);
      const auto& other = input_value(self, 1 - k);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * other[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * s;
  return Tensor<T>::make_result(a.shape(), std::move(out), {a}, [s](Node<T>& self) {
    auto g = input_grad(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * s;
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = x.values()[i];
    out[i] = v > T(0) || std::isnan(v) ? v : T(0);
  }
  return Tensor<T>::make_result(x.shape(), std::move(out), {x}, [](Node<T>& self) {
    auto g = input_grad(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (self.value[i] > T(0)) g[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = x.values()[i];
    // Split by sign so exp never overflows.
    if (v >= T(0)) {
      out[i] = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      out[i] = e / (T(1) + e);
    }
  }
  return Tensor<T>::make_result(x.shape(), std::move(out), {x}, [](Node<T>& self) {
    auto g = input_grad(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += self.grad[i] * self.value[i] * (T(1) - self.value[i]);
    }
  });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x) {
  if (x.rank() == 0 || x.shape().back() == 0) throw ShapeError("softmax: empty last dimension");
  const std::size_t c = x.shape().back();
  const std::size_t rows = x.numel() / c;
  std::vector<T> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = x.values().data() + r * c;
    T* o = out.data() + r * c;
    const T mx = *std::max_element(in, in + c);
    T total = T(0);
    for (std::size_t j = 0; j < c; ++j) total += (o[j] = std::exp(in[j] - mx));
    for (std::size_t j = 0; j < c; ++j) o[j] /= total;
  }
  return Tensor<T>::make_result(x.shape(), std::move(out), {x}, [c, rows](Node<T>& self) {
    auto g = input_grad(self, 0);
    if (g.empty()) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const T* y = self.value.data() + r * c;
      const T* gy = self.grad.data() + r * c;
      T dot = T(0);
      for (std::size_t j = 0; j < c; ++j) dot += gy[j] * y[j];
      for (std::size_t j = 0; j < c; ++j) g[r * c + j] += y[j] * (gy[j] - dot);
    }
  });
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t stride, std::size_t pad) {
  require_rank(x, 4, "conv2d input");
  require_rank(weight, 4, "conv2d weight");
  if (stride == 0) throw ShapeError("conv2d: stride must be positive");
  kernels::ConvGeometry geo;
  geo.n = x.dim(0);
  geo.c_in = x.dim(1);
  geo.h = x.dim(2);
  geo.w = x.dim(3);
  geo.c_out = weight.dim(0);
  geo.kh = weight.dim(2);
  geo.kw = weight.dim(3);
  geo.stride = stride;
  geo.pad = pad;
  if (weight.dim(1) != geo.c_in) {
    throw ShapeError("conv2d: input has " + std::to_string(geo.c_in) + " channels, weight " +
                     shape_str(weight.shape()));
  }
  if (geo.h + 2 * pad < geo.kh || geo.w + 2 * pad < geo.kw) {
    throw ShapeError("conv2d: kernel larger than padded input " + shape_str(x.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && bias.shape() != Shape{geo.c_out}) {
    throw ShapeError("conv2d: bias shape " + shape_str(bias.shape()));
  }
  Shape out_shape{geo.n, geo.c_out, geo.h_out(), geo.w_out()};
  std::vector<T> out(shape_numel(out_shape));
  kernels::conv2d_forward(geo, x.values().data(), weight.values().data(),
                          has_bias ? bias.values().data() : nullptr, out.data());
  std::vector<Tensor<T>> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return Tensor<T>::make_result(
      std::move(out_shape), std::move(out), inputs, [geo, has_bias](Node<T>& self) {
        auto gx = input_grad(self, 0);
        auto gw = input_grad(self, 1);
        auto gb = has_bias ? input_grad(self, 2) : std::span<T>();
        kernels::conv2d_backward(geo, input_value(self, 0).data(), input_value(self, 1).data(),
                                 self.grad.data(), gx.empty() ? nullptr : gx.data(),
                                 gw.empty() ? nullptr : gw.data(),
                                 gb.empty() ? nullptr : gb.data());
      });
}

template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& x, std::size_t kernel, std::size_t stride, std::size_t pad) {
  require_rank(x, 4, "max_pool2d");
  if (kernel == 0 || stride == 0) throw ShapeError("max_pool2d: kernel and stride must be positive");
  if (2 * pad > kernel) throw ShapeError("max_pool2d: padding exceeds half the kernel");
  kernels::PoolGeometry geo;
  geo.n = x.dim(0);
  geo.c = x.dim(1);
  geo.h = x.dim(2);
  geo.w = x.dim(3);
  geo.k = kernel;
  geo.stride = stride;
  geo.pad = pad;
  if (geo.h + 2 * pad < kernel || geo.w + 2 * pad < kernel) {
    throw ShapeError("max_pool2d: window larger than padded input " + shape_str(x.shape()));
  }
  Shape out_shape{geo.n, geo.c, geo.h_out(), geo.w_out()};
  std::vector<T> out(shape_numel(out_shape));
  std::vector<std::int32_t> argmax(out.size());
  kernels::max_pool2d_forward(geo, x.values().data(), out.data(), argmax.data());
  return Tensor<T>::make_result(std::move(out_shape), std::move(out), {x},
                                [geo, argmax = std::move(argmax)](Node<T>& self) {
                                  auto g = input_grad(self, 0);
                                  if (g.empty()) return;
                                  kernels::max_pool2d_backward(geo, self.grad.data(),
                                                               argmax.data(), g.data());
                                });
}

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     RunningStats<T>& stats, const BatchNormOptions& opt) {
  if (!x.defined() || (x.rank() != 2 && x.rank() != 4)) {
    throw ShapeError("batch_norm: expected [N,C] or [N,C,H,W]");
  }
  const std::size_t n = x.dim(0), c = x.dim(1);
  const std::size_t hw = x.rank() == 4 ? x.dim(2) * x.dim(3) : 1;
  if (gamma.shape() != Shape{c} || beta.shape() != Shape{c} || stats.mean.size() != c ||
      stats.var.size() != c) {
    throw ShapeError("batch_norm: parameter size does not match " + std::to_string(c) +
                     " channels");
  }
  std::vector<T> out(x.numel());
  if (opt.train) {
    if (n * hw < 2) {
      throw ShapeError("batch_norm: train mode needs more than one value per channel");
    }
    std::vector<T> mean(c), invstd(c), var_unbiased(c);
    kernels::batch_norm_forward_train(n, c, hw, x.values().data(), gamma.values().data(),
                                      beta.values().data(), static_cast<T>(opt.eps), out.data(),
                                      mean.data(), invstd.data(), var_unbiased.data());
    if (opt.update_stats) {
      const T mom = static_cast<T>(opt.momentum);
      for (std::size_t k = 0; k < c; ++k) {
        stats.mean[k] = (T(1) - mom) * stats.mean[k] + mom * mean[k];
        stats.var[k] = (T(1) - mom) * stats.var[k] + mom * var_unbiased[k];
      }
    }
    return Tensor<T>::make_result(
        x.shape(), std::move(out), {x, gamma, beta},
        [n, c, hw, mean = std::move(mean), invstd = std::move(invstd)](Node<T>& self) {
          auto gx = input_grad(self, 0);
          auto gg = input_grad(self, 1);
          auto gb = input_grad(self, 2);
          kernels::batch_norm_backward_train(
              n, c, hw, input_value(self, 0).data(), input_value(self, 1).data(), mean.data(),
              invstd.data(), self.grad.data(), gx.empty() ? nullptr : gx.data(),
              gg.empty() ? nullptr : gg.data(), gb.empty() ? nullptr : gb.data());
        });
  }

  std::vector<T> mean = stats.mean, invstd(c);
  for (std::size_t k = 0; k < c; ++k) {
    invstd[k] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(stats.var[k]) + opt.eps));
  }
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t k = 0; k < c; ++k) {
      const T a = gamma.values()[k] * invstd[k];
      const T b = beta.values()[k];
      const T* in = x.values().data() + (s * c + k) * hw;
      T* o = out.data() + (s * c + k) * hw;
      for (std::size_t q = 0; q < hw; ++q) o[q] = (in[q] - mean[k]) * a + b;
    }
  }
  return Tensor<T>::make_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [n, c, hw, mean = std::move(mean), invstd = std::move(invstd)](Node<T>& self) {
        auto gx = input_grad(self, 0);
        auto gg = input_grad(self, 1);
        auto gb = input_grad(self, 2);
        const auto& xv = input_value(self, 0);
        const auto& gamma_v = input_value(self, 1);
        for (std::size_t k = 0; k < c; ++k) {
          double sg = 0.0, sgx = 0.0;
          for (std::size_t s = 0; s < n; ++s) {
            const std::size_t base = (s * c + k) * hw;
            for (std::size_t q = 0; q < hw; ++q) {
              const T gy = self.grad[base + q];
              sg += gy;
              sgx += gy * ((xv[base + q] - mean[k]) * invstd[k]);
              if (!gx.empty()) gx[base + q] += gy * gamma_v[k] * invstd[k];
            }
          }
          if (!gg.empty()) gg[k] += static_cast<T>(sgx);
          if (!gb.empty()) gb[k] += static_cast<T>(sg);
        }
      });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank(weight, 2, "linear weight");
  const std::size_t out_f = weight.dim(0), in_f = weight.dim(1);
  if (!x.defined() || x.rank() == 0 || x.shape().back() != in_f) {
    throw ShapeError("linear: input " + (x.defined() ? shape_str(x.shape()) : std::string("?")) +
                     " vs weight " + shape_str(weight.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && bias.shape() != Shape{out_f}) {
    throw ShapeError("linear: bias shape " + shape_str(bias.shape()));
  }
  const std::size_t rows = x.numel() / in_f;
  Shape out_shape = x.shape();
  out_shape.back() = out_f;
  std::vector<T> out(rows * out_f);
  kernels::matmul(x.values().data(), weight.values().data(), out.data(), rows, in_f, out_f, false,
                  true, false);
  if (has_bias) {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < out_f; ++j) out[r * out_f + j] += bias.values()[j];
  }
  std::vector<Tensor<T>> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return Tensor<T>::make_result(
      std::move(out_shape), std::move(out), inputs,
      [rows, in_f, out_f, has_bias](Node<T>& self) {
        const T* gy = self.grad.data();
        if (auto gx = input_grad(self, 0); !gx.empty()) {
          kernels::matmul(gy, input_value(self, 1).data(), gx.data(), rows, out_f, in_f, false,
                          false, true);
        }
        if (auto gw = input_grad(self, 1); !gw.empty()) {
          kernels::matmul(gy, input_value(self, 0).data(), gw.data(), out_f, rows, in_f, true,
                          false, true);
        }
        if (has_bias) {
          if (auto gb = input_grad(self, 2); !gb.empty()) {
            for (std::size_t j = 0; j < out_f; ++j) {
              double acc = 0.0;
              for (std::size_t r = 0; r < rows; ++r) acc += gy[r * out_f + j];
              gb[j] += static_cast<T>(acc);
            }
          }
        }
      });
}

template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b, bool trans_b) {
  require_rank(a, 3, "bmm lhs");
  require_rank(b, 3, "bmm rhs");
  const std::size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2);
  const std::size_t n = trans_b ? b.dim(1) : b.dim(2);
  const std::size_t bk = trans_b ? b.dim(2) : b.dim(1);
  if (b.dim(0) != batch || bk != k) {
    throw ShapeError("bmm: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  std::vector<T> out(batch * m * n);
  for (std::size_t s = 0; s < batch; ++s) {
    kernels::matmul(a.values().data() + s * m * k, b.values().data() + s * k * n,
                    out.data() + s * m * n, m, k, n, false, trans_b, false);
  }
  return Tensor<T>::make_result(
      Shape{batch, m, n}, std::move(out), {a, b}, [batch, m, k, n, trans_b](Node<T>& self) {
        auto ga = input_grad(self, 0);
        auto gb = input_grad(self, 1);
        const auto& av = input_value(self, 0);
        const auto& bv = input_value(self, 1);
        for (std::size_t s = 0; s < batch; ++s) {
          const T* gc = self.grad.data() + s * m * n;
          if (!ga.empty()) {
            kernels::matmul(gc, bv.data() + s * k * n, ga.data() + s * m * k, m, n, k, false,
                            !trans_b, true);
          }
          if (!gb.empty()) {
            if (trans_b) {
              kernels::matmul(gc, av.data() + s * m * k, gb.data() + s * k * n, n, m, k, true,
                              false, true);
            } else {
              kernels::matmul(av.data() + s * m * k, gc, gb.data() + s * k * n, k, m, n, true,
                              false, true);
            }
          }
        }
      });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  return Tensor<T>::make_result(std::move(shape), x.values(), {x}, [](Node<T>& self) {
    auto g = input_grad(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> flatten(const Tensor<T>& x) {
  if (!x.defined() || x.rank() == 0) throw ShapeError("flatten: needs a batch dimension");
  const std::size_t n = x.dim(0);
  return reshape(x, Shape{n, n ? x.numel() / n : 0});
}

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& order) {
  const std::size_t r = x.rank();
  std::vector<bool> used(r, false);
  if (order.size() != r) throw ShapeError("permute: order length does not match rank");
  for (auto o : order) {
    if (o >= r || used[o]) throw ShapeError("permute: invalid axis order");
    used[o] = true;
  }
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = x.dim(order[i]);
  std::vector<std::size_t> in_stride(r, 1);
  for (std::size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * x.dim(i);

  // src[i] is the input offset feeding output element i.
  const std::size_t total = x.numel();
  std::vector<std::size_t> src(total);
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t off = 0;
    for (std::size_t d = 0; d < r; ++d) off += idx[d] * in_stride[order[d]];
    src[i] = off;
    for (std::size_t d = r; d-- > 0;) {
      if (++idx[d] < out_shape[d]) break;
      idx[d] = 0;
    }
  }
  std::vector<T> out(total);
  for (std::size_t i = 0; i < total; ++i) out[i] = x.values()[src[i]];
  return Tensor<T>::make_result(std::move(out_shape), std::move(out), {x},
                                [src = std::move(src)](Node<T>& self) {
                                  auto g = input_grad(self, 0);
                                  if (g.empty()) return;
                                  for (std::size_t i = 0; i < src.size(); ++i)
                                    g[src[i]] += self.grad[i];
                                });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  double acc = 0.0;
  for (T v : x.values()) acc += v;
  return Tensor<T>::make_result(Shape{}, {static_cast<T>(acc)}, {x}, [](Node<T>& self) {
    auto g = input_grad(self, 0);
    for (auto& v : g) v += self.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  if (x.numel() == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(x), T(1) / static_cast<T>(x.numel()));
}

template <typename T>
Tensor<T> mean_axis(const Tensor<T>& x, std::size_t axis) {
  if (axis >= x.rank()) throw ShapeError("mean_axis: axis out of range");
  const std::size_t len = x.dim(axis);
  if (len == 0) throw ShapeError("mean_axis: empty axis");
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= x.dim(d);
  for (std::size_t d = axis + 1; d < x.rank(); ++d) inner *= x.dim(d);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  std::vector<T> out(outer * inner);
  const double inv = 1.0 / static_cast<double>(len);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      double acc = 0.0;
      for (std::size_t a = 0; a < len; ++a) acc += x.values()[(o * len + a) * inner + i];
      out[o * inner + i] = static_cast<T>(acc * inv);
    }
  }
  return Tensor<T>::make_result(std::move(out_shape), std::move(out), {x},
                                [outer, inner, len](Node<T>& self) {
                                  auto g = input_grad(self, 0);
                                  if (g.empty()) return;
                                  const T w = T(1) / static_cast<T>(len);
                                  for (std::size_t o = 0; o < outer; ++o)
                                    for (std::size_t a = 0; a < len; ++a)
                                      for (std::size_t i = 0; i < inner; ++i)
                                        g[(o * len + a) * inner + i] +=
                                            self.grad[o * inner + i] * w;
                                });
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<std::int64_t>& labels) {
  require_rank(logits, 2, "cross_entropy");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  if (labels.size() != n) throw ShapeError("cross_entropy: label count does not match batch");
  if (n == 0 || c == 0) throw ShapeError("cross_entropy: empty logits");
  std::vector<T> probs(n * c);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) {
      throw LabelError("cross_entropy: label " + std::to_string(labels[i]) + " outside [0, " +
                       std::to_string(c) + ")");
    }
    const T* row = logits.values().data() + i * c;
    const T mx = *std::max_element(row, row + c);
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) total += std::exp(static_cast<double>(row[j] - mx));
    const double lse = static_cast<double>(mx) + std::log(total);
    loss += lse - static_cast<double>(row[labels[i]]);
    for (std::size_t j = 0; j < c; ++j) {
      probs[i * c + j] = static_cast<T>(std::exp(static_cast<double>(row[j]) - lse));
    }
  }
  loss /= static_cast<double>(n);
  return Tensor<T>::make_result(
      Shape{}, {static_cast<T>(loss)}, {logits},
      [n, c, labels, probs = std::move(probs)](Node<T>& self) {
        auto g = input_grad(self, 0);
        if (g.empty()) return;
        const T w = self.grad[0] / static_cast<T>(n);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < c; ++j) {
            const T onehot = static_cast<std::int64_t>(j) == labels[i] ? T(1) : T(0);
            g[i * c + j] += w * (probs[i * c + j] - onehot);
          }
        }
      });
}

template <typename T>
Tensor<T> take_rows(const Tensor<T>& x, const std::vector<std::size_t>& idx) {
  if (!x.defined() || x.rank() == 0) throw ShapeError("take_rows: needs a row dimension");
  const std::size_t n = x.dim(0);
  const std::size_t row = n ? x.numel() / n : 0;
  for (auto i : idx) {
    if (i >= n) throw ContractError("take_rows: row index out of range");
  }
  Shape out_shape = x.shape();
  out_shape[0] = idx.size();
  std::vector<T> out(idx.size() * row);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    std::copy_n(x.values().data() + idx[k] * row, row, out.data() + k * row);
  }
  return Tensor<T>::make_result(std::move(out_shape), std::move(out), {x},
                                [idx, row](Node<T>& self) {
                                  auto g = input_grad(self, 0);
                                  if (g.empty()) return;
                                  for (std::size_t k = 0; k < idx.size(); ++k)
                                    for (std::size_t j = 0; j < row; ++j)
                                      g[idx[k] * row + j] += self.grad[k * row + j];
                                });
}

template <typename T>
Tensor<T> scatter_rows(const Tensor<T>& rows, const std::vector<std::size_t>& idx,
                       std::size_t n_rows) {
  if (!rows.defined() || rows.rank() == 0 || rows.dim(0) != idx.size()) {
    throw ShapeError("scatter_rows: row count does not match index count");
  }
  const std::size_t row = idx.empty() ? 0 : rows.numel() / idx.size();
  for (auto i : idx) {
    if (i >= n_rows) throw ContractError("scatter_rows: row index out of range");
  }
  Shape out_shape = rows.shape();
  out_shape[0] = n_rows;
  std::vector<T> out(shape_numel(out_shape), T(0));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    for (std::size_t j = 0; j < row; ++j) out[idx[k] * row + j] += rows.values()[k * row + j];
  }
  return Tensor<T>::make_result(std::move(out_shape), std::move(out), {rows},
                                [idx, row](Node<T>& self) {
                                  auto g = input_grad(self, 0);
                                  if (g.empty()) return;
                                  for (std::size_t k = 0; k < idx.size(); ++k)
                                    for (std::size_t j = 0; j < row; ++j)
                                      g[k * row + j] += self.grad[idx[k] * row + j];
                                });
}

template <typename T>
Tensor<T> dot_const(const Tensor<T>& x, const std::vector<T>& c) {
  if (c.size() != x.numel()) throw ShapeError("dot_const: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) acc += static_cast<double>(x.values()[i]) * c[i];
  return Tensor<T>::make_result(Shape{}, {static_cast<T>(acc)}, {x}, [c](Node<T>& self) {
    auto g = input_grad(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * c[i];
  });
}

#define CMOE_INSTANTIATE_OPS(T)                                                                \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> scale(const Tensor<T>&, T);                                               \
  template Tensor<T> relu(const Tensor<T>&);                                                   \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                \
  template Tensor<T> softmax(const Tensor<T>&);                                                \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t, \
                            std::size_t);                                                      \
  template Tensor<T> max_pool2d(const Tensor<T>&, std::size_t, std::size_t, std::size_t);      \
  template Tensor<T> batch_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,          \
                                RunningStats<T>&, const BatchNormOptions&);                    \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);             \
  template Tensor<T> bmm(const Tensor<T>&, const Tensor<T>&, bool);                            \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                         \
  template Tensor<T> flatten(const Tensor<T>&);                                                \
  template Tensor<T> permute(const Tensor<T>&, const std::vector<std::size_t>&);               \
  template Tensor<T> sum(const Tensor<T>&);                                                    \
  template Tensor<T> mean(const Tensor<T>&);                                                   \
  template Tensor<T> mean_axis(const Tensor<T>&, std::size_t);                                 \
  template Tensor<T> cross_entropy(const Tensor<T>&, const std::vector<std::int64_t>&);        \
  template Tensor<T> take_rows(const Tensor<T>&, const std::vector<std::size_t>&);             \
  template Tensor<T> scatter_rows(const Tensor<T>&, const std::vector<std::size_t>&,           \
                                  std::size_t);                                                \
  template Tensor<T> dot_const(const Tensor<T>&, const std::vector<T>&);

CMOE_INSTANTIATE_OPS(float)
CMOE_INSTANTIATE_OPS(double)

}  // namespace cmoe::ops
