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

#include "cmoe/kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace cmoe::kernels {

namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapC = Eigen::Map<const Mat<T>>;
template <typename T>
using Map = Eigen::Map<Mat<T>>;

constexpr std::size_t kColsBudget = std::size_t{1} << 24;

std::size_t chunk_samples(const ConvGeometry& g) {
  const std::size_t per = g.patch() * g.h_out() * g.w_out();
  return std::clamp<std::size_t>(per ? kColsBudget / per : g.n, 1, g.n);
}

// cols is patch x (ns * hw_out), sample s occupying columns [s*hw_out, (s+1)*hw_out).
template <typename T>
void im2col(const ConvGeometry& g, const T* x, std::size_t n0, std::size_t ns, T* cols) {
  const std::size_t ho = g.h_out(), wo = g.w_out(), hw = ho * wo;
  const std::size_t width = ns * hw;
  const auto rows = static_cast<std::ptrdiff_t>(g.patch());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const std::size_t c = static_cast<std::size_t>(r) / (g.kh * g.kw);
    const std::size_t i = (static_cast<std::size_t>(r) / g.kw) % g.kh;
    const std::size_t j = static_cast<std::size_t>(r) % g.kw;
    T* out = cols + static_cast<std::size_t>(r) * width;
    for (std::size_t s = 0; s < ns; ++s) {
      const T* plane = x + ((n0 + s) * g.c_in + c) * g.h * g.w;
      for (std::size_t oh = 0; oh < ho; ++oh) {
        const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + i) -
                        static_cast<std::ptrdiff_t>(g.pad);
        T* dst = out + s * hw + oh * wo;
        if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.h)) {
          std::fill(dst, dst + wo, T(0));
          continue;
        }
        for (std::size_t ow = 0; ow < wo; ++ow) {
          const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride + j) -
                          static_cast<std::ptrdiff_t>(g.pad);
          dst[ow] = (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.w))
                        ? T(0)
                        : plane[static_cast<std::size_t>(ih) * g.w + static_cast<std::size_t>(iw)];
        }
      }
    }
  }
}

// Scatter-add of cols back onto dx, partitioned by (sample, channel) plane.
template <typename T>
void col2im(const ConvGeometry& g, const T* cols, std::size_t n0, std::size_t ns, T* dx) {
  const std::size_t ho = g.h_out(), wo = g.w_out(), hw = ho * wo;
  const std::size_t width = ns * hw;
  const auto planes = static_cast<std::ptrdiff_t>(ns * g.c_in);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < planes; ++p) {
    const std::size_t s = static_cast<std::size_t>(p) / g.c_in;
    const std::size_t c = static_cast<std::size_t>(p) % g.c_in;
    T* plane = dx + ((n0 + s) * g.c_in + c) * g.h * g.w;
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const T* src = cols + ((c * g.kh + i) * g.kw + j) * width + s * hw;
        for (std::size_t oh = 0; oh < ho; ++oh) {
          const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + i) -
                          static_cast<std::ptrdiff_t>(g.pad);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.h)) continue;
          for (std::size_t ow = 0; ow < wo; ++ow) {
            const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride + j) -
                            static_cast<std::ptrdiff_t>(g.pad);
            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.w)) continue;
            plane[static_cast<std::size_t>(ih) * g.w + static_cast<std::size_t>(iw)] +=
                src[oh * wo + ow];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
void matmul(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
            bool trans_a, bool trans_b, bool accumulate) {
  const auto M = static_cast<Eigen::Index>(m), K = static_cast<Eigen::Index>(k),
             N = static_cast<Eigen::Index>(n);
  Map<T> C(c, M, N);
  if (!accumulate) C.setZero();
  if (!trans_a && !trans_b) {
    C.noalias() += MapC<T>(a, M, K) * MapC<T>(b, K, N);
  } else if (!trans_a && trans_b) {
    C.noalias() += MapC<T>(a, M, K) * MapC<T>(b, N, K).transpose();
  } else if (trans_a && !trans_b) {
    C.noalias() += MapC<T>(a, K, M).transpose() * MapC<T>(b, K, N);
  } else {
    C.noalias() += MapC<T>(a, K, M).transpose() * MapC<T>(b, N, K).transpose();
  }
}

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* weight, const T* bias, T* y) {
  const std::size_t hw = g.h_out() * g.w_out();
  const std::size_t chunk = chunk_samples(g);
  std::vector<T> cols(g.patch() * chunk * hw);
  Mat<T> out;
  const MapC<T> W(weight, static_cast<Eigen::Index>(g.c_out), static_cast<Eigen::Index>(g.patch()));
  for (std::size_t n0 = 0; n0 < g.n; n0 += chunk) {
    const std::size_t ns = std::min(chunk, g.n - n0);
    const auto width = static_cast<Eigen::Index>(ns * hw);
    im2col(g, x, n0, ns, cols.data());
    const MapC<T> C(cols.data(), static_cast<Eigen::Index>(g.patch()), width);
    out.resize(W.rows(), width);
    // One product per sample, so a sample's result does not depend on its batch position.
    const auto h = static_cast<Eigen::Index>(hw);
    for (std::size_t s = 0; s < ns; ++s) {
      const auto c0 = static_cast<Eigen::Index>(s) * h;
      out.middleCols(c0, h).noalias() = W * C.middleCols(c0, h);
    }
    const auto outs = static_cast<std::ptrdiff_t>(ns * g.c_out);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t p = 0; p < outs; ++p) {
      const std::size_t s = static_cast<std::size_t>(p) / g.c_out;
      const std::size_t o = static_cast<std::size_t>(p) % g.c_out;
      const T b = bias ? bias[o] : T(0);
      const T* src = out.data() + o * static_cast<std::size_t>(width) + s * hw;
      T* dst = y + ((n0 + s) * g.c_out + o) * hw;
      for (std::size_t q = 0; q < hw; ++q) dst[q] = src[q] + b;
    }
  }
}

template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* x, const T* weight, const T* dy, T* dx,
                     T* dweight, T* dbias) {
  const std::size_t hw = g.h_out() * g.w_out();
  if (dbias) {
    const auto co = static_cast<std::ptrdiff_t>(g.c_out);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t o = 0; o < co; ++o) {
      double acc = 0.0;
      for (std::size_t s = 0; s < g.n; ++s) {
        const T* src = dy + (s * g.c_out + static_cast<std::size_t>(o)) * hw;
        for (std::size_t q = 0; q < hw; ++q) acc += src[q];
      }
      dbias[o] += static_cast<T>(acc);
    }
  }
  if (!dx && !dweight) return;

  const std::size_t chunk = chunk_samples(g);
  const auto P = static_cast<Eigen::Index>(g.patch());
  const auto CO = static_cast<Eigen::Index>(g.c_out);
  std::vector<T> cols(g.patch() * chunk * hw);
  Mat<T> dyc, dcols;
  for (std::size_t n0 = 0; n0 < g.n; n0 += chunk) {
    const std::size_t ns = std::min(chunk, g.n - n0);
    const auto width = static_cast<Eigen::Index>(ns * hw);
    dyc.resize(CO, width);
    const auto outs = static_cast<std::ptrdiff_t>(ns * g.c_out);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t p = 0; p < outs; ++p) {
      const std::size_t s = static_cast<std::size_t>(p) / g.c_out;
      const std::size_t o = static_cast<std::size_t>(p) % g.c_out;
      const T* src = dy + ((n0 + s) * g.c_out + o) * hw;
      std::copy(src, src + hw, dyc.data() + o * static_cast<std::size_t>(width) + s * hw);
    }
    if (dweight) {
      im2col(g, x, n0, ns, cols.data());
      Map<T>(dweight, CO, P).noalias() += dyc * MapC<T>(cols.data(), P, width).transpose();
    }
    if (dx) {
      dcols.noalias() = MapC<T>(weight, CO, P).transpose() * dyc;
      col2im(g, dcols.data(), n0, ns, dx);
    }
  }
}

template <typename T>
void max_pool2d_forward(const PoolGeometry& g, const T* x, T* y, std::int32_t* argmax) {
  const std::size_t ho = g.h_out(), wo = g.w_out();
  const auto planes = static_cast<std::ptrdiff_t>(g.n * g.c);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < planes; ++p) {
    const T* in = x + static_cast<std::size_t>(p) * g.h * g.w;
    T* out = y + static_cast<std::size_t>(p) * ho * wo;
    std::int32_t* arg = argmax + static_cast<std::size_t>(p) * ho * wo;
    for (std::size_t oh = 0; oh < ho; ++oh) {
      for (std::size_t ow = 0; ow < wo; ++ow) {
        T best = -std::numeric_limits<T>::infinity();
        std::int32_t best_i = -1;
        for (std::size_t i = 0; i < g.k; ++i) {
          const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + i) -
                          static_cast<std::ptrdiff_t>(g.pad);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.h)) continue;
          for (std::size_t j = 0; j < g.k; ++j) {
            const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride + j) -
                            static_cast<std::ptrdiff_t>(g.pad);
            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.w)) continue;
            const auto idx = static_cast<std::int32_t>(ih * static_cast<std::ptrdiff_t>(g.w) + iw);
            if (best_i < 0 || in[idx] > best || std::isnan(in[idx])) {
              best = in[idx];
              best_i = idx;
            }
          }
        }
        out[oh * wo + ow] = best;
        arg[oh * wo + ow] = best_i;
      }
    }
  }
}

template <typename T>
void max_pool2d_backward(const PoolGeometry& g, const T* dy, const std::int32_t* argmax, T* dx) {
  const std::size_t hw_out = g.h_out() * g.w_out();
  const auto planes = static_cast<std::ptrdiff_t>(g.n * g.c);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < planes; ++p) {
    T* plane = dx + static_cast<std::size_t>(p) * g.h * g.w;
    const T* src = dy + static_cast<std::size_t>(p) * hw_out;
    const std::int32_t* arg = argmax + static_cast<std::size_t>(p) * hw_out;
    for (std::size_t q = 0; q < hw_out; ++q) plane[arg[q]] += src[q];
  }
}

template <typename T>
void batch_norm_forward_train(std::size_t n, std::size_t c, std::size_t hw, const T* x,
                              const T* gamma, const T* beta, T eps, T* y, T* mean, T* invstd,
                              T* var_unbiased) {
  const double m = static_cast<double>(n * hw);
  const auto channels = static_cast<std::ptrdiff_t>(c);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ch = 0; ch < channels; ++ch) {
    const auto k = static_cast<std::size_t>(ch);
    double sum = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      const T* in = x + (s * c + k) * hw;
      for (std::size_t q = 0; q < hw; ++q) sum += in[q];
    }
    const double mu = sum / m;
    double sq = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      const T* in = x + (s * c + k) * hw;
      for (std::size_t q = 0; q < hw; ++q) {
        const double d = in[q] - mu;
        sq += d * d;
      }
    }
    const double var = sq / m;
    const double is = 1.0 / std::sqrt(var + static_cast<double>(eps));
    mean[k] = static_cast<T>(mu);
    invstd[k] = static_cast<T>(is);
    var_unbiased[k] = static_cast<T>(m > 1.0 ? sq / (m - 1.0) : 0.0);
    const double gk = gamma[k], bk = beta[k];
    for (std::size_t s = 0; s < n; ++s) {
      const T* in = x + (s * c + k) * hw;
      T* out = y + (s * c + k) * hw;
      for (std::size_t q = 0; q < hw; ++q) out[q] = static_cast<T>((in[q] - mu) * is * gk + bk);
    }
  }
}

template <typename T>
void batch_norm_backward_train(std::size_t n, std::size_t c, std::size_t hw, const T* x,
                               const T* gamma, const T* mean, const T* invstd, const T* dy, T* dx,
                               T* dgamma, T* dbeta) {
  const double m = static_cast<double>(n * hw);
  const auto channels = static_cast<std::ptrdiff_t>(c);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ch = 0; ch < channels; ++ch) {
    const auto k = static_cast<std::size_t>(ch);
    const double mu = mean[k], is = invstd[k];
    double sdy = 0.0, sdyx = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      const T* in = x + (s * c + k) * hw;
      const T* g = dy + (s * c + k) * hw;
      for (std::size_t q = 0; q < hw; ++q) {
        sdy += g[q];
        sdyx += g[q] * ((in[q] - mu) * is);
      }
    }
    if (dbeta) dbeta[k] += static_cast<T>(sdy);
    if (dgamma) dgamma[k] += static_cast<T>(sdyx);
    if (!dx) continue;
    const double scale = static_cast<double>(gamma[k]) * is / m;
    for (std::size_t s = 0; s < n; ++s) {
      const T* in = x + (s * c + k) * hw;
      const T* g = dy + (s * c + k) * hw;
      T* out = dx + (s * c + k) * hw;
      for (std::size_t q = 0; q < hw; ++q) {
        const double xhat = (in[q] - mu) * is;
        out[q] += static_cast<T>(scale * (m * g[q] - sdy - xhat * sdyx));
      }
    }
  }
}

namespace reference {

template <typename T>
void matmul(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
            bool trans_a, bool trans_b, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = accumulate ? static_cast<double>(c[i * n + j]) : 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        const T av = trans_a ? a[p * m + i] : a[i * k + p];
        const T bv = trans_b ? b[j * k + p] : b[p * n + j];
        acc += static_cast<double>(av) * bv;
      }
      c[i * n + j] = static_cast<T>(acc);
    }
  }
}

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* weight, const T* bias, T* y) {
  const std::size_t ho = g.h_out(), wo = g.w_out();
  for (std::size_t s = 0; s < g.n; ++s) {
    for (std::size_t o = 0; o < g.c_out; ++o) {
      for (std::size_t oh = 0; oh < ho; ++oh) {
        for (std::size_t ow = 0; ow < wo; ++ow) {
          double acc = bias ? static_cast<double>(bias[o]) : 0.0;
          for (std::size_t c = 0; c < g.c_in; ++c) {
            for (std::size_t i = 0; i < g.kh; ++i) {
              for (std::size_t j = 0; j < g.kw; ++j) {
                const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + i) -
                                static_cast<std::ptrdiff_t>(g.pad);
                const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride + j) -
                                static_cast<std::ptrdiff_t>(g.pad);
                if (ih < 0 || iw < 0 || ih >= static_cast<std::ptrdiff_t>(g.h) ||
                    iw >= static_cast<std::ptrdiff_t>(g.w))
                  continue;
                acc += static_cast<double>(
                           x[((s * g.c_in + c) * g.h + static_cast<std::size_t>(ih)) * g.w +
                             static_cast<std::size_t>(iw)]) *
                       weight[((o * g.c_in + c) * g.kh + i) * g.kw + j];
              }
            }
          }
          y[((s * g.c_out + o) * ho + oh) * wo + ow] = static_cast<T>(acc);
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* x, const T* weight, const T* dy, T* dx,
                     T* dweight, T* dbias) {
  const std::size_t ho = g.h_out(), wo = g.w_out();
  for (std::size_t s = 0; s < g.n; ++s) {
    for (std::size_t o = 0; o < g.c_out; ++o) {
      for (std::size_t oh = 0; oh < ho; ++oh) {
        for (std::size_t ow = 0; ow < wo; ++ow) {
          const T gout = dy[((s * g.c_out + o) * ho + oh) * wo + ow];
          if (dbias) dbias[o] += gout;
          for (std::size_t c = 0; c < g.c_in; ++c) {
            for (std::size_t i = 0; i < g.kh; ++i) {
              for (std::size_t j = 0; j < g.kw; ++j) {
                const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + i) -
                                static_cast<std::ptrdiff_t>(g.pad);
                const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride + j) -
                                static_cast<std::ptrdiff_t>(g.pad);
                if (ih < 0 || iw < 0 || ih >= static_cast<std::ptrdiff_t>(g.h) ||
                    iw >= static_cast<std::ptrdiff_t>(g.w))
                  continue;
                const std::size_t xi = ((s * g.c_in + c) * g.h + static_cast<std::size_t>(ih)) *
                                           g.w +
                                       static_cast<std::size_t>(iw);
                const std::size_t wi = ((o * g.c_in + c) * g.kh + i) * g.kw + j;
                if (dx) dx[xi] += gout * weight[wi];
                if (dweight) dweight[wi] += gout * x[xi];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void max_pool2d_forward(const PoolGeometry& g, const T* x, T* y, std::int32_t* argmax) {
  const std::size_t ho = g.h_out(), wo = g.w_out();
  for (std::size_t p = 0; p < g.n * g.c; ++p) {
    for (std::size_t oh = 0; oh < ho; ++oh) {
      for (std::size_t ow = 0; ow < wo; ++ow) {
        std::int32_t best_i = -1;
        for (std::size_t i = 0; i < g.k; ++i) {
          for (std::size_t j = 0; j < g.k; ++j) {
            const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + i) -
                            static_cast<std::ptrdiff_t>(g.pad);
            const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride + j) -
                            static_cast<std::ptrdiff_t>(g.pad);
            if (ih < 0 || iw < 0 || ih >= static_cast<std::ptrdiff_t>(g.h) ||
                iw >= static_cast<std::ptrdiff_t>(g.w))
              continue;
            const auto idx = static_cast<std::int32_t>(ih * static_cast<std::ptrdiff_t>(g.w) + iw);
            const T v = x[p * g.h * g.w + idx];
            if (best_i < 0 || v > x[p * g.h * g.w + best_i] || std::isnan(v)) best_i = idx;
          }
        }
        y[(p * ho + oh) * wo + ow] = x[p * g.h * g.w + best_i];
        argmax[(p * ho + oh) * wo + ow] = best_i;
      }
    }
  }
}

template <typename T>
void max_pool2d_backward(const PoolGeometry& g, const T* dy, const std::int32_t* argmax, T* dx) {
  const std::size_t hw_out = g.h_out() * g.w_out();
  for (std::size_t p = 0; p < g.n * g.c; ++p) {
    for (std::size_t q = 0; q < hw_out; ++q) {
      dx[p * g.h * g.w + argmax[p * hw_out + q]] += dy[p * hw_out + q];
    }
  }
}

template <typename T>
void batch_norm_forward_train(std::size_t n, std::size_t c, std::size_t hw, const T* x,
                              const T* gamma, const T* beta, T eps, T* y, T* mean, T* invstd,
                              T* var_unbiased) {
  const double m = static_cast<double>(n * hw);
  for (std::size_t k = 0; k < c; ++k) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t q = 0; q < hw; ++q) sum += x[(s * c + k) * hw + q];
    const double mu = sum / m;
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t q = 0; q < hw; ++q) {
        const double d = x[(s * c + k) * hw + q] - mu;
        sq += d * d;
      }
    const double is = 1.0 / std::sqrt(sq / m + static_cast<double>(eps));
    mean[k] = static_cast<T>(mu);
    invstd[k] = static_cast<T>(is);
    var_unbiased[k] = static_cast<T>(m > 1.0 ? sq / (m - 1.0) : 0.0);
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t q = 0; q < hw; ++q) {
        const std::size_t i = (s * c + k) * hw + q;
        y[i] = static_cast<T>((x[i] - mu) * is * gamma[k] + beta[k]);
      }
  }
}

template <typename T>
void batch_norm_backward_train(std::size_t n, std::size_t c, std::size_t hw, const T* x,
                               const T* gamma, const T* mean, const T* invstd, const T* dy, T* dx,
                               T* dgamma, T* dbeta) {
  const double m = static_cast<double>(n * hw);
  for (std::size_t k = 0; k < c; ++k) {
    double sdy = 0.0, sdyx = 0.0;
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t q = 0; q < hw; ++q) {
        const std::size_t i = (s * c + k) * hw + q;
        sdy += dy[i];
        sdyx += dy[i] * ((x[i] - mean[k]) * static_cast<double>(invstd[k]));
      }
    if (dbeta) dbeta[k] += static_cast<T>(sdy);
    if (dgamma) dgamma[k] += static_cast<T>(sdyx);
    if (!dx) continue;
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t q = 0; q < hw; ++q) {
        const std::size_t i = (s * c + k) * hw + q;
        const double xhat = (x[i] - mean[k]) * static_cast<double>(invstd[k]);
        dx[i] += static_cast<T>(gamma[k] * static_cast<double>(invstd[k]) / m *
                                (m * dy[i] - sdy - xhat * sdyx));
      }
  }
}

}  // namespace reference

#define CMOE_INSTANTIATE_KERNELS(NS, T)                                                        \
  template void NS::matmul<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t,   \
                              bool, bool, bool);                                               \
  template void NS::conv2d_forward<T>(const ConvGeometry&, const T*, const T*, const T*, T*);  \
  template void NS::conv2d_backward<T>(const ConvGeometry&, const T*, const T*, const T*, T*,  \
                                       T*, T*);                                                \
  template void NS::max_pool2d_forward<T>(const PoolGeometry&, const T*, T*, std::int32_t*);   \
  template void NS::max_pool2d_backward<T>(const PoolGeometry&, const T*, const std::int32_t*, \
                                           T*);                                                \
  template void NS::batch_norm_forward_train<T>(std::size_t, std::size_t, std::size_t,         \
                                                const T*, const T*, const T*, T, T*, T*, T*,   \
                                                T*);                                           \
  template void NS::batch_norm_backward_train<T>(std::size_t, std::size_t, std::size_t,        \
                                                 const T*, const T*, const T*, const T*,       \
                                                 const T*, T*, T*, T*);

CMOE_INSTANTIATE_KERNELS(kernels, float)
CMOE_INSTANTIATE_KERNELS(kernels, double)
CMOE_INSTANTIATE_KERNELS(kernels::reference, float)
CMOE_INSTANTIATE_KERNELS(kernels::reference, double)

}  // namespace cmoe::kernels
