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

// Parallel kernels against the serial reference loops on backbone-sized shapes.

#include <benchmark/benchmark.h>
#include <omp.h>

#include <vector>

#include "cmoe/kernels.hpp"
#include "cmoe/rng.hpp"

namespace {

using namespace cmoe::kernels;

std::vector<float> random_vec(std::size_t n, std::uint64_t seed) {
  cmoe::Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

// Third-stage block: 128 -> 128 channels, 3x3, on a 38x10 map (a 1200x300 input).
ConvGeometry block_conv(std::size_t n) { return {n, 128, 38, 10, 128, 3, 3, 1, 1}; }

template <bool Parallel>
void BM_Conv2dForward(benchmark::State& state) {
  const auto g = block_conv(static_cast<std::size_t>(state.range(0)));
  const auto x = random_vec(g.n * g.c_in * g.h * g.w, 1);
  const auto w = random_vec(g.c_out * g.patch(), 2);
  const auto b = random_vec(g.c_out, 3);
  std::vector<float> y(g.n * g.c_out * g.h_out() * g.w_out());
  for (auto _ : state) {
    if constexpr (Parallel) {
      conv2d_forward(g, x.data(), w.data(), b.data(), y.data());
    } else {
      reference::conv2d_forward(g, x.data(), w.data(), b.data(), y.data());
    }
    benchmark::DoNotOptimize(y.data());
  }
  state.counters["GFLOPS"] = benchmark::Counter(
      2.0 * static_cast<double>(y.size() * g.patch()), benchmark::Counter::kIsIterationInvariantRate,
      benchmark::Counter::kIs1000);
}

template <bool Parallel>
void BM_Conv2dBackward(benchmark::State& state) {
  const auto g = block_conv(static_cast<std::size_t>(state.range(0)));
  const auto x = random_vec(g.n * g.c_in * g.h * g.w, 1);
  const auto w = random_vec(g.c_out * g.patch(), 2);
  const auto dy = random_vec(g.n * g.c_out * g.h_out() * g.w_out(), 3);
  std::vector<float> dx(x.size()), dw(w.size()), db(g.c_out);
  for (auto _ : state) {
    if constexpr (Parallel) {
      conv2d_backward(g, x.data(), w.data(), dy.data(), dx.data(), dw.data(), db.data());
    } else {
      reference::conv2d_backward(g, x.data(), w.data(), dy.data(), dx.data(), dw.data(), db.data());
    }
    benchmark::DoNotOptimize(dx.data());
  }
}

template <bool Parallel>
void BM_Matmul(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto a = random_vec(m * 512, 4), b = random_vec(512 * 512, 5);
  std::vector<float> c(m * 512);
  for (auto _ : state) {
    if constexpr (Parallel) {
      matmul(a.data(), b.data(), c.data(), m, 512, 512, false, true, false);
    } else {
      reference::matmul(a.data(), b.data(), c.data(), m, 512, 512, false, true, false);
    }
    benchmark::DoNotOptimize(c.data());
  }
}

template <bool Parallel>
void BM_MaxPool(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const PoolGeometry g{n, 64, 300, 75, 3, 2, 1};
  const auto x = random_vec(n * 64 * 300 * 75, 6);
  const std::size_t ny = n * 64 * g.h_out() * g.w_out();
  std::vector<float> y(ny);
  std::vector<std::int32_t> am(ny);
  for (auto _ : state) {
    if constexpr (Parallel) {
      max_pool2d_forward(g, x.data(), y.data(), am.data());
    } else {
      reference::max_pool2d_forward(g, x.data(), y.data(), am.data());
    }
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_BatchNorm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t c = 64, hw = 150 * 38;
  const auto x = random_vec(n * c * hw, 7);
  const std::vector<float> gamma(c, 1.0f), beta(c, 0.0f);
  std::vector<float> y(x.size()), mean(c), invstd(c), var(c);
  for (auto _ : state) {
    if constexpr (Parallel) {
      batch_norm_forward_train(n, c, hw, x.data(), gamma.data(), beta.data(), 1e-5f, y.data(),
                               mean.data(), invstd.data(), var.data());
    } else {
      reference::batch_norm_forward_train(n, c, hw, x.data(), gamma.data(), beta.data(), 1e-5f,
                                          y.data(), mean.data(), invstd.data(), var.data());
    }
    benchmark::DoNotOptimize(y.data());
  }
}

BENCHMARK(BM_Conv2dForward<false>)->Name("conv2d_forward/reference")->Arg(2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv2dForward<true>)->Name("conv2d_forward/parallel")->Arg(2)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv2dBackward<false>)->Name("conv2d_backward/reference")->Arg(2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv2dBackward<true>)->Name("conv2d_backward/parallel")->Arg(2)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Matmul<false>)->Name("matmul/reference")->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Matmul<true>)->Name("matmul/parallel")->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MaxPool<false>)->Name("max_pool2d/reference")->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MaxPool<true>)->Name("max_pool2d/parallel")->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchNorm<false>)->Name("batch_norm/reference")->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchNorm<true>)->Name("batch_norm/parallel")->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  benchmark::AddCustomContext("omp_max_threads", std::to_string(omp_get_max_threads()));
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
