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

#include "fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <utility>

namespace cmoe::fft {
namespace {

struct Buffer {
  void* ptr = nullptr;
  explicit Buffer(std::size_t bytes) : ptr(fftw_malloc(bytes)) {}
  ~Buffer() { fftw_free(ptr); }
  Buffer(const Buffer&) = delete;
  Buffer& operator=(const Buffer&) = delete;
};

enum class Kind { r2c, c2c };

class PlanCache {
 public:
  fftw_plan get(Kind kind, std::size_t n) {
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(kind, n);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    const int len = static_cast<int>(n);
    fftw_plan plan;
    // Plans are made on scratch buffers; execution uses the new-array API with
    // fftw_malloc'd buffers of the same alignment.
    Buffer in(sizeof(fftw_complex) * n);
    Buffer out(sizeof(fftw_complex) * n);
    if (kind == Kind::r2c) {
      plan = fftw_plan_dft_r2c_1d(len, static_cast<double*>(in.ptr),
                                  static_cast<fftw_complex*>(out.ptr), FFTW_ESTIMATE);
    } else {
      plan = fftw_plan_dft_1d(len, static_cast<fftw_complex*>(in.ptr),
                              static_cast<fftw_complex*>(out.ptr), FFTW_FORWARD, FFTW_ESTIMATE);
    }
    plans_.emplace(key, plan);
    return plan;
  }

  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  std::mutex mutex_;
  std::map<std::pair<Kind, std::size_t>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache instance;
  return instance;
}

}  // namespace

void forward_real(std::span<const double> in, std::span<std::complex<double>> out) {
  const std::size_t n = in.size();
  auto plan = cache().get(Kind::r2c, n);
  Buffer bin(sizeof(double) * n);
  Buffer bout(sizeof(fftw_complex) * (n / 2 + 1));
  std::memcpy(bin.ptr, in.data(), sizeof(double) * n);
  fftw_execute_dft_r2c(plan, static_cast<double*>(bin.ptr), static_cast<fftw_complex*>(bout.ptr));
  std::memcpy(out.data(), bout.ptr, sizeof(fftw_complex) * (n / 2 + 1));
}

void forward_complex(std::span<const std::complex<double>> in, std::span<std::complex<double>> out) {
  const std::size_t n = in.size();
  auto plan = cache().get(Kind::c2c, n);
  Buffer bin(sizeof(fftw_complex) * n);
  Buffer bout(sizeof(fftw_complex) * n);
  std::memcpy(bin.ptr, in.data(), sizeof(fftw_complex) * n);
  fftw_execute_dft(plan, static_cast<fftw_complex*>(bin.ptr), static_cast<fftw_complex*>(bout.ptr));
  std::memcpy(out.data(), bout.ptr, sizeof(fftw_complex) * n);
}

}  // namespace cmoe::fft
