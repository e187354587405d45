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

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <unistd.h>
#include <vector>

#include "cmoe/tensor.hpp"

namespace cmoe::test {

/// v[i] = s * sin(a * i + b); the reference values were produced from the same fill.
inline std::vector<double> fill(std::size_t n, double a, double b, double s = 1.0) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = s * std::sin(a * static_cast<double>(i) + b);
  return v;
}

template <typename T>
Tensor<T> filled(const Shape& shape, double a, double b, double s = 1.0, bool grad = true) {
  const auto v = fill(shape_numel(shape), a, b, s);
  return Tensor<T>(shape, std::vector<T>(v.begin(), v.end()), grad);
}

/// Position-weighted sum, sensitive to permutations as well as values.
template <typename T>
double checksum(std::span<const T> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    s += static_cast<double>(v[i]) * std::sin(0.013 * static_cast<double>(i) + 0.1);
  }
  return s;
}

template <typename T>
double checksum(std::span<T> v) {
  return checksum(std::span<const T>(v));
}

template <typename T>
double checksum(const std::vector<T>& v) {
  return checksum(std::span<const T>(v));
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("cmoe_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

}  // namespace cmoe::test
