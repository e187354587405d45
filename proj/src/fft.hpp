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

// Thin wrapper over FFTW. Plans are created once per size under a mutex (the
// FFTW planner is not thread-safe) with FFTW_ESTIMATE so that the chosen
// algorithm, and therefore every output bit, is the same on every run.

#include <complex>
#include <cstddef>
#include <span>

namespace cmoe::fft {

/// Real-to-complex forward transform; out must hold n/2 + 1 values.
void forward_real(std::span<const double> in, std::span<std::complex<double>> out);

/// Complex forward transform of length in.size().
void forward_complex(std::span<const std::complex<double>> in, std::span<std::complex<double>> out);

}  // namespace cmoe::fft
