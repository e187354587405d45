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

// Binary checkpoint: "CMOECKPT", u32 version, u64 entry count, then per entry
// u32 name length, name bytes, u8 dtype (0 = f32, 1 = f64), u32 rank, u64 dims,
// little-endian values. Parameters come first, then buffers (batch-norm
// running statistics). An optimizer section follows: u8 present flag and, if
// set, u64 step count plus a second entry table of first/second moments.

#include <filesystem>

#include "cmoe/nn.hpp"
#include "cmoe/optim.hpp"

namespace cmoe {

inline constexpr char kCheckpointMagic[8] = {'C', 'M', 'O', 'E', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const nn::Registry<T>& reg,
                     optim::AdamW<T>* opt = nullptr);

/// Loads values in place. Every registry entry must be present with a
/// matching shape, otherwise CheckpointError. The optimizer section is
/// restored only when `opt` is given and the file has one.
template <typename T>
void load_checkpoint(const std::filesystem::path& path, nn::Registry<T>& reg,
                     optim::AdamW<T>* opt = nullptr);

extern template void save_checkpoint<float>(const std::filesystem::path&,
                                            const nn::Registry<float>&, optim::AdamW<float>*);
extern template void save_checkpoint<double>(const std::filesystem::path&,
                                             const nn::Registry<double>&, optim::AdamW<double>*);
extern template void load_checkpoint<float>(const std::filesystem::path&, nn::Registry<float>&,
                                            optim::AdamW<float>*);
extern template void load_checkpoint<double>(const std::filesystem::path&, nn::Registry<double>&,
                                             optim::AdamW<double>*);

}  // namespace cmoe
