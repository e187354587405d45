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

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cmoe {

/// Broad failure classes; the CLI maps these onto its exit codes.
enum class ErrorKind { config, data, numeric, contract };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define CMOE_DEFINE_ERROR(Name, Kind)                                  \
  class Name : public Error {                                          \
   public:                                                             \
    explicit Name(const std::string& what) : Error(Kind, what) {}      \
  };

// audio-io
CMOE_DEFINE_ERROR(FormatError, ErrorKind::data)
CMOE_DEFINE_ERROR(UnsupportedFormatError, ErrorKind::data)
CMOE_DEFINE_ERROR(EmptyAudioError, ErrorKind::data)
// features
CMOE_DEFINE_ERROR(TooShortError, ErrorKind::data)
CMOE_DEFINE_ERROR(BandError, ErrorKind::config)
CMOE_DEFINE_ERROR(PlanError, ErrorKind::config)
CMOE_DEFINE_ERROR(DegenerateFilterError, ErrorKind::config)
// diffcore / model
CMOE_DEFINE_ERROR(ShapeError, ErrorKind::contract)
CMOE_DEFINE_ERROR(LabelError, ErrorKind::data)
CMOE_DEFINE_ERROR(ContractError, ErrorKind::contract)
CMOE_DEFINE_ERROR(NumericError, ErrorKind::numeric)
CMOE_DEFINE_ERROR(CheckpointError, ErrorKind::data)
// datapipe
CMOE_DEFINE_ERROR(LeakageError, ErrorKind::data)
CMOE_DEFINE_ERROR(ManifestError, ErrorKind::data)
CMOE_DEFINE_ERROR(CacheMissError, ErrorKind::data)
CMOE_DEFINE_ERROR(SpecError, ErrorKind::config)
// cli
CMOE_DEFINE_ERROR(ConfigError, ErrorKind::config)

#undef CMOE_DEFINE_ERROR

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s);

}  // namespace cmoe
