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

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cmoe/trainer.hpp"

namespace cmoe::report {

using Matrix = std::vector<std::vector<double>>;

/// Row-normalised proportions; all-zero rows stay zero (with a warning).
Matrix row_normalize(const std::vector<std::vector<std::size_t>>& counts);

/// Grid heatmap with a white-to-dark single-hue ramp on [0, 1] and values
/// annotated to two decimals. Output bytes depend only on the inputs.
std::string heatmap_svg(const Matrix& values, const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels, const std::string& x_title,
                        const std::string& y_title);

/// confusion.csv and confusion.svg in `dir`; rows actual, columns predicted.
Matrix confusion_heatmap(const std::vector<std::vector<std::size_t>>& counts,
                         const std::vector<std::string>& class_names,
                         const std::filesystem::path& dir);

struct ExpertAssignmentTable {
  std::size_t num_experts = 0;
  std::vector<std::string> class_names;
  std::vector<std::vector<std::size_t>> class_counts;  // [class][expert]
  Matrix class_fractions;                               // rows sum to 1 (or 0 if empty)
  std::map<std::string, std::vector<std::size_t>> source_counts;
  std::map<std::string, std::size_t> source_class;
};

ExpertAssignmentTable assignment_table(const std::vector<ExpertRecord>& records,
                                       const std::vector<std::string>& class_names,
                                       std::size_t num_experts);

/// experts_by_class.csv, experts_by_source.csv and experts.svg in `dir`.
void expert_heatmap(const ExpertAssignmentTable& table, const std::filesystem::path& dir);

/// Per-segment routing dump: segment_id,class,chosen_expert,p_0..p_{m-1}.
void write_expert_dump(const std::filesystem::path& path, const std::vector<ExpertRecord>& records,
                       const std::vector<std::string>& class_names);

/// Adjusted mutual information with arithmetic-mean normalisation and the
/// hypergeometric expected MI. A labelling with a single cluster scores 0.
double adjusted_mutual_info(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b);

/// AMI between chosen experts and the latent mode of each record's source.
double specialization_score(const std::vector<ExpertRecord>& records,
                            const std::map<std::string, std::size_t>& latent_modes);

}  // namespace cmoe::report
