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

#include "cmoe/report.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace cmoe::report {

namespace fs = std::filesystem;

namespace {

std::string fmt_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string ramp(double v) {
  v = std::clamp(v, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(255.0 + (8.0 - 255.0) * v));
  const int g = static_cast<int>(std::lround(255.0 + (48.0 - 255.0) * v));
  const int b = static_cast<int>(std::lround(255.0 + (107.0 - 255.0) * v));
  char buf[16];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

double log_factorial(std::size_t n) { return std::lgamma(static_cast<double>(n) + 1.0); }

}  // namespace

Matrix row_normalize(const std::vector<std::vector<std::size_t>>& counts) {
  Matrix out;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    double total = 0.0;
    for (auto v : counts[i]) total += static_cast<double>(v);
    std::vector<double> row(counts[i].size(), 0.0);
    if (total > 0.0) {
      for (std::size_t j = 0; j < row.size(); ++j) row[j] = static_cast<double>(counts[i][j]) / total;
    } else {
      spdlog::warn("row {} has no samples; rendered as zeros", i);
    }
    out.push_back(std::move(row));
  }
  return out;
}

std::string heatmap_svg(const Matrix& values, const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels, const std::string& x_title,
                        const std::string& y_title) {
  const int cell = 48, left = 140, top = 60;
  const int rows = static_cast<int>(values.size());
  const int cols = rows ? static_cast<int>(values[0].size()) : 0;
  const int width = left + cols * cell + 20, height = top + rows * cell + 20;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  os << "<text x=\"" << left + cols * cell / 2 << "\" y=\"16\" text-anchor=\"middle\">"
     << xml_escape(x_title) << "</text>\n";
  os << "<text x=\"12\" y=\"" << top + rows * cell / 2 << "\" transform=\"rotate(-90 12 "
     << top + rows * cell / 2 << ")\" text-anchor=\"middle\">" << xml_escape(y_title)
     << "</text>\n";
  for (int j = 0; j < cols; ++j) {
    const std::string label = j < static_cast<int>(col_labels.size()) ? col_labels[j] : "";
    os << "<text x=\"" << left + j * cell + cell / 2 << "\" y=\"" << top - 8
       << "\" text-anchor=\"middle\">" << xml_escape(label) << "</text>\n";
  }
  for (int i = 0; i < rows; ++i) {
    const std::string label = i < static_cast<int>(row_labels.size()) ? row_labels[i] : "";
    os << "<text x=\"" << left - 6 << "\" y=\"" << top + i * cell + cell / 2 + 4
       << "\" text-anchor=\"end\">" << xml_escape(label) << "</text>\n";
    for (int j = 0; j < cols; ++j) {
      const double v = values[i][j];
      os << "<rect x=\"" << left + j * cell << "\" y=\"" << top + i * cell << "\" width=\"" << cell
         << "\" height=\"" << cell << "\" fill=\"" << ramp(v) << "\" stroke=\"#cccccc\"/>\n";
      os << "<text x=\"" << left + j * cell + cell / 2 << "\" y=\"" << top + i * cell + cell / 2 + 4
         << "\" text-anchor=\"middle\" fill=\"" << (v > 0.5 ? "#ffffff" : "#000000") << "\">"
         << fmt_fixed(v, 2) << "</text>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

Matrix confusion_heatmap(const std::vector<std::vector<std::size_t>>& counts,
                         const std::vector<std::string>& class_names, const fs::path& dir) {
  for (const auto& row : counts) {
    if (row.size() != counts.size()) throw ShapeError("confusion matrix must be square");
  }
  if (class_names.size() != counts.size()) {
    throw ShapeError("confusion matrix size does not match the class list");
  }
  const Matrix norm = row_normalize(counts);
  std::ostringstream csv;
  csv << "actual\\predicted";
  for (const auto& n : class_names) csv << ',' << n;
  csv << '\n';
  for (std::size_t i = 0; i < norm.size(); ++i) {
    csv << class_names[i];
    for (double v : norm[i]) csv << ',' << fmt_fixed(v, 6);
    csv << '\n';
  }
  write_text(dir / "confusion.csv", csv.str());
  write_text(dir / "confusion.svg",
             heatmap_svg(norm, class_names, class_names, "predicted", "actual"));
  return norm;
}

ExpertAssignmentTable assignment_table(const std::vector<ExpertRecord>& records,
                                       const std::vector<std::string>& class_names,
                                       std::size_t num_experts) {
  ExpertAssignmentTable t;
  t.num_experts = num_experts;
  t.class_names = class_names;
  t.class_counts.assign(class_names.size(), std::vector<std::size_t>(num_experts, 0));
  for (const auto& r : records) {
    if (r.label >= class_names.size() || r.chosen >= num_experts) {
      throw ContractError("expert record outside the class or expert range");
    }
    ++t.class_counts[r.label][r.chosen];
    auto& hist = t.source_counts[r.source_id];
    if (hist.empty()) hist.assign(num_experts, 0);
    ++hist[r.chosen];
    t.source_class[r.source_id] = r.label;
  }
  t.class_fractions = row_normalize(t.class_counts);
  return t;
}

void expert_heatmap(const ExpertAssignmentTable& t, const fs::path& dir) {
  std::vector<std::string> experts;
  for (std::size_t j = 0; j < t.num_experts; ++j) experts.push_back("E" + std::to_string(j));

  std::ostringstream by_class;
  by_class << "class";
  for (std::size_t j = 0; j < t.num_experts; ++j) by_class << ",expert_" << j;
  by_class << '\n';
  for (std::size_t i = 0; i < t.class_names.size(); ++i) {
    by_class << t.class_names[i];
    for (double v : t.class_fractions[i]) by_class << ',' << fmt_fixed(v, 6);
    by_class << '\n';
  }
  write_text(dir / "experts_by_class.csv", by_class.str());

  std::ostringstream by_source;
  by_source << "source_id,class,segments";
  for (std::size_t j = 0; j < t.num_experts; ++j) by_source << ",expert_" << j;
  by_source << '\n';
  for (const auto& [source, hist] : t.source_counts) {
    std::size_t total = 0;
    for (auto v : hist) total += v;
    by_source << source << ',' << t.class_names[t.source_class.at(source)] << ',' << total;
    for (auto v : hist) by_source << ',' << v;
    by_source << '\n';
  }
  write_text(dir / "experts_by_source.csv", by_source.str());
  write_text(dir / "experts.svg",
             heatmap_svg(t.class_fractions, t.class_names, experts, "expert", "class"));
}

void write_expert_dump(const fs::path& path, const std::vector<ExpertRecord>& records,
                       const std::vector<std::string>& class_names) {
  std::ostringstream os;
  os << "segment_id,class,chosen_expert";
  const std::size_t m = records.empty() ? 0 : records.front().probs.size();
  for (std::size_t j = 0; j < m; ++j) os << ",p_" << j;
  os << '\n';
  for (const auto& r : records) {
    os << r.segment_id << ',' << class_names.at(r.label) << ',' << r.chosen;
    for (double p : r.probs) os << ',' << fmt_fixed(p, 6);
    os << '\n';
  }
  write_text(path, os.str());
}

double adjusted_mutual_info(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  if (a.size() != b.size()) throw ShapeError("AMI: labelings differ in length");
  const std::size_t n = a.size();
  if (n == 0) return 0.0;
  std::map<std::size_t, std::size_t> ia, ib;
  for (auto v : a) ia.emplace(v, ia.size());
  for (auto v : b) ib.emplace(v, ib.size());
  if (ia.size() < 2 || ib.size() < 2) return 0.0;

  std::vector<std::vector<std::size_t>> cont(ia.size(), std::vector<std::size_t>(ib.size(), 0));
  for (std::size_t k = 0; k < n; ++k) ++cont[ia[a[k]]][ib[b[k]]];
  std::vector<std::size_t> rs(ia.size(), 0), cs(ib.size(), 0);
  for (std::size_t i = 0; i < rs.size(); ++i)
    for (std::size_t j = 0; j < cs.size(); ++j) {
      rs[i] += cont[i][j];
      cs[j] += cont[i][j];
    }
  const double N = static_cast<double>(n);

  double mi = 0.0;
  for (std::size_t i = 0; i < rs.size(); ++i)
    for (std::size_t j = 0; j < cs.size(); ++j) {
      const double nij = static_cast<double>(cont[i][j]);
      if (nij > 0) mi += nij / N * std::log(N * nij / (double(rs[i]) * double(cs[j])));
    }
  auto entropy = [&](const std::vector<std::size_t>& s) {
    double h = 0.0;
    for (auto v : s) {
      const double p = static_cast<double>(v) / N;
      if (p > 0) h -= p * std::log(p);
    }
    return h;
  };
  const double ha = entropy(rs), hb = entropy(cs);

  double emi = 0.0;
  const double lfn = log_factorial(n);
  for (auto ai : rs) {
    for (auto bj : cs) {
      const std::size_t lo = std::max<std::ptrdiff_t>(1, std::ptrdiff_t(ai + bj) - std::ptrdiff_t(n));
      const std::size_t hi = std::min(ai, bj);
      for (std::size_t nij = lo; nij <= hi; ++nij) {
        const double term = double(nij) / N * std::log(N * double(nij) / (double(ai) * double(bj)));
        const double lp = log_factorial(ai) + log_factorial(bj) + log_factorial(n - ai) +
                          log_factorial(n - bj) - lfn - log_factorial(nij) -
                          log_factorial(ai - nij) - log_factorial(bj - nij) -
                          log_factorial(n - ai - bj + nij);
        emi += term * std::exp(lp);
      }
    }
  }
  const double denom = 0.5 * (ha + hb) - emi;
  if (std::abs(denom) < 1e-15) return 0.0;
  return (mi - emi) / denom;
}

double specialization_score(const std::vector<ExpertRecord>& records,
                            const std::map<std::string, std::size_t>& latent_modes) {
  std::vector<std::size_t> chosen, latent;
  for (const auto& r : records) {
    auto it = latent_modes.find(r.source_id);
    if (it == latent_modes.end()) {
      throw ManifestError("no latent mode recorded for source '" + r.source_id + "'");
    }
    chosen.push_back(r.chosen);
    latent.push_back(it->second);
  }
  return adjusted_mutual_info(chosen, latent);
}

}  // namespace cmoe::report
