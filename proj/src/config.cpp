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

#include "cmoe/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace cmoe {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

json to_json(const RunConfig& c) {
  json j;
  j["dataset"] = {
      {"manifest", c.dataset.manifest.string()},
      {"split_table", c.dataset.split_table.string()},
      {"sample_rate", c.dataset.sample_rate},
      {"band", {c.dataset.band.f_lo, c.dataset.band.f_hi}},
      {"segment_s", c.dataset.segments.len_s},
      {"hop_s", c.dataset.segments.hop_s},
      {"val_fraction", c.dataset.val.fraction},
      {"val_source_level", c.dataset.val.source_level},
      {"val_stratified", c.dataset.val.stratified},
      {"latent", c.dataset.latent.string()},
  };
  j["feature"] = {
      {"kind", to_string(c.feature.kind)},
      {"frame_ms", c.feature.framing.frame_len_ms},
      {"shift_ms", c.feature.framing.shift_ms},
      {"window", c.feature.framing.window == WindowKind::hann      ? "hann"
                 : c.feature.framing.window == WindowKind::hamming ? "hamming"
                                                                   : "rect"},
      {"n_filters", c.feature.n_filters},
      {"stft_component", c.feature.stft_component == StftComponent::real ? "real" : "magnitude"},
      {"stft_keep_low_bins", c.feature.stft_keep_low_bins},
      {"cqt_b", c.feature.cqt_bins_per_octave},
      {"cqt_hop_ms", c.feature.cqt_hop_ms},
      {"log_floor", c.feature.log_floor},
      {"cache_dir", c.cache_dir.string()},
  };
  j["model"] = {
      {"num_experts", c.model.head.num_experts},
      {"residual", c.model.head.residual},
      {"norm_func", to_string(c.model.head.norm)},
      {"balance", c.model.head.balance},
      {"alpha", c.model.head.alpha},
      {"attn_heads", c.model.backbone.attn_heads},
      {"hidden", c.model.head.hidden},
      {"min_input", c.model.backbone.min_input},
  };
  j["train"] = {
      {"lr", c.train.lr},
      {"weight_decay", c.train.weight_decay},
      {"epochs", c.train.epochs},
      {"batch_size", c.train.batch_size},
      {"seed", c.seeds},
      {"schedule", optim::to_string(c.train.schedule)},
      {"shuffle", c.train.shuffle},
  };
  j["out"] = {{"dir", c.out_dir.string()}};
  return j;
}

template <typename V>
V take(const json& section, const char* key, const std::string& where) {
  try {
    return section.at(key).get<V>();
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + where + "." + key + "': " + e.what());
  }
}

RunConfig from_json(const json& j) {
  RunConfig c;
  const auto& d = j.at("dataset");
  c.dataset.manifest = take<std::string>(d, "manifest", "dataset");
  c.dataset.split_table = take<std::string>(d, "split_table", "dataset");
  c.dataset.sample_rate = take<int>(d, "sample_rate", "dataset");
  const auto band = take<std::vector<double>>(d, "band", "dataset");
  if (band.size() != 2) throw ConfigError("dataset.band must be [f_lo, f_hi]");
  c.dataset.band = {band[0], band[1]};
  c.dataset.segments.len_s = take<double>(d, "segment_s", "dataset");
  c.dataset.segments.hop_s = take<double>(d, "hop_s", "dataset");
  c.dataset.val.fraction = take<double>(d, "val_fraction", "dataset");
  c.dataset.val.source_level = take<bool>(d, "val_source_level", "dataset");
  c.dataset.val.stratified = take<bool>(d, "val_stratified", "dataset");
  c.dataset.latent = take<std::string>(d, "latent", "dataset");

  const auto& f = j.at("feature");
  c.feature.kind = parse_feature_kind(take<std::string>(f, "kind", "feature"));
  c.feature.framing.frame_len_ms = take<double>(f, "frame_ms", "feature");
  c.feature.framing.shift_ms = take<double>(f, "shift_ms", "feature");
  c.feature.framing.window = parse_window(take<std::string>(f, "window", "feature"));
  c.feature.n_filters = take<std::size_t>(f, "n_filters", "feature");
  c.feature.stft_component = parse_stft_component(take<std::string>(f, "stft_component", "feature"));
  c.feature.stft_keep_low_bins = take<bool>(f, "stft_keep_low_bins", "feature");
  c.feature.cqt_bins_per_octave = take<int>(f, "cqt_b", "feature");
  c.feature.cqt_hop_ms = take<double>(f, "cqt_hop_ms", "feature");
  c.feature.log_floor = take<double>(f, "log_floor", "feature");
  c.cache_dir = take<std::string>(f, "cache_dir", "feature");
  c.feature.band = c.dataset.band;

  const auto& m = j.at("model");
  c.model.head.num_experts = take<std::size_t>(m, "num_experts", "model");
  c.model.head.residual = take<bool>(m, "residual", "model");
  c.model.head.norm = parse_norm_func(take<std::string>(m, "norm_func", "model"));
  c.model.head.balance = take<bool>(m, "balance", "model");
  c.model.head.alpha = take<double>(m, "alpha", "model");
  c.model.backbone.attn_heads = take<std::size_t>(m, "attn_heads", "model");
  c.model.head.hidden = take<std::size_t>(m, "hidden", "model");
  c.model.backbone.min_input = take<std::size_t>(m, "min_input", "model");

  const auto& t = j.at("train");
  c.train.lr = take<double>(t, "lr", "train");
  c.train.weight_decay = take<double>(t, "weight_decay", "train");
  c.train.epochs = take<std::size_t>(t, "epochs", "train");
  c.train.batch_size = take<std::size_t>(t, "batch_size", "train");
  const auto& seed = t.at("seed");
  if (seed.is_array()) {
    c.seeds = take<std::vector<std::uint64_t>>(t, "seed", "train");
  } else {
    c.seeds = {take<std::uint64_t>(t, "seed", "train")};
  }
  if (!c.seeds.empty()) c.train.seed = c.seeds.front();
  c.train.schedule = optim::parse_schedule(take<std::string>(t, "schedule", "train"));
  c.train.shuffle = take<bool>(t, "shuffle", "train");

  c.out_dir = take<std::string>(j.at("out"), "dir", "out");
  c.train.out_dir = c.out_dir;
  return c;
}

void check_known(const json& given, const json& defaults) {
  if (!given.is_object()) throw ConfigError("config root must be a JSON object");
  for (const auto& [section, body] : given.items()) {
    if (!defaults.contains(section)) throw ConfigError("unknown config section '" + section + "'");
    if (!body.is_object()) throw ConfigError("config section '" + section + "' must be an object");
    for (const auto& [key, value] : body.items()) {
      if (!defaults[section].contains(key)) {
        throw ConfigError("unknown config key '" + section + "." + key + "'");
      }
    }
  }
}

void merge(json& base, const json& given) {
  for (const auto& [section, body] : given.items()) {
    for (const auto& [key, value] : body.items()) base[section][key] = value;
  }
}

void resolve_path(json& j, const char* section, const char* key, const fs::path& base) {
  if (!j.contains(section) || !j[section].contains(key) || !j[section][key].is_string()) return;
  const fs::path p = j[section][key].get<std::string>();
  if (!p.empty() && p.is_relative()) j[section][key] = (base / p).lexically_normal().string();
}

json override_value(const json& current, const std::string& raw) {
  if (current.is_string()) return raw;
  json v = json::parse(raw, nullptr, false);
  if (!v.is_discarded()) {
    if (current.is_array() && !v.is_array()) return json::array({v});
    return v;
  }
  if (current.is_array() || raw.find(',') != std::string::npos) {
    v = json::parse("[" + raw + "]", nullptr, false);
    if (!v.is_discarded()) return v;
  }
  if (raw == "yes" || raw == "on") return true;
  if (raw == "no" || raw == "off") return false;
  return raw;
}

void apply_overrides(json& j, const Overrides& overrides) {
  for (const auto& [path, raw] : overrides) {
    const auto dot = path.find('.');
    if (dot == std::string::npos) throw ConfigError("override '" + path + "' must be section.key");
    const std::string section = path.substr(0, dot), key = path.substr(dot + 1);
    if (!j.contains(section) || !j[section].contains(key)) {
      throw ConfigError("unknown config key '" + path + "'");
    }
    j[section][key] = override_value(j[section][key], raw);
  }
}

}  // namespace

FeatureConfig RunConfig::feature_for(int sample_rate) const {
  FeatureConfig f = feature;
  f.band = dataset.band;
  if (f.band.f_hi <= 0.0) f.band.f_hi = sample_rate / 2.0;
  return f;
}

void RunConfig::validate() const {
  if (dataset.sample_rate < 0) throw ConfigError("dataset.sample_rate must be >= 0");
  if (!(dataset.segments.len_s > 0.0) || !(dataset.segments.hop_s > 0.0)) {
    throw ConfigError("dataset.segment_s and dataset.hop_s must be positive");
  }
  if (!(dataset.val.fraction >= 0.0 && dataset.val.fraction < 1.0)) {
    throw ConfigError("dataset.val_fraction must lie in [0, 1)");
  }
  if (dataset.sample_rate > 0) dataset.band.validate(dataset.sample_rate);
  feature.framing.validate();
  model.head.validate();
  if (model.backbone.attn_heads == 0 || 512 % model.backbone.attn_heads != 0) {
    throw ConfigError("model.attn_heads must divide 512");
  }
  if (seeds.empty()) throw ConfigError("train.seed needs at least one value");
  train.validate();
  if (out_dir.empty()) throw ConfigError("out.dir must be set");
}

RunConfig parse_run_config(const std::string& json_text, const Overrides& overrides,
                           const fs::path& base_dir) {
  json merged = to_json(RunConfig{});
  if (!json_text.empty()) {
    json given = json::parse(json_text, nullptr, false, true);
    if (given.is_discarded()) throw ConfigError("config is not valid JSON");
    check_known(given, merged);
    for (const auto& [section, key] :
         {std::pair{"dataset", "manifest"}, std::pair{"dataset", "split_table"},
          std::pair{"dataset", "latent"}, std::pair{"feature", "cache_dir"}, std::pair{"out", "dir"}}) {
      resolve_path(given, section, key, base_dir);
    }
    merge(merged, given);
  }
  apply_overrides(merged, overrides);
  RunConfig c = from_json(merged);
  c.validate();
  return c;
}

RunConfig load_run_config(const fs::path& path, const Overrides& overrides) {
  std::string text;
  fs::path base;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
    base = path.parent_path();
  }
  return parse_run_config(text, overrides, base);
}

std::string dump_run_config(const RunConfig& config) { return to_json(config).dump(2) + "\n"; }

std::vector<std::string> run_config_keys() {
  std::vector<std::string> keys;
  const json defaults = to_json(RunConfig{});
  for (const auto& [section, body] : defaults.items()) {
    for (const auto& [key, value] : body.items()) keys.push_back(section + "." + key);
  }
  return keys;
}

}  // namespace cmoe
