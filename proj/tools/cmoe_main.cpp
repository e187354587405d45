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

// Command-line front end: cmoe <command> [-c config.json] [--section.key value ...]

#include <omp.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cmoe/checkpoint.hpp"
#include "cmoe/config.hpp"
#include "cmoe/gradsuite.hpp"
#include "cmoe/pipeline.hpp"
#include "cmoe/report.hpp"

namespace fs = std::filesystem;
using namespace cmoe;

namespace {

enum Exit { kOk = 0, kConfig = 1, kData = 2, kNumeric = 3 };

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::config: return kConfig;
    case ErrorKind::numeric: return kNumeric;
    case ErrorKind::data:
    case ErrorKind::contract: return kData;
  }
  return kData;
}

void kv(const std::string& key, const std::string& value) {
  std::cout << key << '=' << value << '\n';
}

void kv(const std::string& key, double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", value);
  kv(key, std::string(buf));
}

void kv(const std::string& key, std::size_t value) { kv(key, std::to_string(value)); }

/// Pulls "--section.key value" / "--section.key=value" out of argv.
Overrides take_overrides(std::vector<std::string>& args) {
  Overrides out;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) == 0 && a.find('.') != std::string::npos &&
        a.find('.') < a.find('=')) {
      const auto eq = a.find('=');
      if (eq != std::string::npos) {
        out.emplace_back(a.substr(2, eq - 2), a.substr(eq + 1));
      } else {
        if (i + 1 >= args.size()) throw ConfigError("override " + a + " needs a value");
        out.emplace_back(a.substr(2), args[++i]);
      }
    } else {
      rest.push_back(a);
    }
  }
  args = rest;
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

void emit_eval(const std::string& prefix, const EvalResult& r,
               const std::vector<std::string>& classes) {
  kv(prefix + "accuracy", r.accuracy);
  kv(prefix + "correct", r.correct);
  kv(prefix + "total", r.total);
  for (std::size_t c = 0; c < classes.size(); ++c) {
    kv(prefix + "class." + classes[c] + ".acc", r.per_class[c]);
  }
}

int cmd_extract(const RunConfig& cfg) {
  if (cfg.cache_dir.empty()) throw ConfigError("extract needs feature.cache_dir");
  Manifest manifest = load_manifest(cfg.dataset.manifest);
  if (cfg.dataset.sample_rate > 0) manifest.sample_rate = cfg.dataset.sample_rate;
  FeatureStore store(manifest, cfg.feature, cfg.dataset.segments, cfg.cache_dir);

  std::size_t segments = 0, written = 0;
  std::vector<std::string> errors;
  for (const auto& e : manifest.entries) {
    try {
      const auto segs = segment_source(e.source_id, probe_wav(e.path).duration_s(), cfg.dataset.segments);
      if (segs.empty()) spdlog::warn("source '{}' is shorter than one segment", e.source_id);
      for (const auto& s : segs) {
        ++segments;
        written += store.ensure_cached(s) ? 1 : 0;
      }
    } catch (const Error& ex) {
      errors.push_back(e.source_id + "\t" + e.path.string() + "\t" + ex.what());
      spdlog::error("{}: {}", e.source_id, ex.what());
    }
  }
  std::string log;
  for (const auto& line : errors) log += line + "\n";
  write_text(cfg.cache_dir / "errors.log", log);

  kv("sources", manifest.entries.size());
  kv("segments", segments);
  kv("written", written);
  kv("skipped", segments - written);
  kv("errors", errors.size());
  return errors.empty() ? kOk : kData;
}

int cmd_train(const RunConfig& cfg) {
  const PreparedData data = prepare_data(cfg);
  fs::create_directories(cfg.out_dir);
  write_text(cfg.out_dir / "config.json", dump_run_config(cfg));
  double test_sum = 0.0, val_sum = 0.0;
  std::string summary = "seed,best_epoch,best_val_acc,test_acc\n";
  for (auto seed : cfg.seeds) {
    const fs::path dir = cfg.out_dir / ("seed_" + std::to_string(seed));
    const SeedRun run = run_seed(cfg, data, seed, dir);
    report::confusion_heatmap(run.test.confusion, data.manifest.class_names, dir);
    const std::string p = "seed_" + std::to_string(seed) + ".";
    kv(p + "best_epoch", run.train.best_epoch);
    kv(p + "best_val_acc", run.train.best_val_acc);
    kv(p + "test_acc", run.test.accuracy);
    kv(p + "checkpoint", run.train.best_checkpoint.string());
    test_sum += run.test.accuracy;
    val_sum += run.train.best_val_acc;
    char line[128];
    std::snprintf(line, sizeof(line), "%llu,%zu,%.6f,%.6f\n", static_cast<unsigned long long>(seed),
                  run.train.best_epoch, run.train.best_val_acc, run.test.accuracy);
    summary += line;
  }
  write_text(cfg.out_dir / "summary.csv", summary);
  const auto n = static_cast<double>(cfg.seeds.size());
  kv("seeds", cfg.seeds.size());
  kv("mean_best_val_acc", val_sum / n);
  kv("mean_test_acc", test_sum / n);
  return kOk;
}

struct LoadedModel {
  PreparedData data;
  std::unique_ptr<Model<float>> model;
};

LoadedModel load_model(const RunConfig& cfg, const fs::path& checkpoint) {
  LoadedModel lm;
  lm.data = prepare_data(cfg);
  lm.model = std::make_unique<Model<float>>(
      model_config(cfg, lm.data.manifest.class_names.size()), cfg.seeds.front());
  auto reg = lm.model->registry();
  load_checkpoint(checkpoint, reg);
  return lm;
}

const FeatureSet& pick_split(const PreparedData& d, const std::string& split) {
  if (split == "test") return d.test;
  if (split == "train") return d.train;
  throw ConfigError("--split must be train or test");
}

int cmd_eval(const RunConfig& cfg, const fs::path& checkpoint, const std::string& split,
             fs::path report_dir) {
  auto lm = load_model(cfg, checkpoint);
  const auto r = evaluate(*lm.model, pick_split(lm.data, split), cfg.train.batch_size);
  if (report_dir.empty()) report_dir = cfg.out_dir / "eval";
  report::confusion_heatmap(r.confusion, lm.data.manifest.class_names, report_dir);
  emit_eval("", r, lm.data.manifest.class_names);
  kv("report_dir", report_dir.string());
  return kOk;
}

int cmd_experts(const RunConfig& cfg, const fs::path& checkpoint, const std::string& split,
                fs::path report_dir) {
  auto lm = load_model(cfg, checkpoint);
  const auto r = evaluate(*lm.model, pick_split(lm.data, split), cfg.train.batch_size);
  if (report_dir.empty()) report_dir = cfg.out_dir / "experts";
  const auto& classes = lm.data.manifest.class_names;
  const auto table = report::assignment_table(r.records, classes, cfg.model.head.num_experts);
  report::expert_heatmap(table, report_dir);
  report::write_expert_dump(report_dir / "experts.csv", r.records, classes);
  kv("accuracy", r.accuracy);
  std::vector<std::size_t> load(cfg.model.head.num_experts, 0);
  for (const auto& rec : r.records) ++load[rec.chosen];
  for (std::size_t j = 0; j < load.size(); ++j) {
    kv("expert_" + std::to_string(j) + ".fraction",
       static_cast<double>(load[j]) / static_cast<double>(r.records.size()));
  }
  if (!cfg.dataset.latent.empty()) {
    kv("ami", report::specialization_score(r.records, load_latent_modes(cfg.dataset.latent)));
  }
  kv("report_dir", report_dir.string());
  return kOk;
}

int cmd_gradcheck(std::size_t seeds, bool with_model, double tolerance) {
  GradSuiteOptions opt;
  opt.seeds.clear();
  for (std::size_t s = 1; s <= seeds; ++s) opt.seeds.push_back(s);
  opt.include_model = with_model;
  opt.tolerance = tolerance;
  std::size_t passed = 0, failed = 0;
  for (const auto& name : gradient_suite_cases(with_model)) {
    double worst = 0.0;
    bool ok = true;
    for (auto seed : opt.seeds) {
      const auto rep = run_gradient_case(name, seed, opt);
      const bool pass = rep.max_rel_err < tolerance;
      std::printf("op=%s seed=%llu max_rel_err=%.3e coords=%zu pass=%d\n", name.c_str(),
                  static_cast<unsigned long long>(seed), rep.max_rel_err, rep.coords, pass ? 1 : 0);
      worst = std::max(worst, rep.max_rel_err);
      ok = ok && pass;
    }
    (ok ? passed : failed) += 1;
    std::printf("op=%s worst=%.3e status=%s\n", name.c_str(), worst, ok ? "PASS" : "FAIL");
  }
  kv("passed", passed);
  kv("failed", failed);
  return failed ? kNumeric : kOk;
}

int cmd_synth(const SyntheticSpec& spec, const fs::path& out) {
  const auto ds = generate_synthetic(spec, out);
  std::size_t train = 0, test = 0;
  for (const auto& e : ds.manifest.entries) {
    (e.split == Split::train ? train : test) += spec.segments_per_source;
  }
  RunConfig cfg;
  cfg.dataset.manifest = "manifest.csv";
  cfg.dataset.latent = "latent.csv";
  cfg.dataset.segments = {spec.segment_s, spec.hop_s};
  cfg.feature.kind = FeatureKind::mel;
  cfg.feature.n_filters = 40;
  cfg.model.head.num_experts = 4;
  cfg.train.epochs = 12;
  cfg.seeds = {spec.seed};
  cfg.out_dir = "runs";
  write_text(out / "config.json", dump_run_config(cfg));
  kv("sources", ds.manifest.entries.size());
  kv("train_segments", train);
  kv("test_segments", test);
  kv("manifest", (out / "manifest.csv").string());
  kv("config", (out / "config.json").string());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("cmoe"));
  if (const char* t = std::getenv("CMOE_THREADS")) {
    const int n = std::atoi(t);
    if (n > 0) omp_set_num_threads(n);
  }

  std::vector<std::string> args(argv + 1, argv + argc);
  Overrides overrides;
  try {
    overrides = take_overrides(args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  }

  CLI::App app{"Expert-routing classifier for ship-radiated noise"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error");

  fs::path config_path;
  fs::path checkpoint;
  fs::path report_dir;
  std::string split = "test";
  auto with_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "run configuration (JSON)");
  };

  auto* extract = app.add_subcommand("extract", "write the per-segment feature cache");
  with_config(extract);
  auto* train = app.add_subcommand("train", "train one model per seed and test the best checkpoint");
  with_config(train);
  auto* eval = app.add_subcommand("eval", "segment-level accuracy and confusion heatmap");
  with_config(eval);
  eval->add_option("--checkpoint", checkpoint)->required();
  eval->add_option("--split", split);
  eval->add_option("--report-dir", report_dir);
  auto* experts = app.add_subcommand("experts", "expert-assignment reports");
  with_config(experts);
  experts->add_option("--checkpoint", checkpoint)->required();
  experts->add_option("--split", split);
  experts->add_option("--report-dir", report_dir);

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  std::size_t gc_seeds = 5;
  bool gc_no_model = false;
  double gc_tol = 1e-5;
  gradcheck->add_option("--seeds", gc_seeds, "number of seeds (1..n)");
  gradcheck->add_flag("--no-model", gc_no_model, "skip the full-model case");
  gradcheck->add_option("--tolerance", gc_tol);

  auto* synth = app.add_subcommand("synth", "generate the synthetic dataset");
  SyntheticSpec spec;
  fs::path synth_out;
  synth->add_option("--out", synth_out)->required();
  synth->add_option("--seed", spec.seed);
  synth->add_option("--classes", spec.num_classes);
  synth->add_option("--modes", spec.modes_per_class);
  synth->add_option("--tones", spec.tones_per_mode);
  synth->add_option("--sample-rate", spec.sample_rate);
  synth->add_option("--segments", spec.segments_per_source, "segments per source");
  synth->add_option("--train-sources", spec.train_sources_per_mode, "per latent mode");
  synth->add_option("--test-sources", spec.test_sources_per_mode, "per latent mode");
  synth->add_option("--snr-db", spec.snr_db);

  std::vector<const char*> cargv{argv[0]};
  for (const auto& a : args) cargv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfig;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (gradcheck->parsed()) return cmd_gradcheck(gc_seeds, !gc_no_model, gc_tol);
    if (synth->parsed()) {
      if (!overrides.empty()) throw ConfigError("synth takes no config overrides");
      return cmd_synth(spec, synth_out);
    }
    const RunConfig cfg = load_run_config(config_path, overrides);
    if (extract->parsed()) return cmd_extract(cfg);
    if (train->parsed()) return cmd_train(cfg);
    if (eval->parsed()) return cmd_eval(cfg, checkpoint, split, report_dir);
    if (experts->parsed()) return cmd_experts(cfg, checkpoint, split, report_dir);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kData;
  }
  return kOk;
}
