// Copyright 2026 The linefocus Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "linefocus/cli.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "linefocus/http_backend.h"
#include "linefocus/pipeline.h"

namespace linefocus {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Flags shared by the config-driven subcommands.
struct CommonFlags {
  std::string config;
  std::string backend;
  std::string strategy;
  int folds = 0;
  std::optional<uint64_t> seed;
  std::string out;
  std::string dataset;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Pipeline config JSON");
  cmd->add_option("--backend", f.backend, "toy, dump or http")
      ->check(CLI::IsMember({"toy", "dump", "http"}));
  cmd->add_option("--strategy", f.strategy, "lova, lova-c, lova-a or lova-v")
      ->check(CLI::IsMember(strategy_names()));
  cmd->add_option("--folds", f.folds, "Number of cross-validation folds");
  cmd->add_option("--seed", f.seed, "Seed for the toy model, folds and classifier");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--dataset", f.dataset, "Dataset JSONL");
}

PipelineConfig resolve_config(const CommonFlags& f) {
  PipelineConfig c = f.config.empty() ? PipelineConfig{} : load_config(f.config);
  if (!f.backend.empty()) c.backend.kind = parse_backend_kind(f.backend);
  if (!f.strategy.empty()) apply_strategy(c, f.strategy);
  if (f.folds != 0) c.folds = f.folds;
  if (f.seed) {
    c.backend.toy.seed = *f.seed;
    c.fold_seed = *f.seed;
    c.classifier.seed = *f.seed;
  }
  if (!f.out.empty()) c.out = f.out;
  if (!f.dataset.empty()) c.dataset = f.dataset;
  if (const char* endpoint = std::getenv(kEndpointEnvVar); endpoint && *endpoint) {
    c.backend.endpoint = endpoint;
  }
  return c;
}

std::vector<CodeSample> load_for(const PipelineConfig& c) {
  if (c.dataset.empty()) throw Error(ErrorCode::kConfig, "no dataset given");
  return load_dataset(c.dataset);
}

const CodeSample& find_sample(const std::vector<CodeSample>& samples,
                              const std::string& id) {
  for (const auto& s : samples) {
    if (s.id == id) return s;
  }
  throw Error(ErrorCode::kMalformedRecord, "no sample '" + id + "'");
}

std::vector<FeatureSequence> restrict_to_fold(std::vector<FeatureSequence> data,
                                              const std::string& folds_file,
                                              std::optional<int> holdout,
                                              bool held_out) {
  if (!holdout) return data;
  if (folds_file.empty()) throw Error(ErrorCode::kConfig, "--holdout needs --folds-file");
  const FoldAssignment folds = load_folds(folds_file);
  if (*holdout < 0 || *holdout >= folds.k) {
    throw Error(ErrorCode::kConfig, "--holdout outside [0, k)");
  }
  return fold_subset(data, folds, *holdout, held_out);
}

int cmd_run(const CommonFlags& flags, std::ostream& out) {
  const PipelineConfig c = resolve_config(flags);
  const CrossValidation cv = run_pipeline(c);
  out << metrics_table(cv.metrics);
  return kExitOk;
}

int cmd_ablate(const CommonFlags& flags, std::ostream& out) {
  const PipelineConfig base = resolve_config(flags);
  if (!base.features.empty()) {
    throw Error(ErrorCode::kConfig, "ablate extracts features per strategy; drop 'features'");
  }
  json summary = json::object();
  std::ostringstream table;
  for (const auto& name : strategy_names()) {
    PipelineConfig c = base;
    apply_strategy(c, name);
    c.out = base.out / name;
    const CrossValidation cv = run_pipeline(c);
    summary[name] = metrics_to_json(cv.metrics);
    table << name << '\n' << metrics_table(cv.metrics);
  }
  write_json(base.out / "ablation.json", summary);
  write_text(base.out / "ablation.txt", table.str());
  out << table.str();
  return kExitOk;
}

int cmd_prompt(const CommonFlags& flags, const std::string& sample_id,
               std::optional<int> line, std::ostream& out) {
  const PipelineConfig c = resolve_config(flags);
  const std::vector<CodeSample> samples = load_for(c);
  std::vector<const CodeSample*> chosen;
  if (sample_id.empty()) {
    for (const auto& s : samples) chosen.push_back(&s);
  } else {
    chosen.push_back(&find_sample(samples, sample_id));
  }
  fs::create_directories(c.out / "layouts");
  std::ofstream prompts(c.out / "prompts.jsonl", std::ios::binary);
  if (!prompts) throw Error(ErrorCode::kIo, "cannot write prompts.jsonl");
  size_t count = 0;
  auto emit = [&](const std::string& id, const PromptLayout& layout) {
    prompts << json{{"id", id}, {"text", layout.text}}.dump() << '\n';
    write_json(c.out / "layouts" / (id + ".layout.json"), layout_to_json(id, layout));
    ++count;
  };
  for (const CodeSample* s : chosen) {
    if (!line || *line == 0) emit(base_prompt_id(s->id), build_base_prompt(*s, c.prompt));
    for (int i = 1; i <= s->loc(); ++i) {
      if (line && *line != i) continue;
      emit(highlighted_prompt_id(s->id, i),
           build_highlighted_prompt(*s, i, c.highlight, c.prompt));
    }
  }
  out << count << " prompts written to " << (c.out / "prompts.jsonl").string() << '\n';
  return kExitOk;
}

int cmd_reduce(const CommonFlags& flags, const std::string& sample_id,
               std::ostream& out) {
  PipelineConfig c = resolve_config(flags);
  validate_config(c);
  std::vector<CodeSample> samples = load_dataset(c.dataset);
  const auto backend = make_backend(c.backend, samples);
  if (!sample_id.empty()) samples = {find_sample(samples, sample_id)};
  std::vector<CodeSample> used = select_samples(samples, *backend, c);
  if (used.empty()) {
    throw Error(ErrorCode::kInsufficientSamples, "no sample fits the token budget");
  }
  fs::create_directories(c.out);
  const auto features =
      extract_features(used, *backend, feature_options(c), c.out / "vam");
  save_features(features, c.out / "features.jsonl");
  if (sample_id.empty()) save_folds(make_folds(used, c.folds, c.fold_seed), c.out / "folds.json");
  out << features.size() << " samples reduced into " << c.out.string() << '\n';
  return kExitOk;
}

int cmd_train(const CommonFlags& flags, const std::string& features_path,
              const std::string& folds_file, std::optional<int> holdout,
              std::ostream& out) {
  const PipelineConfig c = resolve_config(flags);
  auto data = restrict_to_fold(load_features(features_path), folds_file, holdout, false);
  const ModelSet models = train_per_language(data, c.classifier);
  save_models(models, c.out);
  out << models.size() << " models written to " << c.out.string() << '\n';
  return kExitOk;
}

int cmd_localize(const CommonFlags& flags, const std::string& features_path,
                 const std::string& models_dir, const std::string& folds_file,
                 std::optional<int> holdout, std::ostream& out) {
  const PipelineConfig c = resolve_config(flags);
  auto data = restrict_to_fold(load_features(features_path), folds_file, holdout, true);
  const auto reports = localize(data, load_models(models_dir), c.threshold);
  fs::create_directories(c.out);
  save_reports(reports, c.out / "reports.jsonl");
  out << reports.size() << " reports written to " << (c.out / "reports.jsonl").string()
      << '\n';
  return kExitOk;
}

int cmd_eval(const CommonFlags& flags, const std::string& reports_path,
             std::ostream& out) {
  const PipelineConfig c = resolve_config(flags);
  const auto samples = load_for(c);
  const auto reports = load_reports(reports_path);
  const TruthMap truth = truth_from(samples);
  const MetricReport metrics = evaluate(reports, truth, c.averaging);
  const LocBucketReport buckets = loc_bucket_accuracy(samples, reports, truth, c.bucket_edges);
  write_evaluation(c.out, metrics, buckets);
  out << metrics_table(metrics);
  return kExitOk;
}

int cmd_baseline(const CommonFlags& flags, const std::string& runs_path,
                 std::ostream& out) {
  const PipelineConfig c = resolve_config(flags);
  const auto samples = load_for(c);
  std::map<std::string, int> loc_of;
  for (const auto& s : samples) loc_of[s.id] = s.loc();
  std::vector<SuspicionReport> reports;
  for (const auto& runs : load_run_outputs(runs_path)) {
    auto it = loc_of.find(runs.sample_id);
    if (it == loc_of.end()) {
      throw Error(ErrorCode::kMalformedRecord, "runs for unknown sample '" + runs.sample_id + "'");
    }
    reports.push_back(baseline_report(runs, it->second, c.threshold));
  }
  fs::create_directories(c.out);
  save_reports(reports, c.out / "reports.jsonl");
  out << reports.size() << " baseline reports written to "
      << (c.out / "reports.jsonl").string() << '\n';
  return kExitOk;
}

}  // namespace

int exit_code_for(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kConfig: return kExitConfig;
    case ErrorCategory::kBackend: return kExitBackend;
    case ErrorCategory::kData: return kExitData;
  }
  return kExitUnexpected;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Line-level vulnerability localization from attention shifts"};
  app.name("linefocus");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("linefocus ") + kVersion);

  CommonFlags flags;
  std::string sample_id, features_path, models_dir, folds_file, reports_path, runs_path;
  std::optional<int> line, holdout;

  auto* run = app.add_subcommand("run", "Extract features, cross-validate, evaluate");
  add_common(run, flags);
  auto* ablate = app.add_subcommand("ablate", "Run every strategy preset");
  add_common(ablate, flags);
  auto* prompt = app.add_subcommand("prompt", "Write prompts.jsonl and layout JSON");
  add_common(prompt, flags);
  prompt->add_option("--sample", sample_id, "Only this sample");
  prompt->add_option("--line", line, "Only this highlighted line; 0 for the base prompt");
  auto* reduce = app.add_subcommand("reduce", "Write .vam.json files and features.jsonl");
  add_common(reduce, flags);
  reduce->add_option("--sample", sample_id, "Only this sample");
  auto* train_cmd = app.add_subcommand("train", "Train one model per language");
  add_common(train_cmd, flags);
  train_cmd->add_option("--features", features_path, "features.jsonl")->required();
  train_cmd->add_option("--folds-file", folds_file, "folds.json");
  train_cmd->add_option("--holdout", holdout, "Leave this fold out");
  auto* localize_cmd = app.add_subcommand("localize", "Score features into reports");
  add_common(localize_cmd, flags);
  localize_cmd->add_option("--features", features_path, "features.jsonl")->required();
  localize_cmd->add_option("--models", models_dir, "Model directory")->required();
  localize_cmd->add_option("--folds-file", folds_file, "folds.json");
  localize_cmd->add_option("--holdout", holdout, "Score only this fold");
  auto* eval = app.add_subcommand("eval", "Compute metrics for reports");
  add_common(eval, flags);
  eval->add_option("--reports", reports_path, "reports.jsonl")->required();
  auto* baseline = app.add_subcommand("baseline", "Score repeated model answers");
  add_common(baseline, flags);
  baseline->add_option("--runs", runs_path, "Run outputs JSONL")->required();

  std::vector<std::string> argv_storage{"linefocus"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(flags, out);
    if (*ablate) return cmd_ablate(flags, out);
    if (*prompt) return cmd_prompt(flags, sample_id, line, out);
    if (*reduce) return cmd_reduce(flags, sample_id, out);
    if (*train_cmd) return cmd_train(flags, features_path, folds_file, holdout, out);
    if (*localize_cmd) {
      return cmd_localize(flags, features_path, models_dir, folds_file, holdout, out);
    }
    if (*eval) return cmd_eval(flags, reports_path, out);
    if (*baseline) return cmd_baseline(flags, runs_path, out);
  } catch (const Error& e) {
    err << "linefocus: " << e.what() << '\n';
    return exit_code_for(e.category());
  } catch (const fs::filesystem_error& e) {
    err << "linefocus: Io: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "linefocus: " << e.what() << '\n';
    return kExitUnexpected;
  }
  return kExitUnexpected;
}

}  // namespace linefocus
