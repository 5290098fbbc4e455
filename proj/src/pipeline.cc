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

#include "linefocus/pipeline.h"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <set>
#include <thread>

#include "linefocus/attention_dump.h"
#include "linefocus/error.h"
#include "linefocus/http_backend.h"

namespace linefocus {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::set<std::string> kTopKeys = {
    "dataset", "backend",    "strategy", "highlight", "reduction",
    "classifier", "prompt",  "folds",    "metrics",   "out",
    "parallelism", "max_tokens", "features", "write_vam"};
const std::set<std::string> kBackendKeys = {
    "kind",     "seed",          "d_model",   "num_layers",
    "num_heads", "max_seq",      "calibrate_steps", "calibrate_learning_rate",
    "endpoint", "dump_dir",      "max_in_flight", "tolerance"};
const std::set<std::string> kClassifierKeys = {
    "kind", "hidden", "learning_rate", "epochs", "seed", "clip_norm", "standardize"};
const std::set<std::string> kPromptKeys = {"cue_is_instruction"};
const std::set<std::string> kFoldKeys = {"k", "seed"};
const std::set<std::string> kMetricKeys = {"threshold", "averaging", "bucket_edges"};

void check_keys(const json& doc, const std::set<std::string>& allowed,
                const std::string& where) {
  if (!doc.is_object()) throw Error(ErrorCode::kConfig, where + " must be an object");
  for (const auto& [key, value] : doc.items()) {
    if (!allowed.contains(key)) {
      throw Error(ErrorCode::kConfig, "unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void read_field(const json& doc, const char* key, T& out, const std::string& where) {
  if (!doc.contains(key)) return;
  try {
    out = doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kConfig,
                std::string("bad value for '") + key + "' in " + where);
  }
}

json edge_to_json(double e) { return std::isinf(e) ? json("inf") : json(e); }

double edge_from_json(const json& j) {
  if (j.is_string() && j.get<std::string>() == "inf") return kInf;
  if (j.is_number()) return j.get<double>();
  throw Error(ErrorCode::kConfig, "bucket edges must be numbers or \"inf\"");
}

uint64_t fnv1a(std::string_view text) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string model_file_name(const std::string& language) {
  return "model." + language + ".json";
}

}  // namespace

std::vector<std::string> strategy_names() {
  return {"lova", "lova-c", "lova-a", "lova-v"};
}

void apply_strategy(PipelineConfig& config, std::string_view name) {
  config.highlight = HighlightStrategy::kLineIndex;
  config.reduction = FlattenStrategy::kLayerwise;
  config.classifier.kind = ModelKind::kBiLstm;
  if (name == "lova-c") {
    config.highlight = HighlightStrategy::kMarkerComment;
  } else if (name == "lova-a") {
    config.reduction = FlattenStrategy::kAvgPool;
  } else if (name == "lova-v") {
    config.classifier.kind = ModelKind::kMlp;
  } else if (name != "lova") {
    throw Error(ErrorCode::kConfig, "unknown strategy '" + std::string(name) + "'");
  }
  config.strategy = std::string(name);
}

PipelineConfig config_from_json(const json& doc) {
  check_keys(doc, kTopKeys, "config");
  PipelineConfig c;

  std::string strategy = c.strategy;
  read_field(doc, "strategy", strategy, "config");
  apply_strategy(c, strategy);

  std::string text;
  if (doc.contains("dataset")) {
    read_field(doc, "dataset", text, "config");
    c.dataset = text;
  }
  if (doc.contains("backend")) {
    const json& b = doc.at("backend");
    check_keys(b, kBackendKeys, "backend");
    std::string kind = "toy";
    read_field(b, "kind", kind, "backend");
    c.backend.kind = parse_backend_kind(kind);
    read_field(b, "seed", c.backend.toy.seed, "backend");
    read_field(b, "d_model", c.backend.toy.d_model, "backend");
    read_field(b, "num_layers", c.backend.toy.num_layers, "backend");
    read_field(b, "num_heads", c.backend.toy.num_heads, "backend");
    read_field(b, "max_seq", c.backend.toy.max_seq, "backend");
    read_field(b, "calibrate_steps", c.backend.calibrate_steps, "backend");
    read_field(b, "calibrate_learning_rate", c.backend.calibrate_learning_rate, "backend");
    read_field(b, "endpoint", c.backend.endpoint, "backend");
    if (b.contains("dump_dir")) {
      read_field(b, "dump_dir", text, "backend");
      c.backend.dump_dir = text;
    }
    read_field(b, "max_in_flight", c.backend.max_in_flight, "backend");
    read_field(b, "tolerance", c.backend.tolerance, "backend");
  }
  if (doc.contains("highlight")) {
    read_field(doc, "highlight", text, "config");
    c.highlight = parse_highlight_strategy(text);
  }
  if (doc.contains("reduction")) {
    read_field(doc, "reduction", text, "config");
    c.reduction = parse_flatten_strategy(text);
  }
  if (doc.contains("classifier")) {
    const json& m = doc.at("classifier");
    check_keys(m, kClassifierKeys, "classifier");
    if (m.contains("kind")) {
      read_field(m, "kind", text, "classifier");
      c.classifier.kind = parse_model_kind(text);
    }
    read_field(m, "hidden", c.classifier.hidden, "classifier");
    read_field(m, "learning_rate", c.classifier.learning_rate, "classifier");
    read_field(m, "epochs", c.classifier.epochs, "classifier");
    read_field(m, "seed", c.classifier.seed, "classifier");
    read_field(m, "clip_norm", c.classifier.clip_norm, "classifier");
    read_field(m, "standardize", c.classifier.standardize, "classifier");
  }
  if (doc.contains("prompt")) {
    check_keys(doc.at("prompt"), kPromptKeys, "prompt");
    read_field(doc.at("prompt"), "cue_is_instruction", c.prompt.cue_is_instruction,
               "prompt");
  }
  if (doc.contains("folds")) {
    check_keys(doc.at("folds"), kFoldKeys, "folds");
    read_field(doc.at("folds"), "k", c.folds, "folds");
    read_field(doc.at("folds"), "seed", c.fold_seed, "folds");
  }
  if (doc.contains("metrics")) {
    const json& m = doc.at("metrics");
    check_keys(m, kMetricKeys, "metrics");
    read_field(m, "threshold", c.threshold, "metrics");
    if (m.contains("averaging")) {
      read_field(m, "averaging", text, "metrics");
      c.averaging = parse_averaging(text);
    }
    if (m.contains("bucket_edges")) {
      if (!m.at("bucket_edges").is_array()) {
        throw Error(ErrorCode::kConfig, "bucket_edges must be an array");
      }
      c.bucket_edges.clear();
      for (const auto& e : m.at("bucket_edges")) c.bucket_edges.push_back(edge_from_json(e));
    }
  }
  if (doc.contains("out")) {
    read_field(doc, "out", text, "config");
    c.out = text;
  }
  read_field(doc, "parallelism", c.parallelism, "config");
  read_field(doc, "max_tokens", c.max_tokens, "config");
  if (doc.contains("features")) {
    read_field(doc, "features", text, "config");
    c.features = text;
  }
  read_field(doc, "write_vam", c.write_vam, "config");
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfig, "cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, path.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

json config_to_json(const PipelineConfig& c) {
  json edges = json::array();
  for (double e : c.bucket_edges) edges.push_back(edge_to_json(e));
  return json{
      {"dataset", c.dataset.string()},
      {"backend",
       {{"kind", backend_kind_name(c.backend.kind)},
        {"seed", c.backend.toy.seed},
        {"d_model", c.backend.toy.d_model},
        {"num_layers", c.backend.toy.num_layers},
        {"num_heads", c.backend.toy.num_heads},
        {"max_seq", c.backend.toy.max_seq},
        {"calibrate_steps", c.backend.calibrate_steps},
        {"calibrate_learning_rate", c.backend.calibrate_learning_rate},
        {"endpoint", c.backend.endpoint},
        {"dump_dir", c.backend.dump_dir.string()},
        {"max_in_flight", c.backend.max_in_flight},
        {"tolerance", c.backend.tolerance}}},
      {"strategy", c.strategy},
      {"highlight", highlight_strategy_name(c.highlight)},
      {"reduction", flatten_strategy_name(c.reduction)},
      {"classifier",
       {{"kind", model_kind_name(c.classifier.kind)},
        {"hidden", c.classifier.hidden},
        {"learning_rate", c.classifier.learning_rate},
        {"epochs", c.classifier.epochs},
        {"seed", c.classifier.seed},
        {"clip_norm", c.classifier.clip_norm},
        {"standardize", c.classifier.standardize}}},
      {"prompt", {{"cue_is_instruction", c.prompt.cue_is_instruction}}},
      {"folds", {{"k", c.folds}, {"seed", c.fold_seed}}},
      {"metrics",
       {{"threshold", c.threshold},
        {"averaging", averaging_name(c.averaging)},
        {"bucket_edges", edges}}},
      {"out", c.out.string()},
      {"parallelism", c.parallelism},
      {"max_tokens", c.max_tokens},
      {"features", c.features.string()},
      {"write_vam", c.write_vam}};
}

std::string config_hash(const PipelineConfig& config) {
  // Output location and thread count do not change results.
  json doc = config_to_json(config);
  doc.erase("out");
  doc.erase("parallelism");
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(doc.dump())));
  return buf;
}

void validate_config(const PipelineConfig& c) {
  if (c.dataset.empty()) throw Error(ErrorCode::kConfig, "no dataset given");
  if (!fs::exists(c.dataset)) {
    throw Error(ErrorCode::kIo, "dataset not found: " + c.dataset.string());
  }
  if (!c.features.empty() && !fs::exists(c.features)) {
    throw Error(ErrorCode::kIo, "features not found: " + c.features.string());
  }
  switch (c.backend.kind) {
    case BackendKind::kToy: {
      const ToyConfig& t = c.backend.toy;
      if (t.d_model < 1 || t.num_layers < 1 || t.num_heads < 1 ||
          t.d_model % t.num_heads != 0 || t.max_seq < 2) {
        throw Error(ErrorCode::kConfig,
                    "toy backend needs positive dims with d_model divisible by "
                    "num_heads and max_seq >= 2");
      }
      if (c.backend.calibrate_steps < 0) {
        throw Error(ErrorCode::kConfig, "calibrate_steps must be >= 0");
      }
      break;
    }
    case BackendKind::kDump:
      if (c.backend.dump_dir.empty() || !fs::is_directory(c.backend.dump_dir)) {
        throw Error(ErrorCode::kConfig,
                    "dump backend needs an existing dump_dir, got '" +
                        c.backend.dump_dir.string() + "'");
      }
      break;
    case BackendKind::kHttp:
      if (c.backend.endpoint.empty()) {
        throw Error(ErrorCode::kConfig, std::string("http backend needs an endpoint (or ") +
                                            kEndpointEnvVar + ")");
      }
      break;
  }
  if (c.folds < 2) throw Error(ErrorCode::kConfig, "folds.k must be >= 2");
  if (c.classifier.hidden < 1 || c.classifier.epochs < 0 ||
      !(c.classifier.learning_rate > 0.0)) {
    throw Error(ErrorCode::kConfig,
                "classifier needs hidden >= 1, epochs >= 0, learning_rate > 0");
  }
  if (!(c.threshold >= 0.0 && c.threshold <= 1.0)) {
    throw Error(ErrorCode::kConfig, "threshold must lie in [0, 1]");
  }
  if (c.parallelism < 0) throw Error(ErrorCode::kConfig, "parallelism must be >= 0");
  if (c.max_tokens == 0) throw Error(ErrorCode::kConfig, "max_tokens must be > 0");
}

int resolved_parallelism(int requested) {
  if (requested > 0) return requested;
  const unsigned cores = std::thread::hardware_concurrency();
  return cores == 0 ? 1 : static_cast<int>(cores);
}

std::unique_ptr<AttentionBackend> make_backend(
    const BackendConfig& config, std::span<const CodeSample> calibration) {
  switch (config.kind) {
    case BackendKind::kToy: {
      ToyModelParams params = ToyModelParams::initialize(config.toy);
      if (config.calibrate_steps > 0) {
        std::vector<std::string> corpus;
        for (const auto& s : calibration) corpus.push_back(s.source);
        params = toy_calibrate(params, corpus, config.calibrate_steps,
                               config.calibrate_learning_rate)
                     .params;
      }
      return std::make_unique<ToyBackend>(std::move(params));
    }
    case BackendKind::kDump:
      return std::make_unique<DumpBackend>(config.dump_dir);
    case BackendKind::kHttp: {
      HttpBackendOptions options;
      options.endpoint = config.endpoint;
      options.max_in_flight = config.max_in_flight;
      options.row_sum_tolerance = config.tolerance;
      return std::make_unique<HttpBackend>(options);
    }
  }
  throw Error(ErrorCode::kConfig, "unknown backend kind");
}

std::vector<CodeSample> select_samples(const std::vector<CodeSample>& samples,
                                       const AttentionBackend& backend,
                                       const PipelineConfig& config) {
  const size_t bound = backend.max_tokens();
  const size_t budget = bound > 0 ? std::min(config.max_tokens, bound) : config.max_tokens;
  std::vector<CodeSample> kept = filter_by_token_budget(samples, backend, budget);
  if (bound == 0) return kept;

  std::vector<CodeSample> fits;
  for (auto& s : kept) {
    bool ok = true;
    for (int line = 1; line <= s.loc() && ok; ++line) {
      const PromptLayout layout =
          build_highlighted_prompt(s, line, config.highlight, config.prompt);
      const PromptRequest req{highlighted_prompt_id(s.id, line), layout.text};
      ok = backend.tokenize(req).num_tokens() <= bound;
    }
    if (ok) fits.push_back(std::move(s));
  }
  return fits;
}

json layout_to_json(const std::string& prompt_id, const PromptLayout& layout) {
  json records = json::array();
  for (const auto& r : layout.line_records) {
    records.push_back({{"line", r.display_line},
                       {"start", r.start},
                       {"end", r.end},
                       {"kind", line_kind_name(r.kind)}});
  }
  return json{{"id", prompt_id},
              {"text", layout.text},
              {"line_records", records},
              {"code_line_map", layout.code_line_map},
              {"instruction_lines", layout.instruction_lines},
              {"highlighted_code_line", layout.highlighted_code_line
                                            ? json(*layout.highlighted_code_line)
                                            : json(nullptr)}};
}

FeatureOptions feature_options(const PipelineConfig& config) {
  FeatureOptions o;
  o.highlight = config.highlight;
  o.reduction = config.reduction;
  o.prompt = config.prompt;
  o.parallelism = resolved_parallelism(config.parallelism);
  return o;
}

SampleFeatures extract_sample_features(const CodeSample& sample,
                                       const AttentionBackend& backend,
                                       const FeatureOptions& options) {
  const PromptLayout base = build_base_prompt(sample, options.prompt);
  const Prefill base_fill = backend.prefill({base_prompt_id(sample.id), base.text},
                                            Granularity::kLastTokenHeadSummed);
  const LayerwiseAttnMat base_mat = layerwise_attn_mat(
      base_fill.attention, map_tokens_to_lines(base, base_fill.tokens.offsets));

  const int n = sample.loc();
  SampleFeatures out;
  out.vams.resize(n);
  std::vector<std::exception_ptr> errors(n);

#pragma omp parallel for num_threads(std::max(options.parallelism, 1)) schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    try {
      const int line = i + 1;
      const PromptLayout layout =
          build_highlighted_prompt(sample, line, options.highlight, options.prompt);
      const Prefill fill =
          backend.prefill({highlighted_prompt_id(sample.id, line), layout.text},
                          Granularity::kLastTokenHeadSummed);
      const LayerwiseAttnMat mat = layerwise_attn_mat(
          fill.attention, map_tokens_to_lines(layout, fill.tokens.offsets));
      out.vams[i] = vuln_attn_mat(diff_attn_mat(mat, base_mat), layout.instruction_lines,
                                  layout.prompt_line_of(line));
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  FeatureSequence& seq = out.sequence;
  seq.sample_id = sample.id;
  seq.language = sample.language;
  std::vector<int> labels(n, 0);
  for (int i = 0; i < n; ++i) {
    seq.features.push_back(flatten(out.vams[i], options.reduction));
    labels[i] = sample.vuln_lines.contains(i + 1) ? 1 : 0;
  }
  seq.labels = std::move(labels);
  return out;
}

std::vector<FeatureSequence> extract_features(std::span<const CodeSample> samples,
                                              const AttentionBackend& backend,
                                              const FeatureOptions& options,
                                              const std::optional<fs::path>& vam_dir) {
  if (vam_dir) fs::create_directories(*vam_dir);
  std::vector<FeatureSequence> all;
  all.reserve(samples.size());
  for (const auto& sample : samples) {
    SampleFeatures f = extract_sample_features(sample, backend, options);
    if (vam_dir) {
      for (size_t i = 0; i < f.vams.size(); ++i) {
        const std::string id = highlighted_prompt_id(sample.id, static_cast<int>(i) + 1);
        save_matrix(f.vams[i].values, *vam_dir / (id + ".vam.json"));
      }
    }
    all.push_back(std::move(f.sequence));
  }
  return all;
}

json feature_to_json(const FeatureSequence& seq) {
  json doc{{"id", seq.sample_id}, {"language", seq.language}, {"features", seq.features}};
  if (seq.labels) doc["labels"] = *seq.labels;
  return doc;
}

FeatureSequence feature_from_json(const json& doc) {
  FeatureSequence seq;
  try {
    seq.sample_id = doc.at("id").get<std::string>();
    seq.language = doc.value("language", std::string());
    seq.features = doc.at("features").get<std::vector<std::vector<double>>>();
    if (doc.contains("labels")) seq.labels = doc.at("labels").get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedRecord, e.what());
  }
  return seq;
}

void save_features(std::span<const FeatureSequence> features, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  for (const auto& seq : features) out << feature_to_json(seq).dump() << '\n';
}

std::vector<FeatureSequence> load_features(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<FeatureSequence> all;
  std::string text;
  size_t line_number = 0;
  while (std::getline(in, text)) {
    ++line_number;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      all.push_back(feature_from_json(json::parse(text)));
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kMalformedRecord,
                  path.string() + " line " + std::to_string(line_number) + ": " +
                      e.what());
    }
  }
  return all;
}

std::vector<FeatureSequence> align_features(std::span<const CodeSample> samples,
                                            std::span<const FeatureSequence> features) {
  std::map<std::string, const FeatureSequence*> by_id;
  for (const auto& f : features) by_id[f.sample_id] = &f;
  std::vector<FeatureSequence> aligned;
  aligned.reserve(samples.size());
  for (const auto& s : samples) {
    auto it = by_id.find(s.id);
    if (it == by_id.end()) {
      throw Error(ErrorCode::kMalformedRecord, "no features for '" + s.id + "'");
    }
    FeatureSequence seq = *it->second;
    if (seq.length() != static_cast<size_t>(s.loc())) {
      throw Error(ErrorCode::kMalformedRecord,
                  "'" + s.id + "' has " + std::to_string(seq.length()) +
                      " feature vectors for " + std::to_string(s.loc()) + " lines");
    }
    seq.language = s.language;
    std::vector<int> labels(s.loc(), 0);
    for (int line : s.vuln_lines) labels[line - 1] = 1;
    seq.labels = std::move(labels);
    aligned.push_back(std::move(seq));
  }
  return aligned;
}

ModelSet train_per_language(std::span<const FeatureSequence> data,
                            const TrainConfig& config) {
  std::map<std::string, std::vector<FeatureSequence>> groups;
  for (const auto& seq : data) groups[seq.language].push_back(seq);
  ModelSet models;
  for (const auto& [language, group] : groups) {
    models.emplace(language, train(group, config));
  }
  return models;
}

void save_models(const ModelSet& models, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& [language, model] : models) {
    save_model(model, dir / model_file_name(language));
  }
}

ModelSet load_models(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::kIo, "no model directory " + dir.string());
  ModelSet models;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    const std::string prefix = "model.", suffix = ".json";
    if (!name.starts_with(prefix) || !name.ends_with(suffix) ||
        name.size() <= prefix.size() + suffix.size()) {
      continue;
    }
    const std::string language =
        name.substr(prefix.size(), name.size() - prefix.size() - suffix.size());
    models.emplace(language, load_model(entry.path()));
  }
  if (models.empty()) throw Error(ErrorCode::kIo, "no models in " + dir.string());
  return models;
}

std::vector<SuspicionReport> localize(std::span<const FeatureSequence> data,
                                      const ModelSet& models, double threshold) {
  std::vector<SuspicionReport> reports;
  reports.reserve(data.size());
  for (const auto& seq : data) {
    auto it = models.find(seq.language);
    if (it == models.end()) {
      throw Error(ErrorCode::kEmptyTrainingSet,
                  "no model for language '" + seq.language + "' ('" + seq.sample_id +
                      "')");
    }
    reports.push_back(classifier_report(seq.sample_id, score(it->second, seq), threshold));
  }
  return reports;
}

std::vector<FeatureSequence> fold_subset(std::span<const FeatureSequence> data,
                                         const FoldAssignment& folds, int fold,
                                         bool held_out) {
  std::vector<FeatureSequence> subset;
  for (const auto& seq : data) {
    auto it = folds.assignment.find(seq.sample_id);
    if (it == folds.assignment.end()) {
      throw Error(ErrorCode::kMalformedRecord, "'" + seq.sample_id + "' has no fold");
    }
    if ((it->second == fold) == held_out) subset.push_back(seq);
  }
  return subset;
}

CrossValidation cross_validate(std::span<const CodeSample> samples,
                               std::span<const FeatureSequence> features,
                               const FoldAssignment& folds,
                               const PipelineConfig& config) {
  const TruthMap truth = truth_from(samples);
  CrossValidation cv;
  std::map<std::string, SuspicionReport> by_id;
  for (int f = 0; f < folds.k; ++f) {
    const auto train_set = fold_subset(features, folds, f, false);
    const auto test_set = fold_subset(features, folds, f, true);
    FoldResult result;
    result.fold = f;
    if (!test_set.empty()) {
      const ModelSet models = train_per_language(train_set, config.classifier);
      result.reports = localize(test_set, models, config.threshold);
    }
    result.metrics = evaluate(result.reports, truth, config.averaging);
    for (const auto& r : result.reports) by_id.emplace(r.sample_id, r);
    cv.folds.push_back(std::move(result));
  }
  for (const auto& s : samples) {
    auto it = by_id.find(s.id);
    if (it != by_id.end()) cv.reports.push_back(it->second);
  }
  cv.metrics = evaluate(cv.reports, truth, config.averaging);
  cv.buckets = loc_bucket_accuracy(samples, cv.reports, truth, config.bucket_edges);
  return cv;
}

json make_manifest(const PipelineConfig& config, const BackendDescriptor& descriptor,
                   size_t samples_loaded, size_t samples_used) {
  return json{
      {"version", kVersion},
      {"config_hash", config_hash(config)},
      {"config", config_to_json(config)},
      {"strategy", config.strategy},
      {"highlight", highlight_strategy_name(config.highlight)},
      {"reduction", flatten_strategy_name(config.reduction)},
      {"classifier", model_kind_name(config.classifier.kind)},
      {"seeds",
       {{"backend", config.backend.toy.seed},
        {"folds", config.fold_seed},
        {"classifier", config.classifier.seed}}},
      {"backend",
       {{"kind", backend_kind_name(descriptor.kind)},
        {"num_layers", descriptor.num_layers},
        {"num_heads", descriptor.num_heads}}},
      {"samples", {{"loaded", samples_loaded}, {"used", samples_used}}},
      {"libraries",
       {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                      std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION)},
        {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
        {"openmp", _OPENMP}}}};
}

void write_text(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& doc) {
  write_text(path, doc.dump(2) + "\n");
}

void write_evaluation(const fs::path& dir, const MetricReport& metrics,
                      const LocBucketReport& buckets) {
  fs::create_directories(dir);
  write_json(dir / "metrics.json", metrics_to_json(metrics));
  write_text(dir / "metrics.txt", metrics_table(metrics));
  write_text(dir / "loc_buckets.csv", loc_buckets_csv(buckets));
}

CrossValidation run_pipeline(const PipelineConfig& config) {
  validate_config(config);
  fs::create_directories(config.out);

  const std::vector<CodeSample> samples = load_dataset(config.dataset);
  const auto backend = make_backend(config.backend, samples);
  const std::vector<CodeSample> used = select_samples(samples, *backend, config);
  if (used.size() < samples.size()) {
    std::cerr << "linefocus: " << samples.size() - used.size()
              << " samples over the token budget were skipped\n";
  }
  const FoldAssignment folds = make_folds(used, config.folds, config.fold_seed);

  std::vector<FeatureSequence> features;
  if (config.features.empty()) {
    std::optional<fs::path> vam_dir;
    if (config.write_vam) vam_dir = config.out / "vam";
    features = extract_features(used, *backend, feature_options(config), vam_dir);
  } else {
    features = align_features(used, load_features(config.features));
  }
  save_features(features, config.out / "features.jsonl");
  save_folds(folds, config.out / "folds.json");

  CrossValidation cv = cross_validate(used, features, folds, config);
  for (const auto& fold : cv.folds) {
    const fs::path dir = config.out / ("fold_" + std::to_string(fold.fold));
    fs::create_directories(dir);
    save_reports(fold.reports, dir / "reports.jsonl");
    write_json(dir / "metrics.json", metrics_to_json(fold.metrics));
  }
  save_reports(cv.reports, config.out / "reports.jsonl");
  write_evaluation(config.out, cv.metrics, cv.buckets);
  write_json(config.out / "manifest.json",
             make_manifest(config, backend->descriptor(), samples.size(), used.size()));
  return cv;
}

}  // namespace linefocus
