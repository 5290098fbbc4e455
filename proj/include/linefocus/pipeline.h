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

// End-to-end orchestration: configuration, feature extraction, per-language
// training, cross-validation and the artifacts each stage leaves on disk.
//
// Output directory of a full run:
//   manifest.json        config hash, seeds, backend descriptor, versions
//   folds.json           sample -> fold
//   features.jsonl       one FeatureSequence per sample
//   fold_<f>/reports.jsonl, fold_<f>/metrics.json
//   reports.jsonl        all held-out reports, dataset order
//   metrics.json, metrics.txt, loc_buckets.csv

#ifndef LINEFOCUS_PIPELINE_H_
#define LINEFOCUS_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "linefocus/backend.h"
#include "linefocus/classifier.h"
#include "linefocus/corpus.h"
#include "linefocus/evaluation.h"
#include "linefocus/prompting.h"
#include "linefocus/reduction.h"
#include "linefocus/scoring.h"
#include "linefocus/toy_transformer.h"

namespace linefocus {

inline constexpr char kVersion[] = "0.1.0";

struct BackendConfig {
  BackendKind kind = BackendKind::kToy;
  ToyConfig toy;
  int calibrate_steps = 0;
  double calibrate_learning_rate = 0.05;
  std::string endpoint;
  std::filesystem::path dump_dir;
  int max_in_flight = 4;
  double tolerance = 1e-2;
};

struct PipelineConfig {
  std::filesystem::path dataset;
  BackendConfig backend;
  std::string strategy = "lova";
  HighlightStrategy highlight = HighlightStrategy::kLineIndex;
  FlattenStrategy reduction = FlattenStrategy::kLayerwise;
  TrainConfig classifier;
  PromptOptions prompt;
  int folds = 5;
  uint64_t fold_seed = 0;
  double threshold = kDefaultThreshold;
  Averaging averaging = Averaging::kMicro;
  std::vector<double> bucket_edges = default_bucket_edges();
  std::filesystem::path out = "out";
  int parallelism = 0;  // 0: logical core count
  size_t max_tokens = 4000;
  std::filesystem::path features;  // precomputed features.jsonl, optional
  bool write_vam = false;
};

// lova, lova-c (marker comment), lova-a (avg pool), lova-v (mlp).
void apply_strategy(PipelineConfig& config, std::string_view name);
std::vector<std::string> strategy_names();

// Fields absent from the document keep their defaults; "strategy" is applied
// before the explicit highlight/reduction/classifier fields. Throws
// Error(kConfig) on unknown keys or bad values.
PipelineConfig config_from_json(const nlohmann::json& doc);
PipelineConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const PipelineConfig& config);
std::string config_hash(const PipelineConfig& config);  // FNV-1a, 16 hex digits

// Referenced paths exist and values are in range. Throws Error.
void validate_config(const PipelineConfig& config);

int resolved_parallelism(int requested);

// Toy backends are calibrated on the given sources when calibrate_steps > 0.
std::unique_ptr<AttentionBackend> make_backend(
    const BackendConfig& config, std::span<const CodeSample> calibration);

// Drops samples over the base-prompt budget, then, for bounded backends,
// samples whose highlighted prompts would not fit.
std::vector<CodeSample> select_samples(const std::vector<CodeSample>& samples,
                                       const AttentionBackend& backend,
                                       const PipelineConfig& config);

// {"id", "text", "line_records", "code_line_map", "instruction_lines",
//  "highlighted_code_line"}; line records carry 1-based "line", byte
// "start"/"end" and "kind".
nlohmann::json layout_to_json(const std::string& prompt_id,
                              const PromptLayout& layout);

struct FeatureOptions {
  HighlightStrategy highlight = HighlightStrategy::kLineIndex;
  FlattenStrategy reduction = FlattenStrategy::kLayerwise;
  PromptOptions prompt;
  int parallelism = 1;
};

FeatureOptions feature_options(const PipelineConfig& config);

struct SampleFeatures {
  FeatureSequence sequence;
  std::vector<VulnAttnMat> vams;  // [code line - 1]
};

// One base prefill plus one prefill per highlighted line; lines run in
// parallel and results land in line order.
SampleFeatures extract_sample_features(const CodeSample& sample,
                                       const AttentionBackend& backend,
                                       const FeatureOptions& options);

// When vam_dir is set, writes <vam_dir>/<prompt id>.vam.json per line.
std::vector<FeatureSequence> extract_features(
    std::span<const CodeSample> samples, const AttentionBackend& backend,
    const FeatureOptions& options,
    const std::optional<std::filesystem::path>& vam_dir = std::nullopt);

nlohmann::json feature_to_json(const FeatureSequence& seq);
FeatureSequence feature_from_json(const nlohmann::json& doc);
void save_features(std::span<const FeatureSequence> features,
                   const std::filesystem::path& path);
std::vector<FeatureSequence> load_features(const std::filesystem::path& path);

// Features for exactly the given samples, in sample order, with labels taken
// from the samples. Throws kMalformedRecord when one is absent or its length
// differs from the sample's line count.
std::vector<FeatureSequence> align_features(
    std::span<const CodeSample> samples,
    std::span<const FeatureSequence> features);

using ModelSet = std::map<std::string, SequenceModel>;  // language -> model

ModelSet train_per_language(std::span<const FeatureSequence> data,
                            const TrainConfig& config);
void save_models(const ModelSet& models, const std::filesystem::path& dir);
ModelSet load_models(const std::filesystem::path& dir);

// Throws kEmptyTrainingSet when a sequence's language has no model.
std::vector<SuspicionReport> localize(std::span<const FeatureSequence> data,
                                      const ModelSet& models, double threshold);

struct FoldResult {
  int fold = 0;
  std::vector<SuspicionReport> reports;
  MetricReport metrics;
};

struct CrossValidation {
  std::vector<FoldResult> folds;
  std::vector<SuspicionReport> reports;  // sample order
  MetricReport metrics;
  LocBucketReport buckets;
};

// Members of fold f, in sample order.
std::vector<FeatureSequence> fold_subset(std::span<const FeatureSequence> data,
                                         const FoldAssignment& folds, int fold,
                                         bool held_out);

CrossValidation cross_validate(std::span<const CodeSample> samples,
                               std::span<const FeatureSequence> features,
                               const FoldAssignment& folds,
                               const PipelineConfig& config);

nlohmann::json make_manifest(const PipelineConfig& config,
                             const BackendDescriptor& descriptor,
                             size_t samples_loaded, size_t samples_used);

void write_text(const std::filesystem::path& path, std::string_view text);
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

// Writes metrics.json, metrics.txt and loc_buckets.csv into dir.
void write_evaluation(const std::filesystem::path& dir,
                      const MetricReport& metrics,
                      const LocBucketReport& buckets);

// The whole pipeline; artifacts as listed at the top of this header.
CrossValidation run_pipeline(const PipelineConfig& config);

}  // namespace linefocus

#endif  // LINEFOCUS_PIPELINE_H_
