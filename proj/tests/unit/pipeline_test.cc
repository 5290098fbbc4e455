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

#include <algorithm>
#include <fstream>

#include "doctest.h"
#include "expect_error.h"
#include "linefocus/pipeline.h"
#include "synthetic.h"

namespace linefocus {
namespace {

using nlohmann::json;
using testing::error_code_of;
using testing::TempDir;

json small_config_doc(const std::filesystem::path& dataset,
                      const std::filesystem::path& out) {
  return json{{"dataset", dataset.string()},
              {"backend",
               {{"kind", "toy"}, {"seed", 1}, {"d_model", 8}, {"num_layers", 2},
                {"num_heads", 2}}},
              {"classifier", {{"hidden", 4}, {"epochs", 3}, {"learning_rate", 0.01}}},
              {"folds", {{"k", 5}, {"seed", 2}}},
              {"out", out.string()},
              {"parallelism", 1}};
}

PipelineConfig small_config(const std::filesystem::path& dataset,
                            const std::filesystem::path& out) {
  return config_from_json(small_config_doc(dataset, out));
}

TEST_CASE("strategy presets") {
  PipelineConfig c;
  apply_strategy(c, "lova-c");
  CHECK(c.highlight == HighlightStrategy::kMarkerComment);
  apply_strategy(c, "lova-a");
  CHECK(c.reduction == FlattenStrategy::kAvgPool);
  CHECK(c.highlight == HighlightStrategy::kLineIndex);
  apply_strategy(c, "lova-v");
  CHECK(c.classifier.kind == ModelKind::kMlp);
  CHECK(c.reduction == FlattenStrategy::kLayerwise);
  apply_strategy(c, "lova");
  CHECK(c.classifier.kind == ModelKind::kBiLstm);
  CHECK(strategy_names() == std::vector<std::string>{"lova", "lova-c", "lova-a", "lova-v"});
  CHECK(error_code_of([&] { apply_strategy(c, "lova-x"); }) == ErrorCode::kConfig);
}

TEST_CASE("config documents") {
  const PipelineConfig c = config_from_json(json{{"strategy", "lova-a"},
                                                 {"reduction", "layerwise"},
                                                 {"metrics",
                                                  {{"threshold", 0.4},
                                                   {"averaging", "macro"},
                                                   {"bucket_edges", {0, 50, "inf"}}}},
                                                 {"prompt", {{"cue_is_instruction", false}}}});
  CHECK(c.strategy == "lova-a");
  CHECK(c.reduction == FlattenStrategy::kLayerwise);  // explicit field wins
  CHECK(c.threshold == 0.4);
  CHECK(c.averaging == Averaging::kMacro);
  CHECK(c.bucket_edges == std::vector<double>{0, 50, kInf});
  CHECK_FALSE(c.prompt.cue_is_instruction);

  CHECK(error_code_of([] { config_from_json(json{{"colour", 1}}); }) == ErrorCode::kConfig);
  CHECK(error_code_of([] { config_from_json(json{{"backend", {{"layers", 2}}}}); }) ==
        ErrorCode::kConfig);
  CHECK(error_code_of([] { config_from_json(json{{"folds", "five"}}); }) ==
        ErrorCode::kConfig);

  const PipelineConfig back = config_from_json(config_to_json(c));
  CHECK(config_hash(back) == config_hash(c));
}

TEST_CASE("config hash ignores output location and thread count") {
  PipelineConfig a;
  PipelineConfig b = a;
  b.out = "elsewhere";
  b.parallelism = 7;
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  b.classifier.seed = 9;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("config validation") {
  TempDir dir("pipeline");
  const auto samples = testing::synthetic_corpus(10, 1);
  save_dataset(samples, dir / "d.jsonl");
  PipelineConfig c = small_config(dir / "d.jsonl", dir / "out");
  CHECK_NOTHROW(validate_config(c));

  PipelineConfig missing = c;
  missing.dataset = dir / "none.jsonl";
  CHECK(error_code_of([&] { validate_config(missing); }) == ErrorCode::kIo);

  PipelineConfig one_fold = c;
  one_fold.folds = 1;
  CHECK(error_code_of([&] { validate_config(one_fold); }) == ErrorCode::kConfig);

  PipelineConfig http = c;
  http.backend.kind = BackendKind::kHttp;
  CHECK(error_code_of([&] { validate_config(http); }) == ErrorCode::kConfig);

  PipelineConfig dump = c;
  dump.backend.kind = BackendKind::kDump;
  dump.backend.dump_dir = dir / "no-dumps";
  CHECK(error_code_of([&] { validate_config(dump); }) == ErrorCode::kConfig);
}

TEST_CASE("sample selection respects the smaller budget") {
  const auto samples = testing::synthetic_corpus(30, 5, 2, 25);
  PipelineConfig c;
  ToyBackend backend(ToyModelParams::initialize(
      {.d_model = 8, .num_layers = 1, .num_heads = 2, .max_seq = 400}));
  const auto used = select_samples(samples, backend, c);
  CHECK(!used.empty());
  CHECK(used.size() < samples.size());
  for (const auto& s : used) {
    for (int line = 1; line <= s.loc(); ++line) {
      const auto text = build_highlighted_prompt(s, line).text;
      CHECK(backend.tokenize({"p", text}).num_tokens() <= 400);
    }
  }
  c.max_tokens = 0;
  CHECK(select_samples(samples, backend, c).empty());
}

TEST_CASE("features are the composition of the reduction stages") {
  const CodeSample sample = testing::synthetic_corpus(1, 3, 5, 5).front();
  ToyBackend backend(ToyModelParams::initialize(
      {.seed = 4, .d_model = 8, .num_layers = 3, .num_heads = 2}));
  for (auto reduction : {FlattenStrategy::kLayerwise, FlattenStrategy::kAvgPool}) {
    FeatureOptions options;
    options.reduction = reduction;
    options.parallelism = 2;
    const SampleFeatures f = extract_sample_features(sample, backend, options);
    REQUIRE(f.sequence.length() == 5);
    CHECK(f.sequence.labels.has_value());

    auto lines_of = [&](const PromptLayout& layout, const std::string& id) {
      const Prefill p = backend.prefill({id, layout.text}, Granularity::kLastTokenHeadSummed);
      return layerwise_attn_mat(p.attention, map_tokens_to_lines(layout, p.tokens.offsets));
    };
    const PromptLayout base = build_base_prompt(sample);
    const auto base_mat = lines_of(base, base_prompt_id(sample.id));
    for (int line = 1; line <= 5; ++line) {
      const PromptLayout hl = build_highlighted_prompt(sample, line);
      const auto v = vuln_attn_mat(
          diff_attn_mat(lines_of(hl, highlighted_prompt_id(sample.id, line)), base_mat),
          hl.instruction_lines, hl.prompt_line_of(line));
      CHECK(f.sequence.features[line - 1] == flatten(v, reduction));
      CHECK(f.vams[line - 1].values == v.values);
      CHECK((*f.sequence.labels)[line - 1] == (sample.vuln_lines.count(line) ? 1 : 0));
    }
  }
}

TEST_CASE("feature files and alignment") {
  TempDir dir("pipeline");
  const auto samples = testing::synthetic_corpus(4, 8, 2, 4);
  std::vector<FeatureSequence> features;
  for (const auto& s : samples) {
    FeatureSequence f{s.id, s.language, {}, std::nullopt};
    for (int i = 0; i < s.loc(); ++i) f.features.push_back({0.1 * i, -0.3});
    features.push_back(f);
  }
  save_features(features, dir / "f.jsonl");
  const auto loaded = load_features(dir / "f.jsonl");
  REQUIRE(loaded.size() == 4);
  CHECK(loaded[2].features == features[2].features);

  std::vector<FeatureSequence> reversed(loaded.rbegin(), loaded.rend());
  const auto aligned = align_features(samples, reversed);
  for (size_t i = 0; i < samples.size(); ++i) {
    CHECK(aligned[i].sample_id == samples[i].id);
    REQUIRE(aligned[i].labels.has_value());
    CHECK(std::count(aligned[i].labels->begin(), aligned[i].labels->end(), 1) ==
          static_cast<long>(samples[i].vuln_lines.size()));
  }
  CHECK(error_code_of([&] {
          align_features(samples, std::span<const FeatureSequence>(loaded).subspan(1));
        }) == ErrorCode::kMalformedRecord);
  auto short_one = loaded;
  short_one[0].features.pop_back();
  CHECK(error_code_of([&] { align_features(samples, short_one); }) ==
        ErrorCode::kMalformedRecord);
}

TEST_CASE("fold subsets split by membership") {
  const auto samples = testing::synthetic_corpus(10, 2);
  std::vector<FeatureSequence> data;
  for (const auto& s : samples) data.push_back({s.id, "c", {{1.0}}, std::vector<int>{1}});
  const FoldAssignment folds = make_folds(samples, 5, 4);
  for (int f = 0; f < 5; ++f) {
    const auto held = fold_subset(data, folds, f, true);
    const auto rest = fold_subset(data, folds, f, false);
    CHECK(held.size() == 2);
    CHECK(rest.size() == 8);
    for (const auto& seq : held) CHECK(folds.assignment.at(seq.sample_id) == f);
    for (const auto& seq : rest) CHECK(folds.assignment.at(seq.sample_id) != f);
  }
}

TEST_CASE("one model per language") {
  TempDir dir("pipeline");
  std::vector<FeatureSequence> data;
  for (int i = 0; i < 6; ++i) {
    data.push_back({"s" + std::to_string(i), i % 2 ? "c" : "java",
                    {{1.0, 0.0}, {0.0, 1.0}}, std::vector<int>{0, 1}});
  }
  const ModelSet models = train_per_language(data, TrainConfig{.hidden = 3, .epochs = 2});
  CHECK(models.size() == 2);
  save_models(models, dir.path());
  CHECK(std::filesystem::exists(dir / "model.c.json"));
  const ModelSet back = load_models(dir.path());
  CHECK(back.at("java") == models.at("java"));
  const auto reports = localize(data, back, 0.5);
  CHECK(reports.size() == 6);
  data.push_back({"x", "rust", {{1.0, 0.0}}, std::vector<int>{1}});
  CHECK(error_code_of([&] { localize(data, back, 0.5); }) == ErrorCode::kEmptyTrainingSet);
}

TEST_CASE("a full run over twenty samples") {
  TempDir dir("pipeline");
  const auto samples = testing::synthetic_corpus(20, 11, 3, 8);
  save_dataset(samples, dir / "d.jsonl");
  const PipelineConfig c = small_config(dir / "d.jsonl", dir / "out");
  const CrossValidation cv = run_pipeline(c);
  CHECK(cv.folds.size() == 5);
  CHECK(cv.reports.size() == 20);
  CHECK(cv.metrics.sample_count == 20);
  for (int f = 0; f < 5; ++f) {
    const auto fold_dir = dir / ("out/fold_" + std::to_string(f));
    CHECK(load_reports(fold_dir / "reports.jsonl").size() == cv.folds[f].reports.size());
    CHECK(std::filesystem::exists(fold_dir / "metrics.json"));
  }
  for (const char* name : {"manifest.json", "folds.json", "features.jsonl", "reports.jsonl",
                           "metrics.json", "metrics.txt", "loc_buckets.csv"}) {
    CHECK(std::filesystem::exists(dir / "out" / name));
  }
  const json metrics = json::parse(testing::read_file(dir / "out/metrics.json"));
  CHECK(metrics.contains("top_n"));
  CHECK(metrics["sample_count"] == 20);
  for (size_t i = 0; i < samples.size(); ++i) CHECK(cv.reports[i].sample_id == samples[i].id);

  const json manifest = json::parse(testing::read_file(dir / "out/manifest.json"));
  CHECK(manifest["config_hash"] == config_hash(c));
  CHECK(manifest["version"] == kVersion);
}

TEST_CASE("reruns are byte-identical across thread counts") {
  TempDir dir("pipeline");
  save_dataset(testing::synthetic_corpus(10, 12, 3, 6), dir / "d.jsonl");
  PipelineConfig a = small_config(dir / "d.jsonl", dir / "a");
  PipelineConfig b = small_config(dir / "d.jsonl", dir / "b");
  b.parallelism = 3;
  run_pipeline(a);
  run_pipeline(b);
  for (const char* name : {"features.jsonl", "folds.json", "reports.jsonl", "metrics.json",
                           "loc_buckets.csv", "fold_2/reports.jsonl"}) {
    CAPTURE(name);
    CHECK(testing::read_file(dir / "a" / name) == testing::read_file(dir / "b" / name));
  }
}

TEST_CASE("the average-pooling preset is recorded in the manifest") {
  TempDir dir("pipeline");
  save_dataset(testing::synthetic_corpus(10, 13, 3, 6), dir / "d.jsonl");
  json doc = small_config_doc(dir / "d.jsonl", dir / "out");
  doc["strategy"] = "lova-a";
  run_pipeline(config_from_json(doc));
  const json manifest = json::parse(testing::read_file(dir / "out/manifest.json"));
  CHECK(manifest["reduction"] == "avg_pool");
  CHECK(manifest["strategy"] == "lova-a");
  const auto features = load_features(dir / "out/features.jsonl");
  CHECK(features.front().dim() == 3);  // two instruction rows plus the line
}

TEST_CASE("a features cache skips extraction") {
  TempDir dir("pipeline");
  save_dataset(testing::synthetic_corpus(10, 14, 3, 6), dir / "d.jsonl");
  PipelineConfig first = small_config(dir / "d.jsonl", dir / "a");
  run_pipeline(first);
  PipelineConfig cached = small_config(dir / "d.jsonl", dir / "b");
  cached.features = dir / "a/features.jsonl";
  run_pipeline(cached);
  CHECK(testing::read_file(dir / "a/reports.jsonl") ==
        testing::read_file(dir / "b/reports.jsonl"));
}

}  // namespace
}  // namespace linefocus
