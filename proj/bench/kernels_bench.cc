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

// Serial reference kernels against their parallel counterparts.
//
//   linefocus_bench --benchmark_filter=Prefill
//
// OMP_NUM_THREADS bounds the parallel variants.

#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "linefocus/pipeline.h"
#include "linefocus/reduction.h"
#include "linefocus/toy_transformer.h"

namespace {

using namespace linefocus;

const ToyModelParams& bench_model() {
  static const ToyModelParams params = ToyModelParams::initialize(
      {.seed = 7, .d_model = 32, .num_layers = 4, .num_heads = 4, .max_seq = 2048});
  return params;
}

std::string program_text(size_t bytes) {
  std::string text;
  for (int i = 0; text.size() < bytes; ++i) {
    text += "  buf[" + std::to_string(i) + "] = read(fd, len);\n";
  }
  text.resize(bytes);
  return text;
}

std::vector<int> bench_tokens(int64_t count) {
  return toy_token_ids(program_text(static_cast<size_t>(count) - 1));
}

void BM_PrefillReference(benchmark::State& state) {
  const auto ids = bench_tokens(state.range(0));
  const auto g = state.range(1) ? Granularity::kFull : Granularity::kLastTokenHeadSummed;
  for (auto _ : state) {
    benchmark::DoNotOptimize(toy_prefill_reference(bench_model(), ids, g));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_PrefillStreaming(benchmark::State& state) {
  const auto ids = bench_tokens(state.range(0));
  const auto g = state.range(1) ? Granularity::kFull : Granularity::kLastTokenHeadSummed;
  for (auto _ : state) {
    benchmark::DoNotOptimize(toy_prefill_streaming(bench_model(), ids, g));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

BENCHMARK(BM_PrefillReference)
    ->ArgsProduct({{128, 512, 2048}, {0}})
    ->Args({512, 1})
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PrefillStreaming)
    ->ArgsProduct({{128, 512, 2048}, {0}})
    ->Args({512, 1})
    ->Unit(benchmark::kMillisecond);

struct ReductionInput {
  AttentionStream stream;
  LineTokenSpans spans;
};

// Full attention of a 512-token prompt split into lines of 16 tokens.
const ReductionInput& reduction_input() {
  static const ReductionInput input = [] {
    ReductionInput in;
    in.stream = toy_prefill_streaming(bench_model(), bench_tokens(512), Granularity::kFull);
    in.spans.num_tokens = in.stream.num_tokens;
    for (size_t b = 0; b < in.stream.num_tokens; b += 16) {
      in.spans.spans.push_back({b, std::min(b + 16, in.stream.num_tokens)});
    }
    return in;
  }();
  return input;
}

void BM_LayerwiseSerial(benchmark::State& state) {
  const auto& in = reduction_input();
  for (auto _ : state) benchmark::DoNotOptimize(layerwise_attn_mat_serial(in.stream, in.spans));
}

void BM_LayerwiseParallel(benchmark::State& state) {
  const auto& in = reduction_input();
  for (auto _ : state) benchmark::DoNotOptimize(layerwise_attn_mat(in.stream, in.spans));
}

BENCHMARK(BM_LayerwiseSerial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_LayerwiseParallel)->Unit(benchmark::kMicrosecond);

// One sample end to end: a base prefill plus one per line, with the line
// loop on 1 or 4 threads.
void BM_SampleFeatures(benchmark::State& state) {
  std::string code;
  for (int i = 0; i < 24; ++i) code += "x" + std::to_string(i) + " = f(x);\n";
  const CodeSample sample = make_sample("bench", "c", code, {3});
  const ToyBackend backend(bench_model());
  FeatureOptions options;
  options.parallelism = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(extract_sample_features(sample, backend, options));
  }
}

BENCHMARK(BM_SampleFeatures)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
