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

#include "linefocus/reduction.h"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iostream>

#include "linefocus/error.h"

namespace linefocus {

using nlohmann::json;

namespace {

std::atomic<bool> g_warnings{true};

void check_inputs(const AttentionStream& stream, const LineTokenSpans& spans) {
  if (spans.num_tokens != stream.num_tokens) {
    throw Error(ErrorCode::kTokenCountMismatch,
                "line spans cover " + std::to_string(spans.num_tokens) +
                    " tokens, attention has " +
                    std::to_string(stream.num_tokens));
  }
  if (stream.num_tokens == 0 ||
      stream.payload.size() != stream.expected_payload_size()) {
    throw Error(ErrorCode::kShapeMismatch, "attention payload has wrong size");
  }
  if (!g_warnings.load(std::memory_order_relaxed)) return;
  for (size_t i = 0; i < spans.spans.size(); ++i) {
    if (spans.spans[i].size() == 0) {
      std::cerr << "warning: prompt line " << i + 1
                << " owns no tokens; its attention row is zero\n";
    }
  }
}

}  // namespace

void set_reduction_warnings(bool enabled) { g_warnings.store(enabled); }

json matrix_to_json(const Matrix& m) {
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

Matrix matrix_from_json(const json& doc) {
  try {
    const int rows = doc.at("rows").get<int>();
    const int cols = doc.at("cols").get<int>();
    auto data = doc.at("data").get<std::vector<double>>();
    if (rows < 0 || cols < 0 ||
        data.size() != static_cast<size_t>(rows) * static_cast<size_t>(cols)) {
      throw Error(ErrorCode::kShapeMismatch, "matrix data does not match rows x cols");
    }
    Matrix m(rows, cols);
    m.data() = std::move(data);
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedRecord, e.what());
  }
}

void save_matrix(const Matrix& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << matrix_to_json(m).dump() << '\n';
}

Matrix load_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return matrix_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kMalformedRecord, path.string() + ": " + e.what());
  }
}

LayerwiseAttnMat layerwise_attn_mat(const AttentionStream& stream,
                                    const LineTokenSpans& spans) {
  check_inputs(stream, spans);
  const int layers = stream.descriptor.num_layers;
  const int heads = stream.descriptor.num_heads;
  const int lines = static_cast<int>(spans.spans.size());
  const size_t n = stream.num_tokens;
  const bool full = stream.granularity == Granularity::kFull;
  LayerwiseAttnMat out{Matrix(lines, layers)};

#pragma omp parallel for schedule(static)
  for (int l = 0; l < layers; ++l) {
    // Head-summed last-token row for this layer, O(tokens) scratch.
    std::vector<double> summed(n, 0.0);
    if (full) {
      for (int h = 0; h < heads; ++h) {
        const auto row = stream.last_token_row(l, h);
        for (size_t k = 0; k < n; ++k) summed[k] += row[k];
      }
    } else {
      const auto row = stream.layer_row(l);
      std::copy(row.begin(), row.end(), summed.begin());
    }
    for (int line = 0; line < lines; ++line) {
      const TokenRange r = spans.spans[line];
      double acc = 0.0;
      for (size_t k = r.begin; k < r.end; ++k) acc += summed[k];
      out.values(line, l) = acc;
    }
  }
  return out;
}

LayerwiseAttnMat layerwise_attn_mat_serial(const AttentionStream& stream,
                                           const LineTokenSpans& spans) {
  check_inputs(stream, spans);
  const int layers = stream.descriptor.num_layers;
  const int heads = stream.descriptor.num_heads;
  const int lines = static_cast<int>(spans.spans.size());
  std::vector<int> line_of(stream.num_tokens, -1);
  for (int line = 0; line < lines; ++line) {
    for (size_t k = spans.spans[line].begin; k < spans.spans[line].end; ++k) {
      line_of[k] = line;
    }
  }
  LayerwiseAttnMat out{Matrix(lines, layers)};
  for (int l = 0; l < layers; ++l) {
    for (size_t k = 0; k < stream.num_tokens; ++k) {
      if (line_of[k] < 0) continue;
      if (stream.granularity == Granularity::kFull) {
        for (int h = 0; h < heads; ++h) {
          out.values(line_of[k], l) += stream.last_token_row(l, h)[k];
        }
      } else {
        out.values(line_of[k], l) += stream.layer_row(l)[k];
      }
    }
  }
  return out;
}

LayerwiseAttnMat layerwise_attn_mat(const AttentionStream& stream,
                                    const LineTokenSpans& spans,
                                    Execution execution) {
  return execution == Execution::kParallel
             ? layerwise_attn_mat(stream, spans)
             : layerwise_attn_mat_serial(stream, spans);
}

DiffAttnMat diff_attn_mat(const LayerwiseAttnMat& highlighted,
                          const LayerwiseAttnMat& base) {
  const Matrix& a = highlighted.values;
  const Matrix& b = base.values;
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::kShapeMismatch,
                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                    " vs " + std::to_string(b.rows()) + "x" +
                    std::to_string(b.cols()));
  }
  DiffAttnMat d{Matrix(a.rows(), a.cols())};
  for (size_t i = 0; i < a.data().size(); ++i) {
    d.values.data()[i] = a.data()[i] - b.data()[i];
  }
  return d;
}

VulnAttnMat vuln_attn_mat(const DiffAttnMat& diff,
                          std::span<const int> instruction_lines,
                          int highlighted_prompt_line) {
  const int lines = diff.values.rows();
  auto in_range = [&](int line) { return line >= 1 && line <= lines; };
  for (int line : instruction_lines) {
    if (!in_range(line)) {
      throw Error(ErrorCode::kIndexOutOfRange,
                  "instruction line " + std::to_string(line));
    }
  }
  if (!in_range(highlighted_prompt_line)) {
    throw Error(ErrorCode::kIndexOutOfRange,
                "highlighted line " + std::to_string(highlighted_prompt_line));
  }
  if (std::find(instruction_lines.begin(), instruction_lines.end(),
                highlighted_prompt_line) != instruction_lines.end()) {
    throw Error(ErrorCode::kHighlightedIsInstruction,
                "prompt line " + std::to_string(highlighted_prompt_line));
  }
  const int cols = diff.values.cols();
  VulnAttnMat v{Matrix(static_cast<int>(instruction_lines.size()) + 1, cols)};
  auto copy_row = [&](int dst, int prompt_line) {
    const auto src = diff.values.row(prompt_line - 1);
    std::copy(src.begin(), src.end(), v.values.row(dst).begin());
  };
  for (size_t i = 0; i < instruction_lines.size(); ++i) {
    copy_row(static_cast<int>(i), instruction_lines[i]);
  }
  copy_row(static_cast<int>(instruction_lines.size()), highlighted_prompt_line);
  return v;
}

std::string_view flatten_strategy_name(FlattenStrategy strategy) {
  return strategy == FlattenStrategy::kLayerwise ? "layerwise" : "avg_pool";
}

FlattenStrategy parse_flatten_strategy(std::string_view name) {
  if (name == "layerwise") return FlattenStrategy::kLayerwise;
  if (name == "avg_pool") return FlattenStrategy::kAvgPool;
  throw Error(ErrorCode::kConfig,
              "unknown reduction strategy '" + std::string(name) + "'");
}

std::vector<double> flatten(const VulnAttnMat& v, FlattenStrategy strategy) {
  if (strategy == FlattenStrategy::kLayerwise) return v.values.data();
  std::vector<double> pooled(v.values.rows(), 0.0);
  if (v.values.cols() == 0) return pooled;
  for (int r = 0; r < v.values.rows(); ++r) {
    double acc = 0.0;
    for (double x : v.values.row(r)) acc += x;
    pooled[r] = acc / v.values.cols();
  }
  return pooled;
}

}  // namespace linefocus
