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

// Reduction of prefill attention to per-line features.
//
//   attention (layers x heads x tokens x tokens)
//     -> sum heads, keep layers, take the last query row
//     -> sum keys within each prompt line        = LayerwiseAttnMat (lines x layers)
//   highlighted LayerwiseAttnMat - base one      = DiffAttnMat
//   DiffAttnMat rows [instruction lines..., highlighted line]
//                                                = VulnAttnMat
//
// Full-granularity streams are consumed one (layer, head) last-token row at
// a time; nothing of size tokens x tokens is allocated here.

#ifndef LINEFOCUS_REDUCTION_H_
#define LINEFOCUS_REDUCTION_H_

#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "linefocus/backend.h"
#include "linefocus/prompting.h"
#include "linefocus/toy_transformer.h"

namespace linefocus {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double& operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const {
    return data_[static_cast<size_t>(r) * cols_ + c];
  }
  std::span<double> row(int r) {
    return std::span<double>(data_).subspan(static_cast<size_t>(r) * cols_, cols_);
  }
  std::span<const double> row(int r) const {
    return std::span<const double>(data_).subspan(static_cast<size_t>(r) * cols_,
                                                  cols_);
  }
  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& doc);
void save_matrix(const Matrix& m, const std::filesystem::path& path);
Matrix load_matrix(const std::filesystem::path& path);

struct LayerwiseAttnMat {
  Matrix values;  // prompt lines x layers
};

struct DiffAttnMat {
  Matrix values;  // prompt lines x layers, highlighted minus base
};

struct VulnAttnMat {
  Matrix values;  // (instruction lines + 1) x layers
};

// OpenMP over layers. Throws Error(kTokenCountMismatch).
LayerwiseAttnMat layerwise_attn_mat(const AttentionStream& stream,
                                    const LineTokenSpans& spans);
// Single-threaded token-by-token reference for the same quantity.
LayerwiseAttnMat layerwise_attn_mat_serial(const AttentionStream& stream,
                                           const LineTokenSpans& spans);

LayerwiseAttnMat layerwise_attn_mat(const AttentionStream& stream,
                                    const LineTokenSpans& spans,
                                    Execution execution);

// Throws Error(kShapeMismatch).
DiffAttnMat diff_attn_mat(const LayerwiseAttnMat& highlighted,
                          const LayerwiseAttnMat& base);

// Prompt lines are 1-based. Throws kIndexOutOfRange or
// kHighlightedIsInstruction.
VulnAttnMat vuln_attn_mat(const DiffAttnMat& diff,
                          std::span<const int> instruction_lines,
                          int highlighted_prompt_line);

enum class FlattenStrategy { kLayerwise, kAvgPool };

std::string_view flatten_strategy_name(FlattenStrategy strategy);
FlattenStrategy parse_flatten_strategy(std::string_view name);

// kLayerwise: row-major, (I+1) * layers values. kAvgPool: per-row mean over
// layers, I+1 values.
std::vector<double> flatten(const VulnAttnMat& v, FlattenStrategy strategy);

// Silences the zero-token-line warning (tests, benchmarks).
void set_reduction_warnings(bool enabled);

}  // namespace linefocus

#endif  // LINEFOCUS_REDUCTION_H_
