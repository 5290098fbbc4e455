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

#include "oracles.h"

#include <cstdint>
#include <numeric>

namespace linefocus::testing {

Tensor4 materialize(const AttentionStream& stream) {
  const int layers = stream.descriptor.num_layers;
  const int heads = stream.descriptor.num_heads;
  const size_t n = stream.num_tokens;
  Tensor4 a(layers, std::vector<std::vector<std::vector<double>>>(
                        heads, std::vector<std::vector<double>>(n, std::vector<double>(n))));
  size_t i = 0;
  for (int l = 0; l < layers; ++l)
    for (int h = 0; h < heads; ++h)
      for (size_t q = 0; q < n; ++q)
        for (size_t k = 0; k < n; ++k) a[l][h][q][k] = stream.payload[i++];
  return a;
}

std::vector<std::vector<double>> naive_layerwise(const Tensor4& attention,
                                                 const LineTokenSpans& spans) {
  const size_t layers = attention.size();
  const size_t lines = spans.spans.size();
  std::vector<std::vector<double>> out(lines, std::vector<double>(layers, 0.0));
  for (size_t line = 0; line < lines; ++line) {
    for (size_t l = 0; l < layers; ++l) {
      for (const auto& head : attention[l]) {
        const auto& last = head.back();
        for (size_t k = 0; k < last.size(); ++k) {
          if (k >= spans.spans[line].begin && k < spans.spans[line].end) {
            out[line][l] += last[k];
          }
        }
      }
    }
  }
  return out;
}

std::vector<std::vector<double>> naive_vuln(
    const std::vector<std::vector<double>>& highlighted,
    const std::vector<std::vector<double>>& base,
    const std::vector<int>& instruction_lines, int highlighted_line) {
  std::vector<int> rows = instruction_lines;
  rows.push_back(highlighted_line);
  std::vector<std::vector<double>> out;
  for (int line : rows) {
    std::vector<double> row;
    for (size_t l = 0; l < highlighted[line - 1].size(); ++l) {
      row.push_back(highlighted[line - 1][l] - base[line - 1][l]);
    }
    out.push_back(row);
  }
  return out;
}

std::vector<double> brute_force_baseline(const RunOutputs& runs, int loc) {
  // Exact: every share 1/distinct is an integer multiple of 1/lcm.
  std::vector<int64_t> distinct_counts;
  int64_t lcm = 1;
  for (const auto& run : runs.runs) {
    int64_t distinct = 0;
    for (size_t i = 0; i < run.size(); ++i) {
      if (std::find(run.begin(), run.begin() + i, run[i]) == run.begin() + i) ++distinct;
    }
    distinct_counts.push_back(distinct);
    if (distinct > 0) lcm = std::lcm(lcm, distinct);
  }
  std::vector<double> scores(loc, 0.0);
  const int64_t denominator = lcm * static_cast<int64_t>(runs.runs.size());
  for (int m = 1; m <= loc; ++m) {
    int64_t numerator = 0;
    for (size_t r = 0; r < runs.runs.size(); ++r) {
      const auto& run = runs.runs[r];
      if (std::find(run.begin(), run.end(), m) != run.end()) {
        numerator += lcm / distinct_counts[r];
      }
    }
    scores[m - 1] = static_cast<double>(numerator) / static_cast<double>(denominator);
  }
  return scores;
}

double max_relative_error(Eigen::MatrixXd& tensor, const Eigen::MatrixXd& analytic,
                          const std::function<double()>& loss, double eps, Rng& rng,
                          int max_entries, double floor) {
  const Eigen::Index size = tensor.size();
  std::vector<Eigen::Index> picks;
  if (size <= max_entries) {
    for (Eigen::Index i = 0; i < size; ++i) picks.push_back(i);
  } else {
    for (int i = 0; i < max_entries; ++i) {
      picks.push_back(static_cast<Eigen::Index>(rng.bounded(size)));
    }
  }
  double worst = 0.0;
  for (Eigen::Index i : picks) {
    double& x = tensor.data()[i];
    const double saved = x;
    x = saved + eps;
    const double up = loss();
    x = saved - eps;
    const double down = loss();
    x = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double a = analytic.data()[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), floor});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

}  // namespace linefocus::testing
