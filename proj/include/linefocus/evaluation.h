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

#ifndef LINEFOCUS_EVALUATION_H_
#define LINEFOCUS_EVALUATION_H_

#include <limits>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "linefocus/corpus.h"
#include "linefocus/scoring.h"

namespace linefocus {

using TruthMap = std::map<std::string, std::set<int>>;

TruthMap truth_from(std::span<const CodeSample> samples);

enum class Averaging { kMicro, kMacro };

std::string_view averaging_name(Averaging averaging);
Averaging parse_averaging(std::string_view name);

// All rates are percentages in [0, 100].
struct MetricReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::map<int, double> top_n;
  size_t sample_count = 0;
};

// Harmonic mean; 0 when p + r == 0.
double f1_score(double precision, double recall);

// kMicro pools TP/FP/FN over every line of every sample. kMacro averages
// per-sample precision and recall and takes F1 of the averages. Precision
// is 0 with no predictions. Throws Error(kMissingTruth).
MetricReport precision_recall_f1(std::span<const SuspicionReport> reports,
                                 const TruthMap& truth,
                                 Averaging averaging = Averaging::kMicro);

inline constexpr int kDefaultTopNValues[] = {1, 3, 5};
inline constexpr std::span<const int> kDefaultTopN{kDefaultTopNValues};

// A sample hits at N when any true line is among its first N ranked lines.
std::map<int, double> top_n(std::span<const SuspicionReport> reports,
                            const TruthMap& truth,
                            std::span<const int> n_values = kDefaultTopN);

MetricReport evaluate(std::span<const SuspicionReport> reports,
                      const TruthMap& truth,
                      Averaging averaging = Averaging::kMicro);

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct LocBucket {
  double lo = 0.0;  // inclusive
  double hi = 0.0;  // exclusive
  size_t count = 0;
  size_t hits = 0;
  double top1 = 0.0;  // percentage; 0 for empty buckets
};

struct LocBucketReport {
  std::vector<LocBucket> buckets;
  size_t sample_count = 0;
};

std::vector<double> default_bucket_edges();

// Buckets [e0, e1), ..., [e_{n-2}, e_{n-1}); a final [e_{n-1}, inf) bucket
// is added when the last edge is finite. Throws kEmptyBucketEdges,
// kInvalidBucketEdges (not strictly increasing, or a sample below e0),
// kMissingTruth.
LocBucketReport loc_bucket_accuracy(std::span<const CodeSample> samples,
                                    std::span<const SuspicionReport> reports,
                                    const TruthMap& truth,
                                    std::span<const double> bucket_edges);

nlohmann::json metrics_to_json(const MetricReport& report);
std::string metrics_table(const MetricReport& report);
std::string loc_buckets_csv(const LocBucketReport& report);

}  // namespace linefocus

#endif  // LINEFOCUS_EVALUATION_H_
