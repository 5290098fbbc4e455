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

// Suspicion reports: per-line scores, a total ranking and the thresholded
// prediction set, from either the trained classifier or the repeated-output
// baseline.

#ifndef LINEFOCUS_SCORING_H_
#define LINEFOCUS_SCORING_H_

#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace linefocus {

inline constexpr int kDefaultBaselineRuns = 10;
inline constexpr double kDefaultThreshold = 0.5;

// k recorded model answers for one program; each run lists the lines it
// claimed, in output order.
struct RunOutputs {
  std::string sample_id;
  std::vector<std::vector<int>> runs;
};

std::vector<RunOutputs> load_run_outputs(const std::filesystem::path& path);

// score(m) = (1/k) * sum_i [m in r_i] / |r_i|, over deduplicated runs;
// empty runs add nothing but still count in k. Index 0 holds line 1.
// Sums are exact rationals rounded once, so equal scores compare equal.
// Throws Error(kLineOutOfRange).
std::vector<double> baseline_score(const RunOutputs& runs, int loc);

enum class TieRule { kOutputOrder, kLineAscending };

// Lines (1-based) by descending score. kOutputOrder breaks ties by the
// first run that emitted the line, then its position in that run; lines
// never emitted follow in ascending order. Throws kMissingTieContext when
// kOutputOrder has no runs.
std::vector<int> rank(std::span<const double> scores, TieRule tie_rule,
                      const RunOutputs* runs = nullptr);

// {m : score(m) > threshold}.
std::set<int> classify_threshold(std::span<const double> scores,
                                 double threshold = kDefaultThreshold);

struct SuspicionReport {
  std::string sample_id;
  std::string source;  // "baseline" or "classifier"
  std::vector<double> scores;
  std::vector<int> ranking;
  std::set<int> predicted;

  bool operator==(const SuspicionReport&) const = default;
};

SuspicionReport classifier_report(std::string sample_id,
                                  std::vector<double> scores,
                                  double threshold = kDefaultThreshold);
SuspicionReport baseline_report(const RunOutputs& runs, int loc,
                                double threshold = kDefaultThreshold);

nlohmann::json report_to_json(const SuspicionReport& report);
SuspicionReport report_from_json(const nlohmann::json& doc);
void save_reports(std::span<const SuspicionReport> reports,
                  const std::filesystem::path& path);
std::vector<SuspicionReport> load_reports(const std::filesystem::path& path);

}  // namespace linefocus

#endif  // LINEFOCUS_SCORING_H_
