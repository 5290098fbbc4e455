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

#include <fstream>
#include <numeric>

#include "doctest.h"
#include "expect_error.h"
#include "linefocus/scoring.h"
#include "oracles.h"
#include "synthetic.h"

namespace linefocus {
namespace {

using testing::error_code_of;

TEST_CASE("single run") {
  const auto s = baseline_score({"a", {{7}}}, 9);
  for (int m = 1; m <= 9; ++m) CHECK(s[m - 1] == (m == 7 ? 1.0 : 0.0));
}

TEST_CASE("two runs share credit by run size") {
  const RunOutputs runs{"a", {{3, 5}, {5}}};
  const auto s = baseline_score(runs, 6);
  CHECK(s[2] == 0.25);
  CHECK(s[4] == 0.75);
  CHECK(s[0] == 0.0);
  const auto report = baseline_report(runs, 6);
  CHECK(report.source == "baseline");
  CHECK(report.ranking.front() == 5);
  CHECK(report.predicted == std::set<int>{5});
}

TEST_CASE("repeated lines within a run count once") {
  const auto s = baseline_score({"a", {{2, 2, 4}}}, 4);
  CHECK(s[1] == 0.5);
  CHECK(s[3] == 0.5);
}

TEST_CASE("empty runs still count toward k") {
  const auto s = baseline_score({"a", {{1}, {}}}, 2);
  CHECK(s[0] == 0.5);
  CHECK(s[1] == 0.0);
}

TEST_CASE("ten runs, the usual protocol size") {
  RunOutputs runs{"a", std::vector<std::vector<int>>(kDefaultBaselineRuns, {4})};
  runs.runs[9] = {1, 4};
  const auto s = baseline_score(runs, 5);
  CHECK(s[3] == doctest::Approx(0.95));
  CHECK(s[0] == doctest::Approx(0.05));
}

TEST_CASE("baseline errors") {
  CHECK(error_code_of([] { baseline_score({"a", {{3}}}, 2); }) == ErrorCode::kLineOutOfRange);
  CHECK(error_code_of([] { baseline_score({"a", {{0}}}, 2); }) == ErrorCode::kLineOutOfRange);
  CHECK(error_code_of([] { baseline_score({"a", {}}, 2); }) == ErrorCode::kMalformedRecord);
}

TEST_CASE("baseline equals the integer recount on random runs") {
  Rng rng(42);
  for (int trial = 0; trial < 300; ++trial) {
    const int loc = 1 + static_cast<int>(rng.bounded(30));
    const int k = 1 + static_cast<int>(rng.bounded(12));
    const RunOutputs runs = testing::random_run_outputs(rng, "r", loc, k);
    const auto s = baseline_score(runs, loc);
    CHECK(s == testing::brute_force_baseline(runs, loc));

    // Scores lie in [0, 1]; the total is 1 exactly when no run is empty.
    double total = 0.0;
    for (double x : s) {
      CHECK(x >= 0.0);
      CHECK(x <= 1.0);
      total += x;
    }
    const bool all_nonempty = std::all_of(runs.runs.begin(), runs.runs.end(),
                                          [](const auto& r) { return !r.empty(); });
    CHECK(total <= 1.0 + 1e-12);
    if (all_nonempty) {
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    } else {
      CHECK(total < 1.0 - 1e-12);
    }
  }
}

TEST_CASE("ranking by score with line-ascending ties") {
  const std::vector<double> s{0.2, 0.9, 0.2};
  CHECK(rank(s, TieRule::kLineAscending) == std::vector<int>{2, 1, 3});
  const std::vector<double> flat(6, 0.3);
  CHECK(rank(flat, TieRule::kLineAscending) == std::vector<int>{1, 2, 3, 4, 5, 6});
}

TEST_CASE("output-order ties follow the first run that named the line") {
  const RunOutputs runs{"a", {{5, 3}, {3}, {1}}};
  const auto s = baseline_score(runs, 6);
  CHECK(s[2] > s[4]);  // line 3 outscores line 5 here
  const RunOutputs tied{"a", {{5, 3}}};
  const auto t = baseline_score(tied, 6);
  REQUIRE(t[2] == t[4]);
  CHECK(rank(t, TieRule::kOutputOrder, &tied) == std::vector<int>{5, 3, 1, 2, 4, 6});
  CHECK(rank(t, TieRule::kLineAscending) == std::vector<int>{3, 5, 1, 2, 4, 6});

  const RunOutputs later{"a", {{2}, {6, 4}}};
  const auto u = baseline_score(later, 6);
  CHECK(rank(u, TieRule::kOutputOrder, &later) == std::vector<int>{2, 6, 4, 1, 3, 5});

  CHECK(error_code_of([&] { rank(t, TieRule::kOutputOrder); }) ==
        ErrorCode::kMissingTieContext);
}

TEST_CASE("rank is unchanged by a constant shift") {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(1 + rng.bounded(20));
    // Quarter steps keep ties and stay exact under the shift.
    for (double& x : s) x = 0.25 * static_cast<double>(rng.bounded(5));
    std::vector<double> shifted = s;
    for (double& x : shifted) x += 3.0;
    const auto r = rank(s, TieRule::kLineAscending);
    CHECK(r == rank(shifted, TieRule::kLineAscending));
    std::vector<int> sorted = r;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> expect(s.size());
    std::iota(expect.begin(), expect.end(), 1);
    CHECK(sorted == expect);
  }
}

TEST_CASE("threshold is strict") {
  CHECK(classify_threshold(std::vector<double>{0.5, 0.50001, 0.2}) == std::set<int>{2});
  CHECK(classify_threshold(std::vector<double>{0.0, 0.0}).empty());
  CHECK(classify_threshold(std::vector<double>{0.6, 0.4}) == std::set<int>{1});
  CHECK(classify_threshold(std::vector<double>{0.6, 0.4}, 0.3) == std::set<int>{1, 2});
}

TEST_CASE("classifier reports use line-ascending ties") {
  const auto r = classifier_report("c", {0.7, 0.1, 0.7, 0.5});
  CHECK(r.source == "classifier");
  CHECK(r.ranking == std::vector<int>{1, 3, 4, 2});
  CHECK(r.predicted == std::set<int>{1, 3});
}

TEST_CASE("reports and run files round trip") {
  testing::TempDir dir("scoring");
  std::vector<SuspicionReport> reports{classifier_report("c", {0.7, 0.1, 0.30000000000000004}),
                                       baseline_report({"b", {{2}, {1, 2}}}, 3)};
  save_reports(reports, dir / "r.jsonl");
  CHECK(load_reports(dir / "r.jsonl") == reports);

  std::ofstream(dir / "runs.jsonl") << R"({"id": "x", "runs": [[3, 5], [5]]})" << "\n\n"
                                    << R"({"id": "y", "runs": [[]]})" << "\n";
  const auto runs = load_run_outputs(dir / "runs.jsonl");
  REQUIRE(runs.size() == 2);
  CHECK(runs[0].runs == std::vector<std::vector<int>>{{3, 5}, {5}});
  CHECK(runs[1].sample_id == "y");

  std::ofstream(dir / "bad.jsonl") << R"({"id": "x"})" << "\n";
  CHECK(error_code_of([&] { load_run_outputs(dir / "bad.jsonl"); }) ==
        ErrorCode::kMalformedRecord);
  CHECK(error_code_of([&] {
          report_from_json(nlohmann::json::parse(
              R"({"id":"a","source":"baseline","scores":{"2":0.5},"ranking":[2],"predicted":[]})"));
        }) == ErrorCode::kMalformedRecord);
}

}  // namespace
}  // namespace linefocus
