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

#include "linefocus/scoring.h"

#include <algorithm>
#include <climits>
#include <fstream>
#include <map>
#include <numeric>

#include "linefocus/error.h"

namespace linefocus {

using nlohmann::json;

namespace {

std::vector<int> dedup_in_order(const std::vector<int>& run) {
  std::vector<int> out;
  std::set<int> seen;
  for (int line : run) {
    if (seen.insert(line).second) out.push_back(line);
  }
  return out;
}

// Non-negative rational with overflow detection.
struct Fraction {
  using Int = unsigned __int128;
  static constexpr Int kLimit = static_cast<Int>(1) << 120;

  Int num = 0;
  Int den = 1;

  static Int gcd(Int a, Int b) {
    while (b != 0) {
      const Int t = a % b;
      a = b;
      b = t;
    }
    return a;
  }

  bool add(const Fraction& o) {
    const Int g = gcd(den, o.den);
    const Int left = o.den / g;
    const Int right = den / g;
    if (den > kLimit / left || num > kLimit / left || o.num > kLimit / right) {
      return false;
    }
    num = num * left + o.num * right;
    den = den * left;
    if (num >= kLimit) return false;
    const Int r = gcd(num, den);
    if (r > 1) {
      num /= r;
      den /= r;
    }
    return true;
  }

  bool scale_denominator(Int k) {
    if (den > kLimit / k) return false;
    den *= k;
    const Int r = gcd(num, den);
    if (r > 1) {
      num /= r;
      den /= r;
    }
    return true;
  }

  // Correctly rounded when both parts fit in 53 bits.
  double to_double() const {
    constexpr Int k53 = static_cast<Int>(1) << 53;
    if (num < k53 && den < k53) {
      return static_cast<double>(num) / static_cast<double>(den);
    }
    return static_cast<double>(static_cast<long double>(num) /
                               static_cast<long double>(den));
  }
};

}  // namespace

std::vector<RunOutputs> load_run_outputs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<RunOutputs> all;
  std::string text;
  size_t line_number = 0;
  while (std::getline(in, text)) {
    ++line_number;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json doc = json::parse(text);
      RunOutputs r;
      r.sample_id = doc.at("id").get<std::string>();
      r.runs = doc.at("runs").get<std::vector<std::vector<int>>>();
      all.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kMalformedRecord,
                  path.string() + " line " + std::to_string(line_number) + ": " +
                      e.what());
    }
  }
  return all;
}

std::vector<double> baseline_score(const RunOutputs& runs, int loc) {
  if (runs.runs.empty()) {
    throw Error(ErrorCode::kMalformedRecord,
                "'" + runs.sample_id + "' has no runs");
  }
  const int n = std::max(loc, 0);
  std::vector<Fraction> exact(n);
  std::vector<double> approx(n, 0.0);
  bool exact_ok = true;
  const double k = static_cast<double>(runs.runs.size());
  for (const auto& raw : runs.runs) {
    const std::vector<int> run = dedup_in_order(raw);
    for (int line : run) {
      if (line < 1 || line > loc) {
        throw Error(ErrorCode::kLineOutOfRange,
                    "'" + runs.sample_id + "' line " + std::to_string(line) +
                        " outside [1, " + std::to_string(loc) + "]");
      }
    }
    if (run.empty()) continue;
    const Fraction share{1, static_cast<Fraction::Int>(run.size())};
    for (int line : run) {
      approx[line - 1] += 1.0 / (k * static_cast<double>(run.size()));
      if (exact_ok) exact_ok = exact[line - 1].add(share);
    }
  }
  if (!exact_ok) return approx;
  // Equal rationals must produce equal doubles so ties reach the tie rule.
  std::vector<double> scores(n);
  for (int i = 0; i < n; ++i) {
    Fraction f = exact[i];
    if (!f.scale_denominator(static_cast<Fraction::Int>(runs.runs.size()))) {
      return approx;
    }
    scores[i] = f.to_double();
  }
  return scores;
}

std::vector<int> rank(std::span<const double> scores, TieRule tie_rule,
                      const RunOutputs* runs) {
  const int n = static_cast<int>(scores.size());
  std::vector<std::pair<int, int>> first_seen(n, {INT_MAX, INT_MAX});
  if (tie_rule == TieRule::kOutputOrder) {
    if (runs == nullptr) {
      throw Error(ErrorCode::kMissingTieContext,
                  "output-order ties need the run outputs");
    }
    for (size_t r = 0; r < runs->runs.size(); ++r) {
      const auto& run = runs->runs[r];
      for (size_t pos = 0; pos < run.size(); ++pos) {
        const int line = run[pos];
        if (line < 1 || line > n) continue;
        auto key = std::make_pair(static_cast<int>(r), static_cast<int>(pos));
        first_seen[line - 1] = std::min(first_seen[line - 1], key);
      }
    }
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 1);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[a - 1] != scores[b - 1]) return scores[a - 1] > scores[b - 1];
    if (first_seen[a - 1] != first_seen[b - 1]) {
      return first_seen[a - 1] < first_seen[b - 1];
    }
    return a < b;
  });
  return order;
}

std::set<int> classify_threshold(std::span<const double> scores,
                                 double threshold) {
  std::set<int> predicted;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] > threshold) predicted.insert(static_cast<int>(i) + 1);
  }
  return predicted;
}

SuspicionReport classifier_report(std::string sample_id,
                                  std::vector<double> scores, double threshold) {
  SuspicionReport r;
  r.sample_id = std::move(sample_id);
  r.source = "classifier";
  r.ranking = rank(scores, TieRule::kLineAscending);
  r.predicted = classify_threshold(scores, threshold);
  r.scores = std::move(scores);
  return r;
}

SuspicionReport baseline_report(const RunOutputs& runs, int loc,
                                double threshold) {
  SuspicionReport r;
  r.sample_id = runs.sample_id;
  r.source = "baseline";
  r.scores = baseline_score(runs, loc);
  r.ranking = rank(r.scores, TieRule::kOutputOrder, &runs);
  r.predicted = classify_threshold(r.scores, threshold);
  return r;
}

json report_to_json(const SuspicionReport& report) {
  // JSON object keys must be strings; lines are written as decimal keys.
  json scores = json::object();
  for (size_t i = 0; i < report.scores.size(); ++i) {
    scores[std::to_string(i + 1)] = report.scores[i];
  }
  return json{{"id", report.sample_id},
              {"source", report.source},
              {"scores", scores},
              {"ranking", report.ranking},
              {"predicted", std::vector<int>(report.predicted.begin(),
                                             report.predicted.end())}};
}

SuspicionReport report_from_json(const json& doc) {
  SuspicionReport r;
  try {
    r.sample_id = doc.at("id").get<std::string>();
    r.source = doc.at("source").get<std::string>();
    std::map<int, double> by_line;
    for (const auto& [key, value] : doc.at("scores").items()) {
      by_line[std::stoi(key)] = value.get<double>();
    }
    int expected = 1;
    for (const auto& [line, value] : by_line) {
      if (line != expected++) {
        throw Error(ErrorCode::kMalformedRecord,
                    "'" + r.sample_id + "' scores must cover lines 1..n");
      }
      r.scores.push_back(value);
    }
    r.ranking = doc.at("ranking").get<std::vector<int>>();
    const auto predicted = doc.at("predicted").get<std::vector<int>>();
    r.predicted = std::set<int>(predicted.begin(), predicted.end());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedRecord, e.what());
  } catch (const std::logic_error& e) {
    throw Error(ErrorCode::kMalformedRecord, std::string("bad line key: ") + e.what());
  }
  return r;
}

void save_reports(std::span<const SuspicionReport> reports,
                  const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  for (const auto& r : reports) out << report_to_json(r).dump() << '\n';
}

std::vector<SuspicionReport> load_reports(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<SuspicionReport> reports;
  std::string text;
  while (std::getline(in, text)) {
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      reports.push_back(report_from_json(json::parse(text)));
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kMalformedRecord, path.string() + ": " + e.what());
    }
  }
  return reports;
}

}  // namespace linefocus
