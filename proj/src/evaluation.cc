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

#include "linefocus/evaluation.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "linefocus/error.h"

namespace linefocus {

using nlohmann::json;

namespace {

const std::set<int>& truth_for(const TruthMap& truth, const std::string& id) {
  auto it = truth.find(id);
  if (it == truth.end()) throw Error(ErrorCode::kMissingTruth, "'" + id + "'");
  return it->second;
}

bool hit_at(const SuspicionReport& r, const std::set<int>& true_lines, int n) {
  const size_t limit = std::min(r.ranking.size(), static_cast<size_t>(std::max(n, 0)));
  for (size_t i = 0; i < limit; ++i) {
    if (true_lines.contains(r.ranking[i])) return true;
  }
  return false;
}

std::string fmt(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

std::string edge_text(double e) {
  if (std::isinf(e)) return "inf";
  return fmt(e, 0);
}

}  // namespace

TruthMap truth_from(std::span<const CodeSample> samples) {
  TruthMap truth;
  for (const auto& s : samples) truth[s.id] = s.vuln_lines;
  return truth;
}

std::string_view averaging_name(Averaging averaging) {
  return averaging == Averaging::kMicro ? "micro" : "macro";
}

Averaging parse_averaging(std::string_view name) {
  if (name == "micro") return Averaging::kMicro;
  if (name == "macro") return Averaging::kMacro;
  throw Error(ErrorCode::kConfig, "unknown averaging '" + std::string(name) + "'");
}

double f1_score(double precision, double recall) {
  if (precision + recall <= 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

MetricReport precision_recall_f1(std::span<const SuspicionReport> reports,
                                 const TruthMap& truth, Averaging averaging) {
  MetricReport m;
  m.sample_count = reports.size();
  size_t tp = 0, fp = 0, fn = 0;
  double p_sum = 0.0, r_sum = 0.0;
  for (const auto& r : reports) {
    const auto& true_lines = truth_for(truth, r.sample_id);
    size_t s_tp = 0;
    for (int line : r.predicted) {
      if (true_lines.contains(line)) ++s_tp;
    }
    const size_t s_fp = r.predicted.size() - s_tp;
    const size_t s_fn = true_lines.size() - s_tp;
    tp += s_tp;
    fp += s_fp;
    fn += s_fn;
    p_sum += r.predicted.empty() ? 0.0 : 100.0 * s_tp / r.predicted.size();
    r_sum += true_lines.empty() ? 0.0 : 100.0 * s_tp / true_lines.size();
  }
  if (averaging == Averaging::kMicro) {
    m.precision = tp + fp == 0 ? 0.0 : 100.0 * tp / static_cast<double>(tp + fp);
    m.recall = tp + fn == 0 ? 0.0 : 100.0 * tp / static_cast<double>(tp + fn);
  } else if (!reports.empty()) {
    m.precision = p_sum / reports.size();
    m.recall = r_sum / reports.size();
  }
  m.f1 = f1_score(m.precision, m.recall);
  return m;
}

std::map<int, double> top_n(std::span<const SuspicionReport> reports,
                            const TruthMap& truth, std::span<const int> n_values) {
  std::map<int, double> rates;
  for (int n : n_values) {
    size_t hits = 0;
    for (const auto& r : reports) {
      if (hit_at(r, truth_for(truth, r.sample_id), n)) ++hits;
    }
    rates[n] = reports.empty() ? 0.0 : 100.0 * hits / static_cast<double>(reports.size());
  }
  return rates;
}

MetricReport evaluate(std::span<const SuspicionReport> reports,
                      const TruthMap& truth, Averaging averaging) {
  MetricReport m = precision_recall_f1(reports, truth, averaging);
  m.top_n = top_n(reports, truth);
  return m;
}

std::vector<double> default_bucket_edges() {
  return {0, 40, 80, 120, 200, 300, kInf};
}

LocBucketReport loc_bucket_accuracy(std::span<const CodeSample> samples,
                                    std::span<const SuspicionReport> reports,
                                    const TruthMap& truth,
                                    std::span<const double> bucket_edges) {
  if (bucket_edges.empty()) throw Error(ErrorCode::kEmptyBucketEdges, "no edges");
  for (size_t i = 1; i < bucket_edges.size(); ++i) {
    if (!(bucket_edges[i] > bucket_edges[i - 1])) {
      throw Error(ErrorCode::kInvalidBucketEdges, "edges must strictly increase");
    }
  }
  LocBucketReport out;
  for (size_t i = 0; i + 1 < bucket_edges.size(); ++i) {
    out.buckets.push_back({bucket_edges[i], bucket_edges[i + 1]});
  }
  if (!std::isinf(bucket_edges.back())) {
    out.buckets.push_back({bucket_edges.back(), kInf});
  }

  std::map<std::string, int> loc_of;
  for (const auto& s : samples) loc_of[s.id] = s.loc();
  for (const auto& r : reports) {
    auto it = loc_of.find(r.sample_id);
    if (it == loc_of.end()) {
      throw Error(ErrorCode::kMissingTruth, "no sample for '" + r.sample_id + "'");
    }
    const double loc = it->second;
    auto bucket = std::find_if(out.buckets.begin(), out.buckets.end(),
                               [&](const LocBucket& b) { return loc >= b.lo && loc < b.hi; });
    if (bucket == out.buckets.end()) {
      throw Error(ErrorCode::kInvalidBucketEdges,
                  "'" + r.sample_id + "' has " + std::to_string(it->second) +
                      " lines, below the first edge");
    }
    ++bucket->count;
    if (hit_at(r, truth_for(truth, r.sample_id), 1)) ++bucket->hits;
    ++out.sample_count;
  }
  for (auto& b : out.buckets) {
    b.top1 = b.count == 0 ? 0.0 : 100.0 * b.hits / static_cast<double>(b.count);
  }
  return out;
}

json metrics_to_json(const MetricReport& report) {
  json top = json::object();
  for (const auto& [n, rate] : report.top_n) top["top" + std::to_string(n)] = rate;
  return json{{"precision", report.precision},
              {"recall", report.recall},
              {"f1", report.f1},
              {"top_n", top},
              {"sample_count", report.sample_count}};
}

std::string metrics_table(const MetricReport& report) {
  std::vector<std::pair<std::string, std::string>> cols;
  for (const auto& [n, rate] : report.top_n) {
    cols.emplace_back("Top-" + std::to_string(n), fmt(rate, 1));
  }
  cols.emplace_back("P", fmt(report.precision, 1));
  cols.emplace_back("R", fmt(report.recall, 1));
  cols.emplace_back("F1", fmt(report.f1, 1));
  cols.emplace_back("Samples", std::to_string(report.sample_count));
  std::ostringstream head, body;
  for (const auto& [name, value] : cols) {
    const size_t width = std::max(name.size(), value.size()) + 2;
    head << std::string(width - name.size(), ' ') << name;
    body << std::string(width - value.size(), ' ') << value;
  }
  return head.str() + "\n" + body.str() + "\n";
}

std::string loc_buckets_csv(const LocBucketReport& report) {
  std::ostringstream os;
  os << "lo,hi,count,hits,top1\n";
  for (const auto& b : report.buckets) {
    os << edge_text(b.lo) << ',' << edge_text(b.hi) << ',' << b.count << ','
       << b.hits << ',' << fmt(b.top1, 4) << '\n';
  }
  return os.str();
}

}  // namespace linefocus
