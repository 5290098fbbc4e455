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

#include "linefocus/corpus.h"

#include <fstream>
#include <unordered_set>

#include "json.hpp"
#include "linefocus/backend.h"
#include "linefocus/error.h"
#include "linefocus/prompting.h"
#include "linefocus/random.h"

namespace linefocus {

using nlohmann::json;

std::vector<std::string> split_lines(std::string_view source) {
  std::vector<std::string> lines;
  std::string current;
  for (char c : source) {
    if (c == '\r') continue;
    if (c == '\n') {
      lines.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) lines.push_back(std::move(current));
  return lines;
}

CodeSample make_sample(std::string id, std::string language, std::string source,
                       std::set<int> vuln_lines) {
  CodeSample sample;
  sample.id = std::move(id);
  sample.language = std::move(language);
  sample.lines = split_lines(source);
  sample.source = std::move(source);
  if (vuln_lines.empty()) {
    throw Error(ErrorCode::kEmptyVulnSet, "sample '" + sample.id + "'");
  }
  for (int line : vuln_lines) {
    if (line < 1 || line > sample.loc()) {
      throw Error(ErrorCode::kVulnLineOutOfRange,
                  "sample '" + sample.id + "': line " + std::to_string(line) +
                      " outside [1, " + std::to_string(sample.loc()) + "]");
    }
  }
  sample.vuln_lines = std::move(vuln_lines);
  return sample;
}

namespace {

CodeSample parse_record(const std::string& text, size_t line_number) {
  const std::string where = "line " + std::to_string(line_number);
  json record;
  try {
    record = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kMalformedRecord, where + ": " + e.what());
  }
  if (!record.is_object()) {
    throw Error(ErrorCode::kMalformedRecord, where + ": not an object");
  }
  for (const char* field : {"id", "language", "code"}) {
    if (!record.contains(field) || !record[field].is_string()) {
      throw Error(ErrorCode::kMalformedRecord,
                  where + ": missing string field '" + field + "'");
    }
  }
  if (!record.contains("vuln_lines") || !record["vuln_lines"].is_array()) {
    throw Error(ErrorCode::kMalformedRecord,
                where + ": missing array field 'vuln_lines'");
  }
  std::set<int> vuln_lines;
  for (const auto& v : record["vuln_lines"]) {
    if (!v.is_number_integer()) {
      throw Error(ErrorCode::kMalformedRecord,
                  where + ": vuln_lines must hold integers");
    }
    vuln_lines.insert(v.get<int>());
  }
  return make_sample(record["id"].get<std::string>(),
                     record["language"].get<std::string>(),
                     record["code"].get<std::string>(), std::move(vuln_lines));
}

}  // namespace

std::vector<CodeSample> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<CodeSample> samples;
  std::unordered_set<std::string> seen;
  std::string text;
  size_t line_number = 0;
  while (std::getline(in, text)) {
    ++line_number;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    CodeSample sample = parse_record(text, line_number);
    if (!seen.insert(sample.id).second) {
      throw Error(ErrorCode::kDuplicateId, "'" + sample.id + "'");
    }
    samples.push_back(std::move(sample));
  }
  return samples;
}

void save_dataset(const std::vector<CodeSample>& samples,
                  const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  for (const auto& s : samples) {
    json record = {{"id", s.id},
                   {"language", s.language},
                   {"code", s.source},
                   {"vuln_lines", std::vector<int>(s.vuln_lines.begin(),
                                                   s.vuln_lines.end())}};
    out << record.dump() << '\n';
  }
}

std::vector<CodeSample> filter_by_token_budget(
    const std::vector<CodeSample>& samples, const Tokenizer& tokenizer,
    size_t max_tokens) {
  std::vector<CodeSample> kept;
  for (const auto& sample : samples) {
    if (sample.source.empty() || sample.loc() == 0) {
      throw Error(ErrorCode::kEmptySample, "sample '" + sample.id + "'");
    }
    const PromptLayout layout = build_base_prompt(sample);
    const size_t count =
        tokenizer.tokenize({base_prompt_id(sample.id), layout.text})
            .num_tokens();
    if (count <= max_tokens) kept.push_back(sample);
  }
  return kept;
}

std::vector<std::string> FoldAssignment::fold_members(int fold) const {
  std::vector<std::string> ids;
  for (const auto& [id, f] : assignment) {
    if (f == fold) ids.push_back(id);
  }
  return ids;
}

FoldAssignment make_folds(const std::vector<CodeSample>& samples, int k,
                          uint64_t seed) {
  if (k < 1 || samples.size() < static_cast<size_t>(k)) {
    throw Error(ErrorCode::kInsufficientSamples,
                std::to_string(samples.size()) + " samples for " +
                    std::to_string(k) + " folds");
  }
  std::vector<size_t> order(samples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  FoldAssignment folds;
  folds.k = k;
  folds.seed = seed;
  for (size_t pos = 0; pos < order.size(); ++pos) {
    folds.assignment[samples[order[pos]].id] = static_cast<int>(pos % k);
  }
  return folds;
}

void save_folds(const FoldAssignment& folds,
                const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  json doc = {{"k", folds.k}, {"seed", folds.seed},
              {"assignment", folds.assignment}};
  out << doc.dump(2) << '\n';
}

FoldAssignment load_folds(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  FoldAssignment folds;
  try {
    const json doc = json::parse(in);
    folds.k = doc.at("k").get<int>();
    folds.seed = doc.at("seed").get<uint64_t>();
    folds.assignment = doc.at("assignment").get<std::map<std::string, int>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedRecord, path.string() + ": " + e.what());
  }
  for (const auto& [id, f] : folds.assignment) {
    if (f < 0 || f >= folds.k) {
      throw Error(ErrorCode::kMalformedRecord,
                  "fold index out of range for '" + id + "'");
    }
  }
  return folds;
}

}  // namespace linefocus
