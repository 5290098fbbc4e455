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

// Vulnerability datasets: JSONL loading, token-budget filtering and k-fold
// assignment.
//
// Dataset records are one JSON object per line:
//   {"id": str, "language": str, "code": str, "vuln_lines": [int...]}
// Line numbers are 1-based over the code split on "\n" (with "\r" removed);
// a trailing newline does not open an extra empty line.

#ifndef LINEFOCUS_CORPUS_H_
#define LINEFOCUS_CORPUS_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace linefocus {

class Tokenizer;

struct CodeSample {
  std::string id;
  std::string language;
  std::string source;
  std::vector<std::string> lines;
  std::set<int> vuln_lines;

  int loc() const { return static_cast<int>(lines.size()); }
};

// Splits program text into lines using the dataset line convention.
std::vector<std::string> split_lines(std::string_view source);

// Builds and validates a sample. Throws Error with kVulnLineOutOfRange or
// kEmptyVulnSet.
CodeSample make_sample(std::string id, std::string language, std::string source,
                       std::set<int> vuln_lines);

std::vector<CodeSample> load_dataset(const std::filesystem::path& path);
void save_dataset(const std::vector<CodeSample>& samples,
                  const std::filesystem::path& path);

// Keeps the samples whose base prompt tokenizes to at most `max_tokens`.
std::vector<CodeSample> filter_by_token_budget(
    const std::vector<CodeSample>& samples, const Tokenizer& tokenizer,
    size_t max_tokens = 4000);

struct FoldAssignment {
  int k = 0;
  uint64_t seed = 0;
  std::map<std::string, int> assignment;

  std::vector<std::string> fold_members(int fold) const;
};

FoldAssignment make_folds(const std::vector<CodeSample>& samples, int k = 5,
                          uint64_t seed = 0);

void save_folds(const FoldAssignment& folds, const std::filesystem::path& path);
FoldAssignment load_folds(const std::filesystem::path& path);

}  // namespace linefocus

#endif  // LINEFOCUS_CORPUS_H_
