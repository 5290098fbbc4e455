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

// Prompt rendering and token-to-line mapping.
//
// Every prompt has the same skeleton:
//
//   Code:
//   1: <code line 1>
//   ...
//   n: <code line n>
//   <blank>
//   <instruction>
//   vulnerable line: ```
//
// The base prompt and every highlighted prompt of a sample share line count
// and code-line positions, so their per-line attention matrices can be
// subtracted row by row.

#ifndef LINEFOCUS_PROMPTING_H_
#define LINEFOCUS_PROMPTING_H_

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "linefocus/corpus.h"

namespace linefocus {

inline constexpr std::string_view kCodeHeader = "Code:";
inline constexpr std::string_view kBaseInstruction =
    "Check whether there are vulnerabilities in the code.";
inline constexpr std::string_view kAnswerCue = "vulnerable line: ```";

enum class LineKind { kHeader, kCode, kBlank, kInstruction };

enum class HighlightStrategy { kLineIndex, kMarkerComment };

std::string_view line_kind_name(LineKind kind);
std::string_view highlight_strategy_name(HighlightStrategy strategy);
HighlightStrategy parse_highlight_strategy(std::string_view name);

struct LineRecord {
  int display_line = 0;  // 1-based prompt line
  size_t start = 0;      // byte offsets [start, end), newline included
  size_t end = 0;
  LineKind kind = LineKind::kHeader;
};

struct PromptOptions {
  // Whether the answer-cue line counts as part of the instruction section.
  bool cue_is_instruction = true;
};

struct PromptLayout {
  std::string text;
  std::vector<LineRecord> line_records;
  std::vector<int> code_line_map;  // [code line - 1] -> prompt line
  std::vector<int> instruction_lines;
  std::optional<int> highlighted_code_line;

  int num_lines() const { return static_cast<int>(line_records.size()); }
  int prompt_line_of(int code_line) const;
  std::string_view line_text(int prompt_line) const;  // without newline
};

std::string highlight_instruction(int code_line);
// Trailing comment used by the marker-comment strategy.
std::string marker_comment(std::string_view language);

PromptLayout build_base_prompt(const CodeSample& sample,
                               const PromptOptions& options = {});

// Throws Error(kHighlightOutOfRange) unless 1 <= line <= sample.loc().
PromptLayout build_highlighted_prompt(
    const CodeSample& sample, int line,
    HighlightStrategy strategy = HighlightStrategy::kLineIndex,
    const PromptOptions& options = {});

struct TokenSpan {
  size_t start = 0;
  size_t end = 0;

  bool operator==(const TokenSpan&) const = default;
};

struct TokenRange {
  size_t begin = 0;
  size_t end = 0;

  size_t size() const { return end - begin; }
  bool operator==(const TokenRange&) const = default;
};

struct LineTokenSpans {
  std::vector<TokenRange> spans;  // [prompt line - 1] -> token range
  size_t num_tokens = 0;
};

// Assigns each token to the prompt line holding its first byte. Empty-span
// tokens before the first non-empty token belong to line 1. Throws
// Error(kOffsetOutOfBounds) for spans outside the text or out of order.
LineTokenSpans map_tokens_to_lines(const PromptLayout& layout,
                                   std::span<const TokenSpan> token_offsets);

}  // namespace linefocus

#endif  // LINEFOCUS_PROMPTING_H_
