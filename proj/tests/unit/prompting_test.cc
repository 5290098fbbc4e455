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

#include <string>
#include <vector>

#include "doctest.h"
#include "expect_error.h"
#include "linefocus/prompting.h"
#include "linefocus/random.h"
#include "synthetic.h"

namespace linefocus {
namespace {

using testing::error_code_of;

CodeSample two_lines() { return make_sample("s", "c", "a();\nb();", {2}); }

CodeSample ten_lines() {
  std::string code;
  for (int i = 1; i <= 10; ++i) code += "stmt" + std::to_string(i) + "();\n";
  return make_sample("t", "c", code, {8});
}

// Begin token with an empty span, then one token per byte.
std::vector<TokenSpan> byte_tokens(const std::string& text) {
  std::vector<TokenSpan> spans{{0, 0}};
  for (size_t i = 0; i < text.size(); ++i) spans.push_back({i, i + 1});
  return spans;
}

// Line that holds byte `offset`, found by counting newlines before it.
int line_by_counting(const std::string& text, size_t offset) {
  int line = 1;
  for (size_t i = 0; i < offset; ++i) line += text[i] == '\n';
  return line;
}

TEST_CASE("base prompt skeleton") {
  const PromptLayout layout = build_base_prompt(two_lines());
  CHECK(layout.text ==
        "Code:\n1: a();\n2: b();\n\n"
        "Check whether there are vulnerabilities in the code.\n"
        "vulnerable line: ```");
  REQUIRE(layout.num_lines() == 6);
  CHECK(layout.code_line_map == std::vector<int>{2, 3});
  CHECK(layout.instruction_lines == std::vector<int>{5, 6});
  CHECK(layout.line_records[0].kind == LineKind::kHeader);
  CHECK(layout.line_records[3].kind == LineKind::kBlank);
  CHECK(layout.text.find("Pay attention to") == std::string::npos);
  CHECK_FALSE(layout.highlighted_code_line.has_value());
}

TEST_CASE("line records own their newline") {
  const PromptLayout layout = build_base_prompt(two_lines());
  CHECK(layout.line_records[1].start == 6);
  CHECK(layout.line_records[1].end == 14);
  CHECK(layout.line_text(2) == "1: a();");
  CHECK(layout.line_records.back().end == layout.text.size());
}

TEST_CASE("cue line can be left out of the instruction section") {
  PromptOptions options;
  options.cue_is_instruction = false;
  CHECK(build_base_prompt(two_lines(), options).instruction_lines ==
        std::vector<int>{5});
}

TEST_CASE("highlighted prompt names the line") {
  const PromptLayout layout = build_highlighted_prompt(ten_lines(), 8);
  const int instruction = layout.instruction_lines.front();
  CHECK(layout.line_text(instruction) ==
        "Pay attention to line 8. Check whether there are vulnerabilities in it.");
  CHECK(layout.highlighted_code_line == 8);
  CHECK(layout.prompt_line_of(8) == 9);
}

TEST_CASE("highlight out of range") {
  CHECK(error_code_of([] { build_highlighted_prompt(two_lines(), 0); }) ==
        ErrorCode::kHighlightOutOfRange);
  CHECK(error_code_of([] { build_highlighted_prompt(two_lines(), 3); }) ==
        ErrorCode::kHighlightOutOfRange);
  CHECK(error_code_of([] { build_base_prompt(two_lines()).prompt_line_of(3); }) ==
        ErrorCode::kHighlightOutOfRange);
}

TEST_CASE("marker comment sits on the highlighted code line") {
  const CodeSample sample = ten_lines();
  const PromptLayout base = build_base_prompt(sample);
  const PromptLayout marked =
      build_highlighted_prompt(sample, 3, HighlightStrategy::kMarkerComment);
  CHECK(marked.line_text(marked.prompt_line_of(3)) ==
        "3: stmt3(); // Pay attention to this");
  for (int line = 1; line <= sample.loc(); ++line) {
    if (line == 3) continue;
    CHECK(marked.line_text(marked.prompt_line_of(line)) ==
          base.line_text(base.prompt_line_of(line)));
  }
  for (int line : base.instruction_lines) {
    CHECK(marked.line_text(line) == base.line_text(line));
  }
  const auto py = make_sample("p", "python", "x = 1\ny = 2", {1});
  CHECK(build_highlighted_prompt(py, 1, HighlightStrategy::kMarkerComment)
            .line_text(2) == "1: x = 1 # Pay attention to this");
}

TEST_CASE("strategy names") {
  CHECK(parse_highlight_strategy("line_index") == HighlightStrategy::kLineIndex);
  CHECK(parse_highlight_strategy("marker_comment") ==
        HighlightStrategy::kMarkerComment);
  CHECK(highlight_strategy_name(HighlightStrategy::kMarkerComment) ==
        "marker_comment");
  CHECK(error_code_of([] { parse_highlight_strategy("bold"); }) == ErrorCode::kConfig);
}

TEST_CASE("base and highlighted layouts align for every line and strategy") {
  for (const auto& sample : testing::synthetic_corpus(15, 21, 1, 20)) {
    const PromptLayout base = build_base_prompt(sample);
    for (int line = 1; line <= sample.loc(); ++line) {
      for (auto strategy :
           {HighlightStrategy::kLineIndex, HighlightStrategy::kMarkerComment}) {
        const PromptLayout h = build_highlighted_prompt(sample, line, strategy);
        CHECK(h.num_lines() == base.num_lines());
        CHECK(h.code_line_map == base.code_line_map);
        CHECK(h.instruction_lines == base.instruction_lines);
      }
    }
  }
}

TEST_CASE("code lines read back from the layout") {
  for (const auto& sample : testing::synthetic_corpus(10, 5, 1, 15)) {
    const PromptLayout layout = build_base_prompt(sample);
    for (int line = 1; line <= sample.loc(); ++line) {
      const LineRecord& record = layout.line_records[layout.prompt_line_of(line) - 1];
      std::string text = layout.text.substr(record.start, record.end - record.start);
      if (!text.empty() && text.back() == '\n') text.pop_back();
      const std::string prefix = std::to_string(line) + ": ";
      REQUIRE(text.rfind(prefix, 0) == 0);
      CHECK(text.substr(prefix.size()) == sample.lines[line - 1]);
    }
  }
}

TEST_CASE("a token straddling a newline belongs to the earlier line") {
  const PromptLayout layout = build_base_prompt(two_lines());
  // "Code:\n" is line 1; the token covers "();\n2" across lines 2 and 3.
  const size_t start = layout.line_records[1].start + 4;
  const std::vector<TokenSpan> spans{{0, start}, {start, start + 5},
                                     {start + 5, layout.text.size()}};
  const LineTokenSpans map = map_tokens_to_lines(layout, spans);
  CHECK(map.spans[1].begin <= 1);
  CHECK(map.spans[1].end == 2);
  CHECK(map.spans[2] == TokenRange{2, 3});
  CHECK(line_by_counting(layout.text, start) == 2);
}

TEST_CASE("single-line prompt maps every token to line 1") {
  PromptLayout layout;
  layout.text = "hello";
  layout.line_records.push_back({1, 0, 5, LineKind::kHeader});
  const auto map = map_tokens_to_lines(layout, byte_tokens(layout.text));
  REQUIRE(map.spans.size() == 1);
  CHECK(map.spans[0] == TokenRange{0, 6});
}

TEST_CASE("leading empty-span tokens go to line 1") {
  const PromptLayout layout = build_base_prompt(two_lines());
  const std::vector<TokenSpan> spans{{0, 0}, {0, 0}, {0, 6}, {6, 14}};
  const auto map = map_tokens_to_lines(layout, spans);
  CHECK(map.spans[0] == TokenRange{0, 3});
  CHECK(map.spans[1] == TokenRange{3, 4});
}

TEST_CASE("offsets out of bounds or out of order") {
  const PromptLayout layout = build_base_prompt(two_lines());
  const size_t n = layout.text.size();
  CHECK(error_code_of([&] {
          map_tokens_to_lines(layout, std::vector<TokenSpan>{{0, n + 1}});
        }) == ErrorCode::kOffsetOutOfBounds);
  CHECK(error_code_of([&] {
          map_tokens_to_lines(layout, std::vector<TokenSpan>{{4, 6}, {2, 3}});
        }) == ErrorCode::kOffsetOutOfBounds);
  CHECK(error_code_of([&] {
          map_tokens_to_lines(layout, std::vector<TokenSpan>{{5, 3}});
        }) == ErrorCode::kOffsetOutOfBounds);
}

TEST_CASE("token-to-line mapping agrees with newline counting and partitions") {
  Rng rng(77);
  for (const auto& sample : testing::synthetic_corpus(20, 13, 1, 12)) {
    const PromptLayout layout =
        build_highlighted_prompt(sample, 1 + static_cast<int>(rng.bounded(sample.loc())));
    // Random contiguous tokenization: a begin token, then chunks of 1..6 bytes.
    std::vector<TokenSpan> spans{{0, 0}};
    for (size_t pos = 0; pos < layout.text.size();) {
      const size_t len = std::min<size_t>(1 + rng.bounded(6), layout.text.size() - pos);
      spans.push_back({pos, pos + len});
      pos += len;
    }
    const auto map = map_tokens_to_lines(layout, spans);
    CHECK(map.num_tokens == spans.size());
    size_t next = 0;
    for (size_t line = 0; line < map.spans.size(); ++line) {
      const TokenRange& r = map.spans[line];
      CHECK(r.begin == next);
      next = r.end;
      for (size_t t = r.begin; t < r.end; ++t) {
        const int expected =
            spans[t].start == spans[t].end ? 1 : line_by_counting(layout.text, spans[t].start);
        CHECK(expected == static_cast<int>(line) + 1);
      }
    }
    CHECK(next == spans.size());
  }
}

}  // namespace
}  // namespace linefocus
