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

#include "linefocus/prompting.h"

#include "linefocus/error.h"

namespace linefocus {

std::string_view line_kind_name(LineKind kind) {
  switch (kind) {
    case LineKind::kHeader: return "header";
    case LineKind::kCode: return "code";
    case LineKind::kBlank: return "blank";
    case LineKind::kInstruction: return "instruction";
  }
  return "header";
}

std::string_view highlight_strategy_name(HighlightStrategy strategy) {
  return strategy == HighlightStrategy::kLineIndex ? "line_index"
                                                   : "marker_comment";
}

HighlightStrategy parse_highlight_strategy(std::string_view name) {
  if (name == "line_index") return HighlightStrategy::kLineIndex;
  if (name == "marker_comment") return HighlightStrategy::kMarkerComment;
  throw Error(ErrorCode::kConfig,
              "unknown highlight strategy '" + std::string(name) + "'");
}

int PromptLayout::prompt_line_of(int code_line) const {
  if (code_line < 1 || code_line > static_cast<int>(code_line_map.size())) {
    throw Error(ErrorCode::kHighlightOutOfRange,
                "code line " + std::to_string(code_line));
  }
  return code_line_map[code_line - 1];
}

std::string_view PromptLayout::line_text(int prompt_line) const {
  const LineRecord& rec = line_records.at(prompt_line - 1);
  std::string_view view(text);
  view = view.substr(rec.start, rec.end - rec.start);
  if (!view.empty() && view.back() == '\n') view.remove_suffix(1);
  return view;
}

std::string highlight_instruction(int code_line) {
  return "Pay attention to line " + std::to_string(code_line) +
         ". Check whether there are vulnerabilities in it.";
}

std::string marker_comment(std::string_view language) {
  if (language == "python" || language == "py") {
    return "# Pay attention to this";
  }
  return "// Pay attention to this";
}

namespace {

class LayoutBuilder {
 public:
  void add(std::string_view content, LineKind kind) {
    if (!layout_.line_records.empty()) layout_.text.push_back('\n');
    const size_t start = layout_.text.size();
    layout_.text.append(content);
    const int display = static_cast<int>(layout_.line_records.size()) + 1;
    // Spans own their trailing newline; it is attached when the next line
    // is added.
    if (!layout_.line_records.empty()) layout_.line_records.back().end += 1;
    layout_.line_records.push_back({display, start, layout_.text.size(), kind});
    if (kind == LineKind::kCode) layout_.code_line_map.push_back(display);
  }

  void mark_instruction() {
    layout_.instruction_lines.push_back(layout_.num_lines());
  }

  PromptLayout take() { return std::move(layout_); }

 private:
  PromptLayout layout_;
};

PromptLayout render(const CodeSample& sample, std::string_view instruction,
                    int marked_line, std::string_view marker,
                    const PromptOptions& options) {
  LayoutBuilder b;
  b.add(kCodeHeader, LineKind::kHeader);
  for (int i = 1; i <= sample.loc(); ++i) {
    std::string content = std::to_string(i) + ": " + sample.lines[i - 1];
    if (i == marked_line) {
      content.push_back(' ');
      content.append(marker);
    }
    b.add(content, LineKind::kCode);
  }
  b.add("", LineKind::kBlank);
  b.add(instruction, LineKind::kInstruction);
  b.mark_instruction();
  b.add(kAnswerCue, LineKind::kInstruction);
  if (options.cue_is_instruction) b.mark_instruction();
  return b.take();
}

}  // namespace

PromptLayout build_base_prompt(const CodeSample& sample,
                               const PromptOptions& options) {
  return render(sample, kBaseInstruction, 0, "", options);
}

PromptLayout build_highlighted_prompt(const CodeSample& sample, int line,
                                      HighlightStrategy strategy,
                                      const PromptOptions& options) {
  if (line < 1 || line > sample.loc()) {
    throw Error(ErrorCode::kHighlightOutOfRange,
                "line " + std::to_string(line) + " outside [1, " +
                    std::to_string(sample.loc()) + "] in '" + sample.id + "'");
  }
  PromptLayout layout;
  if (strategy == HighlightStrategy::kLineIndex) {
    layout = render(sample, highlight_instruction(line), 0, "", options);
  } else {
    layout = render(sample, kBaseInstruction, line,
                    marker_comment(sample.language), options);
  }
  layout.highlighted_code_line = line;
  return layout;
}

LineTokenSpans map_tokens_to_lines(const PromptLayout& layout,
                                   std::span<const TokenSpan> token_offsets) {
  const size_t text_size = layout.text.size();
  const int num_lines = layout.num_lines();
  LineTokenSpans result;
  result.num_tokens = token_offsets.size();
  result.spans.assign(num_lines, TokenRange{});

  std::vector<int> line_of(token_offsets.size(), 1);
  size_t prev_end = 0;
  int line = 1;
  bool seen_content = false;
  for (size_t t = 0; t < token_offsets.size(); ++t) {
    const TokenSpan& span = token_offsets[t];
    if (span.start > span.end || span.end > text_size ||
        span.start < prev_end) {
      throw Error(ErrorCode::kOffsetOutOfBounds,
                  "token " + std::to_string(t) + " span [" +
                      std::to_string(span.start) + ", " +
                      std::to_string(span.end) + ") in text of " +
                      std::to_string(text_size) + " bytes");
    }
    prev_end = span.end;
    if (span.start == span.end && !seen_content) {
      line_of[t] = 1;
      continue;
    }
    seen_content = true;
    // Offsets are ordered, so the owning line only moves forward.
    while (line < num_lines &&
           span.start >= layout.line_records[line - 1].end) {
      ++line;
    }
    line_of[t] = line;
  }

  for (size_t t = 0; t < line_of.size(); ++t) {
    TokenRange& r = result.spans[line_of[t] - 1];
    if (r.size() == 0) r.begin = t;
    r.end = t + 1;
  }
  // Lines without tokens get an empty range at the next token position.
  size_t cursor = 0;
  for (auto& r : result.spans) {
    if (r.size() == 0) {
      r.begin = r.end = cursor;
    } else {
      cursor = r.end;
    }
  }
  return result;
}

}  // namespace linefocus
