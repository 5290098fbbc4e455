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

// Attention providers. A backend tokenizes a prompt and runs the prefill pass
// over it, returning either every causal attention row or the last-token rows
// already summed over heads.

#ifndef LINEFOCUS_BACKEND_H_
#define LINEFOCUS_BACKEND_H_

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "linefocus/prompting.h"

namespace linefocus {

enum class BackendKind { kToy, kDump, kHttp };

std::string_view backend_kind_name(BackendKind kind);
BackendKind parse_backend_kind(std::string_view name);

struct BackendDescriptor {
  int num_layers = 0;
  int num_heads = 0;
  BackendKind kind = BackendKind::kToy;

  bool operator==(const BackendDescriptor&) const = default;
};

struct Tokenization {
  std::vector<TokenSpan> offsets;

  size_t num_tokens() const { return offsets.size(); }
  bool operator==(const Tokenization&) const = default;
};

enum class Granularity { kFull, kLastTokenHeadSummed };

std::string_view granularity_name(Granularity granularity);

// Attention for one prompt. Payload layout:
//   kFull:                [layer][head][query][key], causal zeros stored
//   kLastTokenHeadSummed: [layer][key]
struct AttentionStream {
  BackendDescriptor descriptor;
  size_t num_tokens = 0;
  Granularity granularity = Granularity::kLastTokenHeadSummed;
  std::vector<float> payload;

  size_t expected_payload_size() const;

  // kFull only.
  std::span<const float> row(int layer, int head, size_t query) const;
  std::span<const float> last_token_row(int layer, int head) const {
    return row(layer, head, num_tokens - 1);
  }
  // kLastTokenHeadSummed only.
  std::span<const float> layer_row(int layer) const;
};

// Checks the normalization (and for kFull, causality) invariants. Returns
// one human-readable line per violation; empty means valid. `tolerance`
// applies per row: 1 for kFull rows, num_heads for summed rows.
std::vector<std::string> check_stream_invariants(const AttentionStream& stream,
                                                 double tolerance);

// Identifies a prompt to a backend. Dump backends resolve files by `id`;
// model backends only read `text`.
struct PromptRequest {
  std::string id;
  std::string text;
};

std::string base_prompt_id(std::string_view sample_id);
std::string highlighted_prompt_id(std::string_view sample_id, int line);

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual Tokenization tokenize(const PromptRequest& prompt) const = 0;
};

struct Prefill {
  Tokenization tokens;
  AttentionStream attention;
};

class AttentionBackend : public Tokenizer {
 public:
  virtual BackendDescriptor descriptor() const = 0;
  // Largest prompt, in tokens, the backend accepts; 0 when unbounded.
  virtual size_t max_tokens() const = 0;
  virtual Prefill prefill(const PromptRequest& prompt,
                          Granularity granularity) const = 0;
};

// Full-granularity output is refused above this many tokens.
inline constexpr size_t kMaxFullGranularityTokens = 512;

}  // namespace linefocus

#endif  // LINEFOCUS_BACKEND_H_
