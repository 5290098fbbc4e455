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

// ATTNDMP1 attention dumps.
//
// Binary, little-endian:
//   char[8] magic = "ATTNDMP1"
//   u32 version = 1
//   u32 kind        0 = full, 1 = last_token_head_summed
//   u32 num_layers
//   u32 num_heads
//   u32 num_tokens
//   f32 payload     kind 0: [layer][head][query][key]; kind 1: [layer][key]
//
// Token offsets live next to the dump in a JSON file with the extension
// replaced by ".tokens.json": {"tokens": [{"start": int, "end": int}...]}.

#ifndef LINEFOCUS_ATTENTION_DUMP_H_
#define LINEFOCUS_ATTENTION_DUMP_H_

#include <filesystem>
#include <mutex>
#include <utility>

#include "linefocus/backend.h"

namespace linefocus {

inline constexpr char kDumpMagic[8] = {'A', 'T', 'T', 'N', 'D', 'M', 'P', '1'};
inline constexpr uint32_t kDumpVersion = 1;
inline constexpr size_t kDumpHeaderBytes = 28;

std::filesystem::path token_map_path(const std::filesystem::path& dump_path);

void write_attention_dump(const AttentionStream& stream,
                          const Tokenization& tokens,
                          const std::filesystem::path& path);

// Throws kDumpMissing, kBadMagic, kVersionUnsupported or kTruncatedPayload.
std::pair<Tokenization, AttentionStream> read_attention_dump(
    const std::filesystem::path& path);

// Reads a dump and returns last-token, head-summed attention. For kind 0
// files only the final query row of each (layer, head) block is read from
// disk, accumulated in double precision.
std::pair<Tokenization, AttentionStream> read_attention_dump_reduced(
    const std::filesystem::path& path);

void write_token_map(const Tokenization& tokens,
                     const std::filesystem::path& path);
Tokenization read_token_map(const std::filesystem::path& path);

// Serves prefill results from <dir>/<prompt id>.attn.
class DumpBackend : public AttentionBackend {
 public:
  explicit DumpBackend(std::filesystem::path dir);

  // Taken from the first dump read; (0, 0) before that.
  BackendDescriptor descriptor() const override;
  size_t max_tokens() const override { return 0; }
  Tokenization tokenize(const PromptRequest& prompt) const override;
  Prefill prefill(const PromptRequest& prompt,
                  Granularity granularity) const override;

  std::filesystem::path dump_path(const std::string& prompt_id) const;

 private:
  std::filesystem::path dir_;
  mutable std::mutex mu_;
  mutable BackendDescriptor descriptor_{0, 0, BackendKind::kDump};
};

}  // namespace linefocus

#endif  // LINEFOCUS_ATTENTION_DUMP_H_
