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

#include <cstring>
#include <fstream>
#include <string>

#include "doctest.h"
#include "expect_error.h"
#include "linefocus/attention_dump.h"
#include "linefocus/toy_transformer.h"
#include "synthetic.h"

namespace linefocus {
namespace {

using testing::error_code_of;
using testing::TempDir;

// Little-endian encoding written byte by byte, independent of the library.
void append_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_f32(std::string& out, float f) {
  uint32_t bits;
  std::memcpy(&bits, &f, 4);
  append_u32(out, bits);
}

std::string encode(uint32_t version, uint32_t kind, uint32_t layers, uint32_t heads,
                   uint32_t tokens, const std::vector<float>& payload) {
  std::string out = "ATTNDMP1";
  for (uint32_t v : {version, kind, layers, heads, tokens}) append_u32(out, v);
  for (float f : payload) append_f32(out, f);
  return out;
}

void write_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream(path, std::ios::binary) << bytes;
}

Tokenization byte_tokenization(size_t n) {
  Tokenization tok;
  tok.offsets.push_back({0, 0});
  for (size_t i = 0; i + 1 < n; ++i) tok.offsets.push_back({i, i + 1});
  return tok;
}

AttentionStream reduced_stream(int layers, int heads, size_t tokens) {
  AttentionStream s;
  s.descriptor = {layers, heads, BackendKind::kDump};
  s.num_tokens = tokens;
  s.granularity = Granularity::kLastTokenHeadSummed;
  for (int l = 0; l < layers; ++l)
    for (size_t k = 0; k < tokens; ++k)
      s.payload.push_back(static_cast<float>(heads) / static_cast<float>(tokens));
  return s;
}

TEST_CASE("writer output matches a hand-built byte image") {
  TempDir dir("dump");
  const AttentionStream s = reduced_stream(2, 3, 4);
  write_attention_dump(s, byte_tokenization(4), dir / "a.attn");
  const std::string bytes = testing::read_file(dir / "a.attn");
  CHECK(bytes == encode(1, 1, 2, 3, 4, s.payload));
  CHECK(bytes.size() - kDumpHeaderBytes == 2u * 4u * 4u);
  CHECK(std::filesystem::exists(dir / "a.tokens.json"));
}

TEST_CASE("full and reduced dumps round trip bit for bit") {
  TempDir dir("dump");
  Rng rng(5);
  const AttentionStream full = testing::random_full_stream(rng, 3, 2, 9);
  write_attention_dump(full, byte_tokenization(9), dir / "f.attn");
  const auto [tok, back] = read_attention_dump(dir / "f.attn");
  CHECK(tok == byte_tokenization(9));
  CHECK(back.payload == full.payload);
  CHECK(back.granularity == Granularity::kFull);
  CHECK(back.descriptor.num_layers == 3);
  CHECK(back.descriptor.num_heads == 2);

  const AttentionStream reduced = reduced_stream(4, 2, 6);
  write_attention_dump(reduced, byte_tokenization(6), dir / "r.attn");
  CHECK(read_attention_dump(dir / "r.attn").second.payload == reduced.payload);
}

TEST_CASE("reduced reading of a full dump sums the last rows over heads") {
  TempDir dir("dump");
  Rng rng(9);
  const AttentionStream full = testing::random_full_stream(rng, 2, 3, 7);
  write_attention_dump(full, byte_tokenization(7), dir / "f.attn");
  const auto [tok, reduced] = read_attention_dump_reduced(dir / "f.attn");
  REQUIRE(reduced.granularity == Granularity::kLastTokenHeadSummed);
  REQUIRE(reduced.payload.size() == 2u * 7u);
  for (int l = 0; l < 2; ++l)
    for (size_t k = 0; k < 7; ++k) {
      double sum = 0.0;
      for (int h = 0; h < 3; ++h) sum += full.last_token_row(l, h)[k];
      CHECK(reduced.layer_row(l)[k] == doctest::Approx(sum).epsilon(1e-6));
    }
  CHECK(check_stream_invariants(reduced, 1e-5).empty());
}

TEST_CASE("header validation") {
  TempDir dir("dump");
  const std::vector<float> payload(2 * 3, 0.5f);
  write_token_map(byte_tokenization(3), dir / "x.tokens.json");

  std::string bad = encode(1, 1, 2, 1, 3, payload);
  std::memcpy(bad.data(), "XXXXXXXX", 8);
  write_bytes(dir / "x.attn", bad);
  CHECK(error_code_of([&] { read_attention_dump(dir / "x.attn"); }) == ErrorCode::kBadMagic);

  write_bytes(dir / "x.attn", encode(2, 1, 2, 1, 3, payload));
  CHECK(error_code_of([&] { read_attention_dump(dir / "x.attn"); }) ==
        ErrorCode::kVersionUnsupported);

  write_bytes(dir / "x.attn", encode(1, 7, 2, 1, 3, payload));
  CHECK(error_code_of([&] { read_attention_dump(dir / "x.attn"); }) ==
        ErrorCode::kVersionUnsupported);

  std::string short_payload = encode(1, 1, 2, 1, 3, payload);
  short_payload.resize(short_payload.size() - 1);
  write_bytes(dir / "x.attn", short_payload);
  CHECK(error_code_of([&] { read_attention_dump(dir / "x.attn"); }) ==
        ErrorCode::kTruncatedPayload);
  CHECK(error_code_of([&] { read_attention_dump_reduced(dir / "x.attn"); }) ==
        ErrorCode::kTruncatedPayload);

  write_bytes(dir / "x.attn", encode(1, 1, 2, 1, 3, payload) + "pad!");
  CHECK(error_code_of([&] { read_attention_dump(dir / "x.attn"); }) ==
        ErrorCode::kTruncatedPayload);

  write_bytes(dir / "x.attn", "ATTNDMP1\x01");
  CHECK(error_code_of([&] { read_attention_dump(dir / "x.attn"); }) ==
        ErrorCode::kTruncatedPayload);

  CHECK(error_code_of([&] { read_attention_dump(dir / "none.attn"); }) ==
        ErrorCode::kDumpMissing);
}

TEST_CASE("token map must agree with the dump") {
  TempDir dir("dump");
  write_bytes(dir / "x.attn", encode(1, 1, 1, 1, 3, {0.2f, 0.3f, 0.5f}));
  write_token_map(byte_tokenization(4), dir / "x.tokens.json");
  CHECK(error_code_of([&] { read_attention_dump(dir / "x.attn"); }) ==
        ErrorCode::kTruncatedPayload);
}

TEST_CASE("dump backend serves toy prefills bit-exactly") {
  TempDir dir("dump");
  const ToyBackend toy(
      ToyModelParams::initialize({.seed = 1, .d_model = 8, .num_layers = 2, .num_heads = 2}));
  const PromptRequest prompt{"s1.base", "Code:\n1: f();\n"};
  const Prefill reduced = toy.prefill(prompt, Granularity::kLastTokenHeadSummed);
  write_attention_dump(reduced.attention, reduced.tokens, dir / "s1.base.attn");

  DumpBackend backend(dir.path());
  CHECK(backend.descriptor().num_layers == 0);
  CHECK(backend.tokenize(prompt) == reduced.tokens);
  const Prefill served = backend.prefill(prompt, Granularity::kLastTokenHeadSummed);
  CHECK(served.attention.payload == reduced.attention.payload);
  CHECK(backend.descriptor() == BackendDescriptor{2, 2, BackendKind::kDump});
  CHECK(backend.dump_path("s1.base") == dir / "s1.base.attn");

  CHECK(error_code_of([&] { backend.prefill(prompt, Granularity::kFull); }) ==
        ErrorCode::kGranularityUnsupported);
  CHECK(error_code_of([&] {
          backend.prefill({"s1.L1", prompt.text}, Granularity::kLastTokenHeadSummed);
        }) == ErrorCode::kDumpMissing);
  CHECK(error_code_of([&] {
          backend.prefill({"s1.base", "Co"}, Granularity::kLastTokenHeadSummed);
        }) == ErrorCode::kProtocolError);
}

TEST_CASE("dump backend rejects a descriptor change") {
  TempDir dir("dump");
  write_attention_dump(reduced_stream(2, 1, 3), byte_tokenization(3), dir / "a.attn");
  write_attention_dump(reduced_stream(3, 1, 3), byte_tokenization(3), dir / "b.attn");
  DumpBackend backend(dir.path());
  backend.prefill({"a", "ab"}, Granularity::kLastTokenHeadSummed);
  CHECK(error_code_of([&] {
          backend.prefill({"b", "ab"}, Granularity::kLastTokenHeadSummed);
        }) == ErrorCode::kProtocolError);
}

}  // namespace
}  // namespace linefocus
