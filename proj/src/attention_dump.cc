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

#include "linefocus/attention_dump.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <mutex>

#include "json.hpp"
#include "linefocus/error.h"

namespace linefocus {

using nlohmann::json;

namespace {

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t get_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<uint32_t>(f)); }

float get_f32(const unsigned char* p) { return std::bit_cast<float>(get_u32(p)); }

struct Header {
  Granularity granularity;
  BackendDescriptor descriptor;
  size_t num_tokens;
  size_t payload_values;
};

Header parse_header(const unsigned char* raw, size_t file_size,
                    const std::filesystem::path& path) {
  const std::string where = path.string();
  if (file_size < sizeof(kDumpMagic) ||
      std::memcmp(raw, kDumpMagic, sizeof(kDumpMagic)) != 0) {
    throw Error(ErrorCode::kBadMagic, where);
  }
  if (file_size < kDumpHeaderBytes) {
    throw Error(ErrorCode::kTruncatedPayload, where + ": short header");
  }
  const uint32_t version = get_u32(raw + 8);
  if (version != kDumpVersion) {
    throw Error(ErrorCode::kVersionUnsupported,
                where + ": version " + std::to_string(version));
  }
  const uint32_t kind = get_u32(raw + 12);
  if (kind > 1) {
    throw Error(ErrorCode::kVersionUnsupported,
                where + ": unknown kind " + std::to_string(kind));
  }
  Header h;
  h.granularity = kind == 0 ? Granularity::kFull : Granularity::kLastTokenHeadSummed;
  h.descriptor = {static_cast<int>(get_u32(raw + 16)),
                  static_cast<int>(get_u32(raw + 20)), BackendKind::kDump};
  h.num_tokens = get_u32(raw + 24);
  AttentionStream probe;
  probe.descriptor = h.descriptor;
  probe.num_tokens = h.num_tokens;
  probe.granularity = h.granularity;
  h.payload_values = probe.expected_payload_size();
  const size_t expected_bytes = kDumpHeaderBytes + 4 * h.payload_values;
  if (file_size != expected_bytes) {
    throw Error(ErrorCode::kTruncatedPayload,
                where + ": " + std::to_string(file_size) + " bytes, expected " +
                    std::to_string(expected_bytes));
  }
  return h;
}

std::ifstream open_dump(const std::filesystem::path& path, size_t& size) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(ErrorCode::kDumpMissing, path.string());
  }
  size = static_cast<size_t>(std::filesystem::file_size(path));
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kDumpMissing, path.string());
  return in;
}

Tokenization read_tokens_for(const std::filesystem::path& dump,
                             size_t num_tokens) {
  Tokenization tokens = read_token_map(token_map_path(dump));
  if (tokens.num_tokens() != num_tokens) {
    throw Error(ErrorCode::kTruncatedPayload,
                dump.string() + ": token map has " +
                    std::to_string(tokens.num_tokens()) + " tokens, dump has " +
                    std::to_string(num_tokens));
  }
  return tokens;
}

}  // namespace

std::filesystem::path token_map_path(const std::filesystem::path& dump_path) {
  std::filesystem::path p = dump_path;
  p.replace_extension(".tokens.json");
  return p;
}

void write_token_map(const Tokenization& tokens,
                     const std::filesystem::path& path) {
  json arr = json::array();
  for (const auto& t : tokens.offsets) arr.push_back({{"start", t.start}, {"end", t.end}});
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << json{{"tokens", arr}}.dump() << '\n';
}

Tokenization read_token_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kDumpMissing, path.string());
  Tokenization tokens;
  try {
    const json doc = json::parse(in);
    for (const auto& t : doc.at("tokens")) {
      tokens.offsets.push_back(
          {t.at("start").get<size_t>(), t.at("end").get<size_t>()});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kProtocolError, path.string() + ": " + e.what());
  }
  return tokens;
}

void write_attention_dump(const AttentionStream& stream,
                          const Tokenization& tokens,
                          const std::filesystem::path& path) {
  if (stream.payload.size() != stream.expected_payload_size()) {
    throw Error(ErrorCode::kTruncatedPayload,
                "stream payload does not match its shape");
  }
  if (tokens.num_tokens() != stream.num_tokens) {
    throw Error(ErrorCode::kTokenCountMismatch,
                "token map and stream disagree on token count");
  }
  std::string bytes(kDumpMagic, sizeof(kDumpMagic));
  bytes.reserve(kDumpHeaderBytes + 4 * stream.payload.size());
  put_u32(bytes, kDumpVersion);
  put_u32(bytes, stream.granularity == Granularity::kFull ? 0 : 1);
  put_u32(bytes, static_cast<uint32_t>(stream.descriptor.num_layers));
  put_u32(bytes, static_cast<uint32_t>(stream.descriptor.num_heads));
  put_u32(bytes, static_cast<uint32_t>(stream.num_tokens));
  for (float f : stream.payload) put_f32(bytes, f);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  write_token_map(tokens, token_map_path(path));
}

std::pair<Tokenization, AttentionStream> read_attention_dump(
    const std::filesystem::path& path) {
  size_t size = 0;
  std::ifstream in = open_dump(path, size);
  std::vector<unsigned char> raw(size);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(size));
  const Header h = parse_header(raw.data(), size, path);
  AttentionStream s;
  s.descriptor = h.descriptor;
  s.num_tokens = h.num_tokens;
  s.granularity = h.granularity;
  s.payload.resize(h.payload_values);
  for (size_t i = 0; i < h.payload_values; ++i) {
    s.payload[i] = get_f32(raw.data() + kDumpHeaderBytes + 4 * i);
  }
  return {read_tokens_for(path, h.num_tokens), std::move(s)};
}

std::pair<Tokenization, AttentionStream> read_attention_dump_reduced(
    const std::filesystem::path& path) {
  size_t size = 0;
  std::ifstream in = open_dump(path, size);
  unsigned char header_raw[kDumpHeaderBytes] = {};
  in.read(reinterpret_cast<char*>(header_raw),
          static_cast<std::streamsize>(std::min(size, kDumpHeaderBytes)));
  const Header h = parse_header(header_raw, size, path);
  if (h.granularity == Granularity::kLastTokenHeadSummed) {
    return read_attention_dump(path);
  }
  const size_t n = h.num_tokens;
  AttentionStream s;
  s.descriptor = h.descriptor;
  s.num_tokens = n;
  s.granularity = Granularity::kLastTokenHeadSummed;
  s.payload.resize(static_cast<size_t>(h.descriptor.num_layers) * n);
  std::vector<unsigned char> row_raw(4 * n);
  std::vector<double> acc(n);
  for (int l = 0; l < h.descriptor.num_layers; ++l) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int hd = 0; hd < h.descriptor.num_heads; ++hd) {
      const size_t block = static_cast<size_t>(l) * h.descriptor.num_heads + hd;
      const size_t offset =
          kDumpHeaderBytes + 4 * ((block * n + (n - 1)) * n);
      in.seekg(static_cast<std::streamoff>(offset));
      in.read(reinterpret_cast<char*>(row_raw.data()),
              static_cast<std::streamsize>(row_raw.size()));
      if (!in) throw Error(ErrorCode::kTruncatedPayload, path.string());
      for (size_t k = 0; k < n; ++k) acc[k] += get_f32(row_raw.data() + 4 * k);
    }
    for (size_t k = 0; k < n; ++k) {
      s.payload[static_cast<size_t>(l) * n + k] = static_cast<float>(acc[k]);
    }
  }
  return {read_tokens_for(path, n), std::move(s)};
}

DumpBackend::DumpBackend(std::filesystem::path dir) : dir_(std::move(dir)) {}

BackendDescriptor DumpBackend::descriptor() const {
  std::lock_guard<std::mutex> lock(mu_);
  return descriptor_;
}

std::filesystem::path DumpBackend::dump_path(const std::string& prompt_id) const {
  return dir_ / (prompt_id + ".attn");
}

Tokenization DumpBackend::tokenize(const PromptRequest& prompt) const {
  const auto path = dump_path(prompt.id);
  if (!std::filesystem::exists(token_map_path(path))) {
    throw Error(ErrorCode::kDumpMissing, token_map_path(path).string());
  }
  Tokenization tokens = read_token_map(token_map_path(path));
  if (tokens.num_tokens() == 0) throw Error(ErrorCode::kEmptyText, prompt.id);
  return tokens;
}

Prefill DumpBackend::prefill(const PromptRequest& prompt,
                             Granularity granularity) const {
  const auto path = dump_path(prompt.id);
  auto [tokens, stream] = granularity == Granularity::kFull
                              ? read_attention_dump(path)
                              : read_attention_dump_reduced(path);
  if (stream.granularity != granularity) {
    throw Error(ErrorCode::kGranularityUnsupported,
                path.string() + " holds reduced attention only");
  }
  for (const auto& t : tokens.offsets) {
    if (t.end > prompt.text.size()) {
      throw Error(ErrorCode::kProtocolError,
                  path.string() + ": token offsets exceed the prompt text");
    }
  }
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (descriptor_.num_layers == 0) {
      descriptor_ = {stream.descriptor.num_layers, stream.descriptor.num_heads,
                     BackendKind::kDump};
    } else if (descriptor_.num_layers != stream.descriptor.num_layers ||
               descriptor_.num_heads != stream.descriptor.num_heads) {
      throw Error(ErrorCode::kProtocolError,
                  path.string() + ": descriptor differs from earlier dumps");
    }
  }
  return {std::move(tokens), std::move(stream)};
}

}  // namespace linefocus
