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

#include "linefocus/backend.h"

#include <cmath>
#include <sstream>

#include "linefocus/error.h"

namespace linefocus {

std::string_view backend_kind_name(BackendKind kind) {
  switch (kind) {
    case BackendKind::kToy: return "toy";
    case BackendKind::kDump: return "dump";
    case BackendKind::kHttp: return "http";
  }
  return "toy";
}

BackendKind parse_backend_kind(std::string_view name) {
  if (name == "toy") return BackendKind::kToy;
  if (name == "dump") return BackendKind::kDump;
  if (name == "http") return BackendKind::kHttp;
  throw Error(ErrorCode::kConfig, "unknown backend '" + std::string(name) + "'");
}

std::string_view granularity_name(Granularity granularity) {
  return granularity == Granularity::kFull ? "full" : "last_token_head_summed";
}

size_t AttentionStream::expected_payload_size() const {
  const size_t lh = static_cast<size_t>(descriptor.num_layers);
  if (granularity == Granularity::kFull) {
    return lh * static_cast<size_t>(descriptor.num_heads) * num_tokens *
           num_tokens;
  }
  return lh * num_tokens;
}

std::span<const float> AttentionStream::row(int layer, int head,
                                            size_t query) const {
  const size_t offset =
      ((static_cast<size_t>(layer) * descriptor.num_heads + head) * num_tokens +
       query) *
      num_tokens;
  return std::span<const float>(payload).subspan(offset, num_tokens);
}

std::span<const float> AttentionStream::layer_row(int layer) const {
  return std::span<const float>(payload).subspan(
      static_cast<size_t>(layer) * num_tokens, num_tokens);
}

std::vector<std::string> check_stream_invariants(const AttentionStream& stream,
                                                 double tolerance) {
  std::vector<std::string> problems;
  auto report = [&](const std::string& msg) {
    if (problems.size() < 32) problems.push_back(msg);
  };
  if (stream.descriptor.num_layers < 1 || stream.descriptor.num_heads < 1) {
    report("descriptor needs num_layers >= 1 and num_heads >= 1");
    return problems;
  }
  if (stream.num_tokens == 0) {
    report("num_tokens is 0");
    return problems;
  }
  if (stream.payload.size() != stream.expected_payload_size()) {
    report("payload holds " + std::to_string(stream.payload.size()) +
           " values, expected " +
           std::to_string(stream.expected_payload_size()));
    return problems;
  }
  const size_t n = stream.num_tokens;
  auto check_row = [&](std::span<const float> row, size_t limit, double target,
                       const std::string& where) {
    double sum = 0.0;
    for (size_t k = 0; k < row.size(); ++k) {
      if (!(row[k] >= 0.0f)) {
        report(where + ": negative or NaN entry at key " + std::to_string(k));
        return;
      }
      if (k > limit && row[k] != 0.0f) {
        report(where + ": nonzero entry at future key " + std::to_string(k));
        return;
      }
      sum += row[k];
    }
    if (std::abs(sum - target) > tolerance) {
      std::ostringstream os;
      os.precision(9);
      os << where << ": row sums to " << sum << ", expected " << target
         << " +- " << tolerance;
      report(os.str());
    }
  };
  for (int l = 0; l < stream.descriptor.num_layers; ++l) {
    if (stream.granularity == Granularity::kFull) {
      for (int h = 0; h < stream.descriptor.num_heads; ++h) {
        for (size_t q = 0; q < n; ++q) {
          check_row(stream.row(l, h, q), q, 1.0,
                    "layer " + std::to_string(l) + " head " +
                        std::to_string(h) + " query " + std::to_string(q));
        }
      }
    } else {
      check_row(stream.layer_row(l), n, stream.descriptor.num_heads,
                "layer " + std::to_string(l));
    }
  }
  return problems;
}

std::string base_prompt_id(std::string_view sample_id) {
  return std::string(sample_id) + ".base";
}

std::string highlighted_prompt_id(std::string_view sample_id, int line) {
  return std::string(sample_id) + ".L" + std::to_string(line);
}

}  // namespace linefocus
