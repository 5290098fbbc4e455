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

// Client for a model server speaking the attention protocol:
//
//   POST {endpoint}/v1/attention
//     {"prompt": str, "reduce": "last_token_head_sum"}
//   200 {"num_layers": int, "num_heads": int,
//        "tokens": [{"start": int, "end": int}...],
//        "attention": [[float x num_tokens] x num_layers]}
//   413 prompt too long, 400 schema error.

#ifndef LINEFOCUS_HTTP_BACKEND_H_
#define LINEFOCUS_HTTP_BACKEND_H_

#include <condition_variable>
#include <mutex>
#include <string>
#include <string_view>

#include "linefocus/backend.h"

namespace linefocus {

inline constexpr char kEndpointEnvVar[] = "LINEFOCUS_ENDPOINT";
inline constexpr char kAttentionPath[] = "/v1/attention";

struct HttpBackendOptions {
  std::string endpoint;  // e.g. "http://127.0.0.1:8000"
  int max_in_flight = 4;
  double row_sum_tolerance = 1e-2;  // f32 wire values
  int timeout_seconds = 300;
};

// Decodes and validates a 200 response body against `prompt`. Throws
// Error(kProtocolError) listing every violated invariant.
Prefill decode_attention_response(std::string_view body,
                                  std::string_view prompt, double tolerance);

std::string encode_attention_request(std::string_view prompt);

Prefill http_fetch_attention(const std::string& endpoint,
                             const std::string& prompt, double tolerance = 1e-2,
                             int timeout_seconds = 300);

class HttpBackend : public AttentionBackend {
 public:
  explicit HttpBackend(HttpBackendOptions options);

  // Fixed by the first successful response; (0, 0) before that.
  BackendDescriptor descriptor() const override;
  size_t max_tokens() const override { return 0; }
  Tokenization tokenize(const PromptRequest& prompt) const override;
  // Only kLastTokenHeadSummed is served by the protocol.
  Prefill prefill(const PromptRequest& prompt,
                  Granularity granularity) const override;

 private:
  HttpBackendOptions options_;
  mutable std::mutex mu_;
  mutable std::condition_variable slot_freed_;
  mutable int in_flight_ = 0;
  mutable BackendDescriptor descriptor_{0, 0, BackendKind::kHttp};
};

}  // namespace linefocus

#endif  // LINEFOCUS_HTTP_BACKEND_H_
