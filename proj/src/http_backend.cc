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

#include "linefocus/http_backend.h"

#include "httplib.h"
#include "json.hpp"
#include "linefocus/error.h"

namespace linefocus {

using nlohmann::json;

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string base_path;
};

Endpoint split_endpoint(const std::string& url) {
  const size_t scheme_end = url.find("://");
  const size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const size_t path_start = url.find('/', host_start);
  Endpoint e;
  if (path_start == std::string::npos) {
    e.origin = url;
  } else {
    e.origin = url.substr(0, path_start);
    e.base_path = url.substr(path_start);
    while (!e.base_path.empty() && e.base_path.back() == '/') e.base_path.pop_back();
  }
  if (scheme_end == std::string::npos) e.origin = "http://" + e.origin;
  return e;
}

[[noreturn]] void protocol_error(const std::vector<std::string>& problems) {
  std::string msg;
  for (const auto& p : problems) {
    if (!msg.empty()) msg += "; ";
    msg += p;
  }
  throw Error(ErrorCode::kProtocolError, msg);
}

}  // namespace

std::string encode_attention_request(std::string_view prompt) {
  return json{{"prompt", prompt}, {"reduce", "last_token_head_sum"}}.dump();
}

Prefill decode_attention_response(std::string_view body,
                                  std::string_view prompt, double tolerance) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kProtocolError, std::string("invalid JSON: ") + e.what());
  }
  std::vector<std::string> problems;
  for (const char* field : {"num_layers", "num_heads", "tokens", "attention"}) {
    if (!doc.is_object() || !doc.contains(field)) {
      problems.push_back(std::string("missing field '") + field + "'");
    }
  }
  if (!problems.empty()) protocol_error(problems);

  Prefill out;
  AttentionStream& s = out.attention;
  try {
    s.descriptor = {doc["num_layers"].get<int>(), doc["num_heads"].get<int>(),
                    BackendKind::kHttp};
    for (const auto& t : doc["tokens"]) {
      out.tokens.offsets.push_back(
          {t.at("start").get<size_t>(), t.at("end").get<size_t>()});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kProtocolError, e.what());
  }
  s.num_tokens = out.tokens.num_tokens();
  s.granularity = Granularity::kLastTokenHeadSummed;
  if (s.num_tokens == 0) problems.push_back("no tokens");

  const json& attention = doc["attention"];
  if (!attention.is_array() ||
      attention.size() != static_cast<size_t>(std::max(s.descriptor.num_layers, 0))) {
    problems.push_back("attention must hold num_layers rows");
    protocol_error(problems);
  }
  s.payload.reserve(s.expected_payload_size());
  for (size_t l = 0; l < attention.size(); ++l) {
    const json& row = attention[l];
    if (!row.is_array() || row.size() != s.num_tokens) {
      problems.push_back("attention row " + std::to_string(l) +
                         " must hold num_tokens values");
      protocol_error(problems);
    }
    for (const auto& v : row) {
      if (!v.is_number()) {
        problems.push_back("attention row " + std::to_string(l) +
                           " holds a non-number");
        protocol_error(problems);
      }
      s.payload.push_back(v.get<float>());
    }
  }

  size_t prev_end = 0;
  for (size_t t = 0; t < out.tokens.offsets.size(); ++t) {
    const TokenSpan& span = out.tokens.offsets[t];
    if (span.start > span.end || span.end > prompt.size() ||
        span.start < prev_end) {
      problems.push_back("token " + std::to_string(t) +
                         " offsets are out of order or outside the prompt");
      break;
    }
    prev_end = span.end;
  }
  for (auto& p : check_stream_invariants(s, tolerance)) problems.push_back(p);
  if (!problems.empty()) protocol_error(problems);
  return out;
}

Prefill http_fetch_attention(const std::string& endpoint,
                             const std::string& prompt, double tolerance,
                             int timeout_seconds) {
  const Endpoint e = split_endpoint(endpoint);
  httplib::Client client(e.origin);
  client.set_connection_timeout(timeout_seconds, 0);
  client.set_read_timeout(timeout_seconds, 0);
  client.set_write_timeout(timeout_seconds, 0);
  auto res = client.Post(e.base_path + kAttentionPath,
                         encode_attention_request(prompt), "application/json");
  if (!res) {
    throw Error(ErrorCode::kBackendUnavailable,
                endpoint + ": " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    std::string message = res->body;
    try {
      const json doc = json::parse(res->body);
      if (doc.is_object() && doc.contains("error")) {
        message = doc["error"].is_string() ? doc["error"].get<std::string>()
                                           : doc["error"].dump();
      }
    } catch (const json::exception&) {
    }
    throw Error(ErrorCode::kRemoteError,
                "HTTP " + std::to_string(res->status) + ": " + message);
  }
  return decode_attention_response(res->body, prompt, tolerance);
}

HttpBackend::HttpBackend(HttpBackendOptions options)
    : options_(std::move(options)) {
  if (options_.endpoint.empty()) {
    throw Error(ErrorCode::kConfig, "http backend needs an endpoint");
  }
  if (options_.max_in_flight < 1) options_.max_in_flight = 1;
}

BackendDescriptor HttpBackend::descriptor() const {
  std::lock_guard<std::mutex> lock(mu_);
  return descriptor_;
}

Tokenization HttpBackend::tokenize(const PromptRequest& prompt) const {
  return prefill(prompt, Granularity::kLastTokenHeadSummed).tokens;
}

Prefill HttpBackend::prefill(const PromptRequest& prompt,
                             Granularity granularity) const {
  if (granularity != Granularity::kLastTokenHeadSummed) {
    throw Error(ErrorCode::kGranularityUnsupported,
                "http backend serves last_token_head_summed only");
  }
  if (prompt.text.empty()) throw Error(ErrorCode::kEmptyText, prompt.id);
  {
    std::unique_lock<std::mutex> lock(mu_);
    slot_freed_.wait(lock, [&] { return in_flight_ < options_.max_in_flight; });
    ++in_flight_;
  }
  struct Release {
    const HttpBackend* self;
    ~Release() {
      std::lock_guard<std::mutex> lock(self->mu_);
      --self->in_flight_;
      self->slot_freed_.notify_one();
    }
  } release{this};

  Prefill result =
      http_fetch_attention(options_.endpoint, prompt.text,
                           options_.row_sum_tolerance, options_.timeout_seconds);
  std::lock_guard<std::mutex> lock(mu_);
  if (descriptor_.num_layers == 0) {
    descriptor_ = {result.attention.descriptor.num_layers,
                   result.attention.descriptor.num_heads, BackendKind::kHttp};
  } else if (descriptor_.num_layers != result.attention.descriptor.num_layers ||
             descriptor_.num_heads != result.attention.descriptor.num_heads) {
    throw Error(ErrorCode::kProtocolError,
                "server changed its layer/head counts mid-run");
  }
  return result;
}

}  // namespace linefocus
