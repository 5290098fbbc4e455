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

// A small deterministic decoder-only transformer over bytes.
//
// Each block is residual causal multi-head self-attention followed by a
// residual GELU feed-forward layer. Token and learned positional embeddings
// feed the first block; a linear head over the 257-symbol vocabulary (256
// bytes plus a begin token) follows the last. Everything is double
// precision. The model exists to drive the attention pipeline end to end
// without an external LLM, and to be small enough for finite-difference
// gradient checks.

#ifndef LINEFOCUS_TOY_TRANSFORMER_H_
#define LINEFOCUS_TOY_TRANSFORMER_H_

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "linefocus/backend.h"

namespace linefocus {

inline constexpr int kToyVocabSize = 257;
inline constexpr int kToyBeginToken = 256;

struct ToyConfig {
  uint64_t seed = 0;
  int d_model = 32;
  int num_layers = 4;
  int num_heads = 4;
  int max_seq = 2048;

  int head_dim() const { return d_model / num_heads; }
  int ffn_dim() const { return 4 * d_model; }
};

struct ToyLayer {
  Eigen::MatrixXd wq, wk, wv, wo;  // d x d
  Eigen::MatrixXd w1, b1;          // d x f, 1 x f
  Eigen::MatrixXd w2, b2;          // f x d, 1 x d
};

struct ToyModelParams {
  ToyConfig config;
  Eigen::MatrixXd token_embedding;     // vocab x d
  Eigen::MatrixXd position_embedding;  // max_seq x d
  std::vector<ToyLayer> layers;
  Eigen::MatrixXd w_out, b_out;  // d x vocab, 1 x vocab

  // Seeded initialization. Throws Error(kConfig) for invalid dimensions.
  static ToyModelParams initialize(const ToyConfig& config);
  // Same shapes as `like`, all zeros; used for gradients.
  static ToyModelParams zeros_like(const ToyModelParams& like);

  std::vector<std::pair<std::string, Eigen::MatrixXd*>> named_tensors();
  std::vector<std::pair<std::string, const Eigen::MatrixXd*>> named_tensors()
      const;
  size_t parameter_count() const;
};

// Byte-level token ids: begin token followed by one id per byte.
std::vector<int> toy_token_ids(std::string_view text);

// Mean next-token negative log-likelihood over the predicted positions of
// one sequence, and its gradient when `grad` is non-null.
double toy_nll(const ToyModelParams& params, std::span<const int> tokens,
               ToyModelParams* grad = nullptr);

// Attention probabilities for every layer and head, computed by the
// straightforward full-matrix forward pass. [layer][head] -> T x T.
std::vector<std::vector<Eigen::MatrixXd>> toy_reference_attention(
    const ToyModelParams& params, std::span<const int> tokens);

struct ToyCalibration {
  ToyModelParams params;
  std::vector<double> loss_trace;  // loss before each step, then final
};

// Full-batch gradient descent on the next-token loss over `corpus`,
// gradient norm clipped at `clip_norm`. Throws Error(kEmptyCorpus) when
// steps > 0 and the corpus has no usable text.
ToyCalibration toy_calibrate(const ToyModelParams& params,
                             const std::vector<std::string>& corpus, int steps,
                             double learning_rate, double clip_norm = 5.0);

enum class Execution { kSerial, kParallel };

class ToyBackend : public AttentionBackend {
 public:
  explicit ToyBackend(ToyModelParams params,
                      Execution execution = Execution::kParallel);

  BackendDescriptor descriptor() const override;
  size_t max_tokens() const override {
    return static_cast<size_t>(params_.config.max_seq);
  }
  Tokenization tokenize(const PromptRequest& prompt) const override;
  Prefill prefill(const PromptRequest& prompt,
                  Granularity granularity) const override;

  const ToyModelParams& params() const { return params_; }

 private:
  ToyModelParams params_;
  Execution execution_;
};

// Streaming prefill: queries are processed in tiles of 64 rows, so no
// T x T score matrix is held; heads run in parallel. With the reduced
// granularity the last layer computes only the final query row. Exposed
// for benchmarks and tests.
AttentionStream toy_prefill_streaming(const ToyModelParams& params,
                                      std::span<const int> tokens,
                                      Granularity granularity);
// Serial reference built on toy_reference_attention.
AttentionStream toy_prefill_reference(const ToyModelParams& params,
                                      std::span<const int> tokens,
                                      Granularity granularity);

}  // namespace linefocus

#endif  // LINEFOCUS_TOY_TRANSFORMER_H_
