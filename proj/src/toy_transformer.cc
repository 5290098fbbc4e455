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

#include "linefocus/toy_transformer.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "linefocus/error.h"
#include "linefocus/random.h"

namespace linefocus {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;

namespace {

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

double gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

double gelu_grad(double x) {
  const double th = std::tanh(kGeluC * (x + kGeluA * x * x * x));
  return 0.5 * (1.0 + th) +
         0.5 * x * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

MatrixXd random_matrix(Rng& rng, int rows, int cols, double stddev) {
  MatrixXd m(rows, cols);
  // Fill in row-major order so the draw sequence does not depend on storage.
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = stddev * rng.normal();
  return m;
}

void check_config(const ToyConfig& c) {
  if (c.d_model < 1 || c.num_layers < 1 || c.num_heads < 1 || c.max_seq < 2) {
    throw Error(ErrorCode::kConfig, "toy model dimensions must be positive");
  }
  if (c.d_model % c.num_heads != 0) {
    throw Error(ErrorCode::kConfig, "d_model must be divisible by num_heads");
  }
}

void check_tokens(const ToyModelParams& p, std::span<const int> tokens) {
  if (tokens.empty()) throw Error(ErrorCode::kEmptyText, "no tokens");
  if (tokens.size() > static_cast<size_t>(p.config.max_seq)) {
    throw Error(ErrorCode::kSequenceTooLong,
                std::to_string(tokens.size()) + " tokens exceed max_seq " +
                    std::to_string(p.config.max_seq));
  }
}

MatrixXd embed(const ToyModelParams& p, std::span<const int> tokens) {
  const int t_len = static_cast<int>(tokens.size());
  MatrixXd x(t_len, p.config.d_model);
  for (int t = 0; t < t_len; ++t) {
    x.row(t) = p.token_embedding.row(tokens[t]) + p.position_embedding.row(t);
  }
  return x;
}

// Causal softmax attention for one head with all matrices materialized.
MatrixXd causal_attention(const MatrixXd& q, const MatrixXd& k, double scale) {
  const int t_len = static_cast<int>(q.rows());
  MatrixXd scores = (q * k.transpose()) * scale;
  MatrixXd probs = MatrixXd::Zero(t_len, t_len);
  for (int i = 0; i < t_len; ++i) {
    const double mx = scores.row(i).head(i + 1).maxCoeff();
    double total = 0.0;
    for (int j = 0; j <= i; ++j) {
      probs(i, j) = std::exp(scores(i, j) - mx);
      total += probs(i, j);
    }
    probs.row(i).head(i + 1) /= total;
  }
  return probs;
}

struct LayerCache {
  MatrixXd x, q, k, v;
  std::vector<MatrixXd> probs;
  MatrixXd heads;  // concatenated head outputs
  MatrixXd x1, ffn_pre, ffn_act;
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  MatrixXd final_x;
};

ForwardCache forward(const ToyModelParams& p, std::span<const int> tokens,
                     bool through_head) {
  const int heads = p.config.num_heads;
  const int dh = p.config.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  ForwardCache cache;
  MatrixXd x = embed(p, tokens);
  for (const ToyLayer& layer : p.layers) {
    LayerCache lc;
    lc.x = x;
    lc.q = x * layer.wq;
    lc.k = x * layer.wk;
    lc.v = x * layer.wv;
    lc.heads.resize(x.rows(), x.cols());
    for (int h = 0; h < heads; ++h) {
      MatrixXd probs = causal_attention(lc.q.middleCols(h * dh, dh),
                                        lc.k.middleCols(h * dh, dh), scale);
      lc.heads.middleCols(h * dh, dh) = probs * lc.v.middleCols(h * dh, dh);
      lc.probs.push_back(std::move(probs));
    }
    lc.x1 = x + lc.heads * layer.wo;
    if (through_head || &layer != &p.layers.back()) {
      lc.ffn_pre = (lc.x1 * layer.w1).rowwise() + layer.b1.row(0);
      lc.ffn_act = lc.ffn_pre.unaryExpr(&gelu);
      x = lc.x1 + ((lc.ffn_act * layer.w2).rowwise() + layer.b2.row(0));
    }
    cache.layers.push_back(std::move(lc));
  }
  cache.final_x = std::move(x);
  return cache;
}

}  // namespace

ToyModelParams ToyModelParams::initialize(const ToyConfig& config) {
  check_config(config);
  const int d = config.d_model;
  const int f = config.ffn_dim();
  Rng rng(config.seed);
  ToyModelParams p;
  p.config = config;
  p.token_embedding = random_matrix(rng, kToyVocabSize, d, 1.0);
  p.position_embedding = random_matrix(rng, config.max_seq, d, 0.5);
  const double proj = 1.0 / std::sqrt(static_cast<double>(d));
  for (int l = 0; l < config.num_layers; ++l) {
    ToyLayer layer;
    layer.wq = random_matrix(rng, d, d, proj);
    layer.wk = random_matrix(rng, d, d, proj);
    layer.wv = random_matrix(rng, d, d, proj);
    layer.wo = random_matrix(rng, d, d, proj);
    layer.w1 = random_matrix(rng, d, f, proj);
    layer.b1 = MatrixXd::Zero(1, f);
    layer.w2 = random_matrix(rng, f, d, 1.0 / std::sqrt(static_cast<double>(f)));
    layer.b2 = MatrixXd::Zero(1, d);
    p.layers.push_back(std::move(layer));
  }
  p.w_out = random_matrix(rng, d, kToyVocabSize, proj);
  p.b_out = MatrixXd::Zero(1, kToyVocabSize);
  return p;
}

ToyModelParams ToyModelParams::zeros_like(const ToyModelParams& like) {
  ToyModelParams z = like;
  for (auto& [name, tensor] : z.named_tensors()) tensor->setZero();
  return z;
}

std::vector<std::pair<std::string, MatrixXd*>> ToyModelParams::named_tensors() {
  std::vector<std::pair<std::string, MatrixXd*>> out = {
      {"token_embedding", &token_embedding},
      {"position_embedding", &position_embedding}};
  for (size_t l = 0; l < layers.size(); ++l) {
    const std::string prefix = "layer" + std::to_string(l) + ".";
    ToyLayer& layer = layers[l];
    out.emplace_back(prefix + "wq", &layer.wq);
    out.emplace_back(prefix + "wk", &layer.wk);
    out.emplace_back(prefix + "wv", &layer.wv);
    out.emplace_back(prefix + "wo", &layer.wo);
    out.emplace_back(prefix + "w1", &layer.w1);
    out.emplace_back(prefix + "b1", &layer.b1);
    out.emplace_back(prefix + "w2", &layer.w2);
    out.emplace_back(prefix + "b2", &layer.b2);
  }
  out.emplace_back("w_out", &w_out);
  out.emplace_back("b_out", &b_out);
  return out;
}

std::vector<std::pair<std::string, const MatrixXd*>>
ToyModelParams::named_tensors() const {
  std::vector<std::pair<std::string, const MatrixXd*>> out;
  for (auto& [name, t] : const_cast<ToyModelParams*>(this)->named_tensors()) {
    out.emplace_back(name, t);
  }
  return out;
}

size_t ToyModelParams::parameter_count() const {
  size_t n = 0;
  for (const auto& [name, t] : named_tensors()) n += t->size();
  return n;
}

std::vector<int> toy_token_ids(std::string_view text) {
  std::vector<int> ids;
  ids.reserve(text.size() + 1);
  ids.push_back(kToyBeginToken);
  for (unsigned char c : text) ids.push_back(c);
  return ids;
}

double toy_nll(const ToyModelParams& p, std::span<const int> tokens,
               ToyModelParams* grad) {
  check_tokens(p, tokens);
  const int t_len = static_cast<int>(tokens.size());
  if (t_len < 2) return 0.0;
  const int num_pred = t_len - 1;
  ForwardCache cache = forward(p, tokens, true);

  MatrixXd logits = (cache.final_x * p.w_out).rowwise() + p.b_out.row(0);
  MatrixXd dlogits = MatrixXd::Zero(t_len, kToyVocabSize);
  double loss = 0.0;
  for (int t = 0; t < num_pred; ++t) {
    const double mx = logits.row(t).maxCoeff();
    RowVectorXd e = (logits.row(t).array() - mx).exp().matrix();
    const double total = e.sum();
    const int target = tokens[t + 1];
    loss -= (logits(t, target) - mx) - std::log(total);
    dlogits.row(t) = e / total;
    dlogits(t, target) -= 1.0;
  }
  loss /= num_pred;
  if (grad == nullptr) return loss;

  dlogits /= static_cast<double>(num_pred);
  const int heads = p.config.num_heads;
  const int dh = p.config.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  grad->w_out = cache.final_x.transpose() * dlogits;
  grad->b_out = dlogits.colwise().sum();
  MatrixXd dx = dlogits * p.w_out.transpose();

  for (int l = static_cast<int>(p.layers.size()) - 1; l >= 0; --l) {
    const ToyLayer& layer = p.layers[l];
    const LayerCache& lc = cache.layers[l];
    ToyLayer& g = grad->layers[l];

    // Feed-forward residual branch.
    g.w2 = lc.ffn_act.transpose() * dx;
    g.b2 = dx.colwise().sum();
    MatrixXd dpre = (dx * layer.w2.transpose()).cwiseProduct(
        lc.ffn_pre.unaryExpr(&gelu_grad));
    g.w1 = lc.x1.transpose() * dpre;
    g.b1 = dpre.colwise().sum();
    MatrixXd dx1 = dx + dpre * layer.w1.transpose();

    // Attention residual branch.
    g.wo = lc.heads.transpose() * dx1;
    MatrixXd dheads = dx1 * layer.wo.transpose();
    MatrixXd dq(t_len, p.config.d_model), dk(t_len, p.config.d_model),
        dv(t_len, p.config.d_model);
    for (int h = 0; h < heads; ++h) {
      const MatrixXd& probs = lc.probs[h];
      const auto dout = dheads.middleCols(h * dh, dh);
      MatrixXd dprobs = dout * lc.v.middleCols(h * dh, dh).transpose();
      dv.middleCols(h * dh, dh) = probs.transpose() * dout;
      Eigen::VectorXd row_dot = dprobs.cwiseProduct(probs).rowwise().sum();
      MatrixXd dscores =
          probs.cwiseProduct(dprobs.colwise() - row_dot) * scale;
      dq.middleCols(h * dh, dh) = dscores * lc.k.middleCols(h * dh, dh);
      dk.middleCols(h * dh, dh) =
          dscores.transpose() * lc.q.middleCols(h * dh, dh);
    }
    g.wq = lc.x.transpose() * dq;
    g.wk = lc.x.transpose() * dk;
    g.wv = lc.x.transpose() * dv;
    dx = dx1 + dq * layer.wq.transpose() + dk * layer.wk.transpose() +
         dv * layer.wv.transpose();
  }

  grad->token_embedding.setZero();
  grad->position_embedding.setZero();
  for (int t = 0; t < t_len; ++t) {
    grad->token_embedding.row(tokens[t]) += dx.row(t);
    grad->position_embedding.row(t) += dx.row(t);
  }
  return loss;
}

std::vector<std::vector<MatrixXd>> toy_reference_attention(
    const ToyModelParams& params, std::span<const int> tokens) {
  check_tokens(params, tokens);
  ForwardCache cache = forward(params, tokens, false);
  std::vector<std::vector<MatrixXd>> out;
  for (auto& lc : cache.layers) out.push_back(std::move(lc.probs));
  return out;
}

ToyCalibration toy_calibrate(const ToyModelParams& params,
                             const std::vector<std::string>& corpus, int steps,
                             double learning_rate, double clip_norm) {
  if (steps < 0) throw Error(ErrorCode::kConfig, "steps must be >= 0");
  ToyCalibration result{params, {}};
  if (steps == 0) return result;

  std::vector<std::vector<int>> sequences;
  const size_t max_bytes = static_cast<size_t>(params.config.max_seq) - 1;
  for (const auto& text : corpus) {
    if (text.empty()) continue;
    sequences.push_back(
        toy_token_ids(std::string_view(text).substr(0, max_bytes)));
  }
  if (sequences.empty()) {
    throw Error(ErrorCode::kEmptyCorpus, "calibration corpus has no text");
  }

  ToyModelParams& p = result.params;
  ToyModelParams grad = ToyModelParams::zeros_like(p);
  ToyModelParams total = ToyModelParams::zeros_like(p);
  const double inv_n = 1.0 / static_cast<double>(sequences.size());
  for (int step = 0; step <= steps; ++step) {
    for (auto& [name, t] : total.named_tensors()) t->setZero();
    double loss = 0.0;
    for (const auto& seq : sequences) {
      loss += toy_nll(p, seq, step < steps ? &grad : nullptr) * inv_n;
      if (step == steps) continue;
      auto src = grad.named_tensors();
      auto dst = total.named_tensors();
      for (size_t i = 0; i < src.size(); ++i) *dst[i].second += *src[i].second * inv_n;
    }
    result.loss_trace.push_back(loss);
    if (step == steps) break;

    double norm_sq = 0.0;
    for (const auto& [name, t] : total.named_tensors()) {
      norm_sq += t->squaredNorm();
    }
    const double norm = std::sqrt(norm_sq);
    const double factor =
        norm > clip_norm ? learning_rate * clip_norm / norm : learning_rate;
    auto params_t = p.named_tensors();
    auto grads_t = total.named_tensors();
    for (size_t i = 0; i < params_t.size(); ++i) {
      *params_t[i].second -= factor * *grads_t[i].second;
    }
  }
  return result;
}

AttentionStream toy_prefill_reference(const ToyModelParams& params,
                                      std::span<const int> tokens,
                                      Granularity granularity) {
  const auto probs = toy_reference_attention(params, tokens);
  const size_t t_len = tokens.size();
  const int layers = params.config.num_layers;
  const int heads = params.config.num_heads;
  AttentionStream s;
  s.descriptor = {layers, heads, BackendKind::kToy};
  s.num_tokens = t_len;
  s.granularity = granularity;
  s.payload.assign(s.expected_payload_size(), 0.0f);
  for (int l = 0; l < layers; ++l) {
    if (granularity == Granularity::kFull) {
      for (int h = 0; h < heads; ++h) {
        float* base = s.payload.data() + (static_cast<size_t>(l) * heads + h) *
                                             t_len * t_len;
        for (size_t q = 0; q < t_len; ++q)
          for (size_t k = 0; k < t_len; ++k)
            base[q * t_len + k] = static_cast<float>(probs[l][h](q, k));
      }
    } else {
      for (size_t k = 0; k < t_len; ++k) {
        double acc = 0.0;
        for (int h = 0; h < heads; ++h) acc += probs[l][h](t_len - 1, k);
        s.payload[static_cast<size_t>(l) * t_len + k] = static_cast<float>(acc);
      }
    }
  }
  return s;
}

namespace {

constexpr int kQueryTile = 64;
using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

AttentionStream toy_prefill_streaming(const ToyModelParams& params,
                                      std::span<const int> tokens,
                                      Granularity granularity) {
  check_tokens(params, tokens);
  const int t_len = static_cast<int>(tokens.size());
  const int layers = params.config.num_layers;
  const int heads = params.config.num_heads;
  const int dh = params.config.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const bool full = granularity == Granularity::kFull;

  AttentionStream s;
  s.descriptor = {layers, heads, BackendKind::kToy};
  s.num_tokens = static_cast<size_t>(t_len);
  s.granularity = granularity;
  s.payload.assign(s.expected_payload_size(), 0.0f);

  MatrixXd x = embed(params, tokens);
  // Last-token rows per head, summed in head order after the parallel region
  // so the result does not depend on scheduling.
  MatrixXd last_rows(heads, t_len);
  for (int l = 0; l < layers; ++l) {
    const ToyLayer& layer = params.layers[l];
    const MatrixXd q = x * layer.wq;
    const MatrixXd k = x * layer.wk;
    const MatrixXd v = x * layer.wv;
    MatrixXd head_out(t_len, params.config.d_model);

    // The last layer feeds nothing downstream, so reduced output needs only
    // its final query row there.
    const int first_query = (!full && l + 1 == layers) ? t_len - 1 : 0;

#pragma omp parallel for schedule(static)
    for (int h = 0; h < heads; ++h) {
      const MatrixXd qh = q.middleCols(h * dh, dh);
      const MatrixXd kh = k.middleCols(h * dh, dh);
      const MatrixXd vh = v.middleCols(h * dh, dh);
      float* full_base =
          full ? s.payload.data() + (static_cast<size_t>(l) * heads + h) *
                                        t_len * t_len
               : nullptr;
      // Tiles of query rows keep scratch at kQueryTile x tokens.
      for (int i0 = first_query; i0 < t_len; i0 += kQueryTile) {
        const int rows = std::min(kQueryTile, t_len - i0);
        const int keys = i0 + rows;
        RowMajorMatrix probs =
            (qh.middleRows(i0, rows) * kh.topRows(keys).transpose()) * scale;
        for (int r = 0; r < rows; ++r) {
          const int visible = i0 + r + 1;
          auto seg = probs.row(r).head(visible).array();
          seg = (seg - seg.maxCoeff()).exp();
          seg /= seg.sum();
          probs.row(r).tail(keys - visible).setZero();
        }
        head_out.block(i0, h * dh, rows, dh) = probs * vh.topRows(keys);
        if (full_base != nullptr) {
          for (int r = 0; r < rows; ++r) {
            float* dst = full_base + static_cast<size_t>(i0 + r) * t_len;
            for (int j = 0; j < keys; ++j) dst[j] = static_cast<float>(probs(r, j));
          }
        }
        if (i0 + rows == t_len) last_rows.row(h) = probs.row(rows - 1);
      }
    }

    if (!full) {
      for (int j = 0; j < t_len; ++j) {
        double acc = 0.0;
        for (int h = 0; h < heads; ++h) acc += last_rows(h, j);
        s.payload[static_cast<size_t>(l) * t_len + j] = static_cast<float>(acc);
      }
    }
    if (l + 1 == layers) break;
    const MatrixXd x1 = x + head_out * layer.wo;
    const MatrixXd pre = (x1 * layer.w1).rowwise() + layer.b1.row(0);
    x = x1 + ((pre.unaryExpr(&gelu) * layer.w2).rowwise() + layer.b2.row(0));
  }
  return s;
}

ToyBackend::ToyBackend(ToyModelParams params, Execution execution)
    : params_(std::move(params)), execution_(execution) {}

BackendDescriptor ToyBackend::descriptor() const {
  return {params_.config.num_layers, params_.config.num_heads,
          BackendKind::kToy};
}

Tokenization ToyBackend::tokenize(const PromptRequest& prompt) const {
  if (prompt.text.empty()) throw Error(ErrorCode::kEmptyText, prompt.id);
  Tokenization tok;
  tok.offsets.reserve(prompt.text.size() + 1);
  tok.offsets.push_back({0, 0});
  for (size_t i = 0; i < prompt.text.size(); ++i) {
    tok.offsets.push_back({i, i + 1});
  }
  return tok;
}

Prefill ToyBackend::prefill(const PromptRequest& prompt,
                            Granularity granularity) const {
  Tokenization tok = tokenize(prompt);
  if (tok.num_tokens() > max_tokens()) {
    throw Error(ErrorCode::kSequenceTooLong,
                prompt.id + ": " + std::to_string(tok.num_tokens()) +
                    " tokens exceed " + std::to_string(max_tokens()));
  }
  if (granularity == Granularity::kFull &&
      tok.num_tokens() > kMaxFullGranularityTokens) {
    throw Error(ErrorCode::kGranularityUnsupported,
                prompt.id + ": full attention refused above " +
                    std::to_string(kMaxFullGranularityTokens) + " tokens");
  }
  const std::vector<int> ids = toy_token_ids(prompt.text);
  AttentionStream stream =
      execution_ == Execution::kParallel
          ? toy_prefill_streaming(params_, ids, granularity)
          : toy_prefill_reference(params_, ids, granularity);
  return {std::move(tok), std::move(stream)};
}

}  // namespace linefocus
