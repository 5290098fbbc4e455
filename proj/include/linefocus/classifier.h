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

// Per-line sequence classifier over flattened attention-shift features.
//
// kBiLstm: one bidirectional LSTM layer; at every line the forward and
// backward hidden states are concatenated and mapped to a logit by an affine
// head. kMlp: a single tanh hidden layer applied to each line on its own,
// with no view of neighbouring lines.
//
// Both are trained with binary cross-entropy, one program per mini-batch,
// plain gradient descent with global-norm clipping.

#ifndef LINEFOCUS_CLASSIFIER_H_
#define LINEFOCUS_CLASSIFIER_H_

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace linefocus {

inline constexpr double kBceEpsilon = 1e-7;

struct FeatureSequence {
  std::string sample_id;
  std::string language;
  std::vector<std::vector<double>> features;  // one vector per code line
  std::optional<std::vector<int>> labels;     // 0/1 per code line

  size_t length() const { return features.size(); }
  size_t dim() const { return features.empty() ? 0 : features.front().size(); }
};

enum class ModelKind { kBiLstm, kMlp };

std::string_view model_kind_name(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

struct Normalizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  static Normalizer identity(size_t dim);
  // Per-dimension z-score statistics over every line of `data`. Dimensions
  // with (near) zero spread keep stddev 1.
  static Normalizer fit(std::span<const FeatureSequence> data);
};

struct TrainConfig {
  ModelKind kind = ModelKind::kBiLstm;
  int hidden = 64;
  double learning_rate = 1e-3;
  int epochs = 100;
  uint64_t seed = 0;
  double clip_norm = 5.0;
  bool standardize = true;
};

struct SequenceModel {
  ModelKind kind = ModelKind::kBiLstm;
  int input_dim = 0;
  int hidden_dim = 0;
  uint64_t seed = 0;
  Normalizer normalizer;
  std::map<std::string, Eigen::MatrixXd> params;
  int epochs = 0;
  double learning_rate = 0.0;
  std::vector<double> loss_trace;  // mean per-line BCE after each epoch

  bool operator==(const SequenceModel& other) const;
};

// Seeded initial parameters with an identity normalizer.
SequenceModel init_model(ModelKind kind, int input_dim, int hidden_dim,
                         uint64_t seed);

// Throws kEmptyTrainingSet, kDimensionMismatch, or kMalformedRecord for
// missing / non-binary labels.
SequenceModel train(std::span<const FeatureSequence> data,
                    const TrainConfig& config);

// Per-line probabilities. Throws kDimensionMismatch.
std::vector<double> score(const SequenceModel& model, const FeatureSequence& seq);

// Mean BCE of clipped predictions. Throws kLengthMismatch.
double bce_loss(std::span<const double> predictions, std::span<const int> labels);

// Mean BCE of `model` on one labelled sequence; fills `grad` (same keys as
// model.params) when non-null. Features pass through the model normalizer.
double sequence_loss(const SequenceModel& model, const FeatureSequence& seq,
                     std::map<std::string, Eigen::MatrixXd>* grad = nullptr);

// The same network with forward and backward directions exchanged
// (cells and their halves of the head).
SequenceModel swap_directions(const SequenceModel& model);

nlohmann::json model_to_json(const SequenceModel& model);
SequenceModel model_from_json(const nlohmann::json& doc);
void save_model(const SequenceModel& model, const std::filesystem::path& path);
SequenceModel load_model(const std::filesystem::path& path);

}  // namespace linefocus

#endif  // LINEFOCUS_CLASSIFIER_H_
