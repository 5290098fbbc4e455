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

#include "linefocus/classifier.h"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "linefocus/error.h"
#include "linefocus/random.h"

namespace linefocus {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;
using ParamMap = std::map<std::string, MatrixXd>;

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Parameter shapes as a function of (kind, D, H).
std::vector<std::pair<std::string, std::pair<int, int>>> param_shapes(
    ModelKind kind, int d, int h) {
  if (kind == ModelKind::kBiLstm) {
    return {{"fwd.wx", {4 * h, d}}, {"fwd.wh", {4 * h, h}}, {"fwd.b", {4 * h, 1}},
            {"bwd.wx", {4 * h, d}}, {"bwd.wh", {4 * h, h}}, {"bwd.b", {4 * h, 1}},
            {"head.w", {1, 2 * h}}, {"head.b", {1, 1}}};
  }
  return {{"hidden.w", {h, d}}, {"hidden.b", {h, 1}},
          {"head.w", {1, h}},   {"head.b", {1, 1}}};
}

MatrixXd standardized(const SequenceModel& model, const FeatureSequence& seq) {
  const int d = model.input_dim;
  const int t_len = static_cast<int>(seq.length());
  MatrixXd x(d, t_len);
  for (int t = 0; t < t_len; ++t) {
    if (static_cast<int>(seq.features[t].size()) != d) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "'" + seq.sample_id + "' line " + std::to_string(t + 1) +
                      " has " + std::to_string(seq.features[t].size()) +
                      " features, model expects " + std::to_string(d));
    }
    for (int i = 0; i < d; ++i) {
      x(i, t) = (seq.features[t][i] - model.normalizer.mean[i]) /
                model.normalizer.stddev[i];
    }
  }
  return x;
}

struct LstmTrace {
  MatrixXd gates;  // 4H x T, post-activation (i, f, g, o)
  MatrixXd c;      // H x T
  MatrixXd h;      // H x T
};

// Runs one direction. Column t of the trace is the state after consuming
// input column order[t].
LstmTrace lstm_forward(const MatrixXd& wx, const MatrixXd& wh, const MatrixXd& b,
                       const MatrixXd& x, bool reverse) {
  const int hd = static_cast<int>(wh.cols());
  const int t_len = static_cast<int>(x.cols());
  LstmTrace tr{MatrixXd(4 * hd, t_len), MatrixXd(hd, t_len), MatrixXd(hd, t_len)};
  const MatrixXd xw = (wx * x).colwise() + b.col(0);
  VectorXd h_prev = VectorXd::Zero(hd), c_prev = VectorXd::Zero(hd);
  for (int s = 0; s < t_len; ++s) {
    const int t = reverse ? t_len - 1 - s : s;
    VectorXd a = xw.col(t) + wh * h_prev;
    for (int j = 0; j < hd; ++j) {
      a(j) = sigmoid(a(j));
      a(hd + j) = sigmoid(a(hd + j));
      a(2 * hd + j) = std::tanh(a(2 * hd + j));
      a(3 * hd + j) = sigmoid(a(3 * hd + j));
    }
    VectorXd c = a.segment(hd, hd).cwiseProduct(c_prev) +
                 a.segment(0, hd).cwiseProduct(a.segment(2 * hd, hd));
    VectorXd h = a.segment(3 * hd, hd).cwiseProduct(c.array().tanh().matrix());
    tr.gates.col(t) = a;
    tr.c.col(t) = c;
    tr.h.col(t) = h;
    h_prev = h;
    c_prev = c;
  }
  return tr;
}

// Backpropagates dL/dh (H x T, indexed by input position) through one
// direction, accumulating into the parameter gradients.
void lstm_backward(const MatrixXd& wh, const MatrixXd& x, const LstmTrace& tr,
                   const MatrixXd& dh_out, bool reverse, MatrixXd& dwx,
                   MatrixXd& dwh, MatrixXd& db) {
  const int hd = static_cast<int>(wh.cols());
  const int t_len = static_cast<int>(x.cols());
  VectorXd dh_next = VectorXd::Zero(hd), dc_next = VectorXd::Zero(hd);
  MatrixXd da_all(4 * hd, t_len);
  for (int s = t_len - 1; s >= 0; --s) {
    const int t = reverse ? t_len - 1 - s : s;
    const bool first = s == 0;
    const int prev = reverse ? t + 1 : t - 1;
    const auto gates = tr.gates.col(t);
    const auto i = gates.segment(0, hd);
    const auto f = gates.segment(hd, hd);
    const auto g = gates.segment(2 * hd, hd);
    const auto o = gates.segment(3 * hd, hd);
    const VectorXd tanh_c = tr.c.col(t).array().tanh();
    const VectorXd c_prev = first ? VectorXd::Zero(hd) : VectorXd(tr.c.col(prev));

    const VectorXd dh = dh_out.col(t) + dh_next;
    const VectorXd dc =
        dh.cwiseProduct(o).cwiseProduct((1.0 - tanh_c.array().square()).matrix()) +
        dc_next;
    VectorXd da(4 * hd);
    da.segment(0, hd) = dc.cwiseProduct(g).cwiseProduct(
        i.cwiseProduct((1.0 - i.array()).matrix()));
    da.segment(hd, hd) = dc.cwiseProduct(c_prev).cwiseProduct(
        f.cwiseProduct((1.0 - f.array()).matrix()));
    da.segment(2 * hd, hd) =
        dc.cwiseProduct(i).cwiseProduct((1.0 - g.array().square()).matrix());
    da.segment(3 * hd, hd) = dh.cwiseProduct(tanh_c).cwiseProduct(
        o.cwiseProduct((1.0 - o.array()).matrix()));
    da_all.col(t) = da;
    if (!first) dwh += da * tr.h.col(prev).transpose();
    dh_next = wh.transpose() * da;
    dc_next = dc.cwiseProduct(f);
  }
  dwx += da_all * x.transpose();
  db += da_all.rowwise().sum();
}

// Logits per line, with optional gradient of mean BCE w.r.t. parameters.
VectorXd logits_and_grad(const SequenceModel& m, const MatrixXd& x,
                         const std::vector<int>* labels, ParamMap* grad,
                         double* loss) {
  const int t_len = static_cast<int>(x.cols());
  const int hd = m.hidden_dim;
  const ParamMap& p = m.params;
  VectorXd logits(t_len);
  MatrixXd features;  // head input, one column per line
  LstmTrace fwd, bwd;
  MatrixXd hidden_pre;
  if (m.kind == ModelKind::kBiLstm) {
    fwd = lstm_forward(p.at("fwd.wx"), p.at("fwd.wh"), p.at("fwd.b"), x, false);
    bwd = lstm_forward(p.at("bwd.wx"), p.at("bwd.wh"), p.at("bwd.b"), x, true);
    features.resize(2 * hd, t_len);
    features.topRows(hd) = fwd.h;
    features.bottomRows(hd) = bwd.h;
  } else {
    hidden_pre = (p.at("hidden.w") * x).colwise() + p.at("hidden.b").col(0);
    features = hidden_pre.array().tanh();
  }
  logits = (p.at("head.w") * features).transpose();
  logits.array() += p.at("head.b")(0, 0);
  if (labels == nullptr) return logits;

  VectorXd dlogit(t_len);
  double total = 0.0;
  for (int t = 0; t < t_len; ++t) {
    const double yhat = sigmoid(logits(t));
    const double y = (*labels)[t];
    const double clipped = std::clamp(yhat, kBceEpsilon, 1.0 - kBceEpsilon);
    total -= y * std::log(clipped) + (1.0 - y) * std::log(1.0 - clipped);
    dlogit(t) = (yhat - y) / t_len;
  }
  if (loss != nullptr) *loss = total / t_len;
  if (grad == nullptr) return logits;

  ParamMap& g = *grad;
  for (const auto& [name, value] : p) g[name] = MatrixXd::Zero(value.rows(), value.cols());
  g["head.w"] = dlogit.transpose() * features.transpose();
  g["head.b"](0, 0) = dlogit.sum();
  const MatrixXd dfeat = p.at("head.w").transpose() * dlogit.transpose();
  if (m.kind == ModelKind::kBiLstm) {
    lstm_backward(p.at("fwd.wh"), x, fwd, dfeat.topRows(hd), false, g["fwd.wx"],
                  g["fwd.wh"], g["fwd.b"]);
    lstm_backward(p.at("bwd.wh"), x, bwd, dfeat.bottomRows(hd), true,
                  g["bwd.wx"], g["bwd.wh"], g["bwd.b"]);
  } else {
    const MatrixXd dpre = dfeat.cwiseProduct(
        (1.0 - features.array().square()).matrix());
    g["hidden.w"] = dpre * x.transpose();
    g["hidden.b"] = dpre.rowwise().sum();
  }
  return logits;
}

void check_labels(const FeatureSequence& seq) {
  if (!seq.labels || seq.labels->size() != seq.length()) {
    throw Error(ErrorCode::kMalformedRecord,
                "'" + seq.sample_id + "' needs one label per line");
  }
  for (int y : *seq.labels) {
    if (y != 0 && y != 1) {
      throw Error(ErrorCode::kMalformedRecord,
                  "'" + seq.sample_id + "' labels must be 0 or 1");
    }
  }
}

}  // namespace

std::string_view model_kind_name(ModelKind kind) {
  return kind == ModelKind::kBiLstm ? "bilstm" : "mlp";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "bilstm") return ModelKind::kBiLstm;
  if (name == "mlp") return ModelKind::kMlp;
  throw Error(ErrorCode::kConfig, "unknown classifier kind '" + std::string(name) + "'");
}

Normalizer Normalizer::identity(size_t dim) {
  return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
}

Normalizer Normalizer::fit(std::span<const FeatureSequence> data) {
  const size_t dim = data.empty() ? 0 : data.front().dim();
  Normalizer n = identity(dim);
  size_t count = 0;
  std::vector<double> sum(dim, 0.0), sum_sq(dim, 0.0);
  for (const auto& seq : data) {
    for (const auto& v : seq.features) {
      for (size_t i = 0; i < dim; ++i) {
        sum[i] += v[i];
        sum_sq[i] += v[i] * v[i];
      }
      ++count;
    }
  }
  if (count == 0) return n;
  for (size_t i = 0; i < dim; ++i) {
    const double mean = sum[i] / count;
    const double var = std::max(0.0, sum_sq[i] / count - mean * mean);
    n.mean[i] = mean;
    const double sd = std::sqrt(var);
    n.stddev[i] = sd > 1e-12 ? sd : 1.0;
  }
  return n;
}

bool SequenceModel::operator==(const SequenceModel& o) const {
  if (kind != o.kind || input_dim != o.input_dim || hidden_dim != o.hidden_dim ||
      seed != o.seed || normalizer.mean != o.normalizer.mean ||
      normalizer.stddev != o.normalizer.stddev || epochs != o.epochs ||
      learning_rate != o.learning_rate || loss_trace != o.loss_trace ||
      params.size() != o.params.size()) {
    return false;
  }
  for (const auto& [name, value] : params) {
    auto it = o.params.find(name);
    if (it == o.params.end() || it->second.rows() != value.rows() ||
        it->second.cols() != value.cols() || it->second != value) {
      return false;
    }
  }
  return true;
}

SequenceModel init_model(ModelKind kind, int input_dim, int hidden_dim,
                         uint64_t seed) {
  if (input_dim < 1 || hidden_dim < 1) {
    throw Error(ErrorCode::kConfig, "classifier dimensions must be positive");
  }
  SequenceModel m;
  m.kind = kind;
  m.input_dim = input_dim;
  m.hidden_dim = hidden_dim;
  m.seed = seed;
  m.normalizer = Normalizer::identity(input_dim);
  Rng rng(seed);
  for (const auto& [name, shape] : param_shapes(kind, input_dim, hidden_dim)) {
    const int fan_in = name.starts_with("head") ? shape.second
                       : name.ends_with(".b")   ? hidden_dim
                                                : shape.second;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    MatrixXd w(shape.first, shape.second);
    for (int r = 0; r < shape.first; ++r)
      for (int c = 0; c < shape.second; ++c) w(r, c) = rng.uniform(-bound, bound);
    if (kind == ModelKind::kBiLstm && name.ends_with(".b") &&
        !name.starts_with("head")) {
      w.middleRows(hidden_dim, hidden_dim).array() += 1.0;  // forget gate
    }
    m.params.emplace(name, std::move(w));
  }
  return m;
}

double bce_loss(std::span<const double> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                std::to_string(predictions.size()) + " predictions, " +
                    std::to_string(labels.size()) + " labels");
  }
  if (predictions.empty()) return 0.0;
  double total = 0.0;
  for (size_t i = 0; i < predictions.size(); ++i) {
    const double p = std::clamp(predictions[i], kBceEpsilon, 1.0 - kBceEpsilon);
    const double y = labels[i];
    total -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  return total / static_cast<double>(predictions.size());
}

double sequence_loss(const SequenceModel& model, const FeatureSequence& seq,
                     ParamMap* grad) {
  check_labels(seq);
  if (seq.length() == 0) return 0.0;
  const MatrixXd x = standardized(model, seq);
  double loss = 0.0;
  logits_and_grad(model, x, &*seq.labels, grad, &loss);
  return loss;
}

std::vector<double> score(const SequenceModel& model, const FeatureSequence& seq) {
  if (seq.length() == 0) return {};
  const MatrixXd x = standardized(model, seq);
  const VectorXd logits = logits_and_grad(model, x, nullptr, nullptr, nullptr);
  std::vector<double> out(logits.size());
  for (int t = 0; t < logits.size(); ++t) {
    // Keep probabilities strictly inside (0, 1) even for saturated logits.
    out[t] = std::clamp(sigmoid(logits(t)), kBceEpsilon, 1.0 - kBceEpsilon);
  }
  return out;
}

SequenceModel train(std::span<const FeatureSequence> data,
                    const TrainConfig& config) {
  std::vector<const FeatureSequence*> usable;
  for (const auto& seq : data) {
    check_labels(seq);
    if (seq.length() > 0) usable.push_back(&seq);
  }
  if (usable.empty()) throw Error(ErrorCode::kEmptyTrainingSet, "no labelled lines");
  const size_t dim = usable.front()->dim();
  for (const auto* seq : usable) {
    for (const auto& v : seq->features) {
      if (v.size() != dim) {
        throw Error(ErrorCode::kDimensionMismatch,
                    "'" + seq->sample_id + "' has features of length " +
                        std::to_string(v.size()) + ", expected " +
                        std::to_string(dim));
      }
    }
  }
  if (config.epochs < 0 || config.learning_rate <= 0.0) {
    throw Error(ErrorCode::kConfig, "epochs must be >= 0 and learning_rate > 0");
  }

  SequenceModel model = init_model(config.kind, static_cast<int>(dim),
                                   config.hidden, config.seed);
  if (config.standardize) model.normalizer = Normalizer::fit(data);
  model.epochs = config.epochs;
  model.learning_rate = config.learning_rate;

  std::vector<MatrixXd> inputs;
  inputs.reserve(usable.size());
  size_t total_lines = 0;
  for (const auto* seq : usable) {
    inputs.push_back(standardized(model, *seq));
    total_lines += seq->length();
  }

  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<size_t> order(usable.size());
  ParamMap grad;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (size_t idx : order) {
      double loss = 0.0;
      logits_and_grad(model, inputs[idx], &*usable[idx]->labels, &grad, &loss);
      epoch_loss += loss * usable[idx]->length();
      double norm_sq = 0.0;
      for (const auto& [name, g] : grad) norm_sq += g.squaredNorm();
      const double norm = std::sqrt(norm_sq);
      const double step = norm > config.clip_norm
                              ? config.learning_rate * config.clip_norm / norm
                              : config.learning_rate;
      for (auto& [name, w] : model.params) w -= step * grad.at(name);
    }
    model.loss_trace.push_back(epoch_loss / static_cast<double>(total_lines));
  }
  return model;
}

SequenceModel swap_directions(const SequenceModel& model) {
  if (model.kind != ModelKind::kBiLstm) return model;
  SequenceModel s = model;
  for (const char* part : {"wx", "wh", "b"}) {
    std::swap(s.params.at(std::string("fwd.") + part),
              s.params.at(std::string("bwd.") + part));
  }
  MatrixXd& w = s.params.at("head.w");
  const int h = model.hidden_dim;
  const MatrixXd left = w.leftCols(h);
  w.leftCols(h) = w.rightCols(h);
  w.rightCols(h) = left;
  return s;
}

json model_to_json(const SequenceModel& model) {
  json params = json::object();
  for (const auto& [name, w] : model.params) {
    std::vector<double> flat;
    flat.reserve(w.size());
    for (int r = 0; r < w.rows(); ++r)
      for (int c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
    params[name] = flat;
  }
  return json{{"kind", model_kind_name(model.kind)},
              {"D", model.input_dim},
              {"H", model.hidden_dim},
              {"seed", model.seed},
              {"normalizer",
               {{"mean", model.normalizer.mean}, {"std", model.normalizer.stddev}}},
              {"params", params},
              {"training",
               {{"epochs", model.epochs},
                {"learning_rate", model.learning_rate},
                {"loss_trace", model.loss_trace}}}};
}

SequenceModel model_from_json(const json& doc) {
  SequenceModel m;
  try {
    m.kind = parse_model_kind(doc.at("kind").get<std::string>());
    m.input_dim = doc.at("D").get<int>();
    m.hidden_dim = doc.at("H").get<int>();
    m.seed = doc.at("seed").get<uint64_t>();
    m.normalizer.mean = doc.at("normalizer").at("mean").get<std::vector<double>>();
    m.normalizer.stddev = doc.at("normalizer").at("std").get<std::vector<double>>();
    if (doc.contains("training")) {
      const json& t = doc["training"];
      m.epochs = t.value("epochs", 0);
      m.learning_rate = t.value("learning_rate", 0.0);
      m.loss_trace = t.value("loss_trace", std::vector<double>{});
    }
    if (m.normalizer.mean.size() != static_cast<size_t>(m.input_dim) ||
        m.normalizer.stddev.size() != static_cast<size_t>(m.input_dim)) {
      throw Error(ErrorCode::kDimensionMismatch, "normalizer length differs from D");
    }
    for (const auto& [name, shape] : param_shapes(m.kind, m.input_dim, m.hidden_dim)) {
      const auto flat = doc.at("params").at(name).get<std::vector<double>>();
      if (flat.size() != static_cast<size_t>(shape.first) * shape.second) {
        throw Error(ErrorCode::kDimensionMismatch, "parameter '" + name + "' has wrong size");
      }
      MatrixXd w(shape.first, shape.second);
      for (int r = 0; r < shape.first; ++r)
        for (int c = 0; c < shape.second; ++c) w(r, c) = flat[r * shape.second + c];
      m.params.emplace(name, std::move(w));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedRecord, std::string("model file: ") + e.what());
  }
  return m;
}

void save_model(const SequenceModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << model_to_json(model).dump() << '\n';
}

SequenceModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return model_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kMalformedRecord, path.string() + ": " + e.what());
  }
}

}  // namespace linefocus
