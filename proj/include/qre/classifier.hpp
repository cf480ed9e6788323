// Copyright 2026 The QRE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Variational quantum classifier on n data qubits plus one readout ancilla.
//
// The ancilla is qubit n, the most significant bit, so an input |psi> is
// embedded as |psi> (x) |0>_anc = [psi; 0]. Pr(y) is the probability of
// reading y on the ancilla after the classifier circuit V(Theta).

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qre/circuits.hpp"
#include "qre/dataset.hpp"
#include "qre/error.hpp"
#include "qre/parallel.hpp"
#include "qre/rng.hpp"
#include "qre/statevec.hpp"

namespace qre {

enum class LossKind { KL, NormalizedSquare };

inline std::string to_string(LossKind k) { return k == LossKind::KL ? "kl" : "ns"; }

inline LossKind parse_loss_kind(const std::string &s) {
  if (s == "kl") return LossKind::KL;
  if (s == "ns") return LossKind::NormalizedSquare;
  throw ConfigError("unknown loss '" + s + "' (expected kl or ns)");
}

inline constexpr double kKlClamp = 1e-12;

/// -sum_k p_k log q_k with q clamped below at 1e-12.
inline double kl_loss(std::pair<double, double> q, std::pair<double, double> p) {
  detail::require(std::abs(q.first + q.second - 1.0) <= 1e-8, "q must sum to one");
  return -(p.first * std::log(std::max(q.first, kKlClamp)) + p.second * std::log(std::max(q.second, kKlClamp)));
}

/// 1 - p_y^2.
inline double ns_loss(std::pair<double, double> probs, int label) {
  const double py = label == 0 ? probs.first : probs.second;
  return 1.0 - py * py;
}

inline double loss_from_probability(LossKind kind, double py) {
  return kind == LossKind::KL ? -std::log(std::max(py, kKlClamp)) : 1.0 - py * py;
}

/// d loss / d p_y.
inline double loss_derivative(LossKind kind, double py) {
  if (kind == LossKind::KL) return py > kKlClamp ? -1.0 / py : 0.0;
  return -2.0 * py;
}

struct ClassifierModel {
  int n_data = 0;
  ParamCircuit circuit;
  std::vector<double> params;
  LossKind loss = LossKind::KL;
  std::uint64_t seed = 0;
  int epochs_trained = 0;

  int ancilla() const { return n_data; }
  int layers() const { return circuit.layers(); }
};

/// Classifier with angles drawn uniformly from [-pi, pi].
inline ClassifierModel make_classifier(int n_data, int layers, std::uint64_t seed, LossKind loss = LossKind::KL) {
  ClassifierModel m;
  m.n_data = n_data;
  m.circuit = build_classifier_circuit(n_data, 1, layers);
  m.loss = loss;
  m.seed = seed;
  Rng rng = Rng(seed).split(0xC1A55);
  m.params.resize(static_cast<std::size_t>(m.circuit.param_count()));
  for (auto &p : m.params) p = rng.uniform(-std::numbers::pi, std::numbers::pi);
  return m;
}

inline Vec embed_with_ancilla(const Vec &psi) {
  Vec out = Vec::Zero(2 * psi.size());
  out.head(psi.size()) = psi;
  return out;
}

namespace detail {

inline void check_input(const ClassifierModel &m, const Vec &psi) {
  detail::require(psi.size() == (Eigen::Index{1} << m.n_data), "input state has the wrong number of qubits");
}

/// Zeroes the half of v where the ancilla differs from y.
inline void project_ancilla(Vec &v, int y) {
  const auto half = v.size() / 2;
  (y == 0 ? v.tail(half) : v.head(half)).setZero();
}

}  // namespace detail

inline std::pair<double, double> class_probs(const ClassifierModel &m, const Vec &psi) {
  detail::check_input(m, psi);
  Vec v = embed_with_ancilla(psi);
  apply_circuit(v, m.circuit, m.params);
  const auto half = v.size() / 2;
  const double p0 = v.head(half).squaredNorm(), p1 = v.tail(half).squaredNorm();
  const double t = p0 + p1;
  return {p0 / t, p1 / t};
}

inline std::pair<double, double> class_probs(const ClassifierModel &m, const StateVector &s) {
  return class_probs(m, s.amps());
}

/// Label 0 iff Pr(0) >= Pr(1); |p0 - p1| < 1e-12 counts as a tie.
inline int predict_from_probs(std::pair<double, double> p) {
  if (std::abs(p.first - p.second) < 1e-12) return 0;
  return p.first >= p.second ? 0 : 1;
}

inline int predict(const ClassifierModel &m, const StateVector &s) { return predict_from_probs(class_probs(m, s)); }

inline double sample_loss(const ClassifierModel &m, const Vec &psi, int label, LossKind kind) {
  const auto p = class_probs(m, psi);
  return loss_from_probability(kind, label == 0 ? p.first : p.second);
}

/// H_eff v = <0_anc| V^dag P_y V |v (x) 0_anc>, the data-register observable
/// whose expectation is Pr(y).
inline Vec apply_effective_observable(const ClassifierModel &m, int label, const Vec &v) {
  Vec w = embed_with_ancilla(v);
  apply_circuit(w, m.circuit, m.params);
  detail::project_ancilla(w, label);
  apply_circuit_inverse(w, m.circuit, m.params);
  return w.head(v.size());
}

struct LossAndGradient {
  double loss;
  double prob;  // Pr(label)
  std::vector<double> grad;
};

/// Loss of one sample and its gradient with respect to the classifier angles.
inline LossAndGradient sample_loss_and_gradient(const ClassifierModel &m, const Vec &psi, int label,
                                                LossKind kind) {
  detail::check_input(m, psi);
  double py = 0.0;
  auto g = adjoint_expectation_gradient(
      embed_with_ancilla(psi), m.circuit, m.params,
      [&](const Vec &phi) {
        Vec out = phi;
        detail::project_ancilla(out, label);
        return out;
      },
      &py);
  const double scale = loss_derivative(kind, py);
  for (auto &x : g) x *= scale;
  return {loss_from_probability(kind, py), py, std::move(g)};
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  LossKind loss = LossKind::KL;
  int layers = 10;
  double learning_rate = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 100;
  int iterations_per_epoch = 10;
  int batch_size = 0;  // 0 = full training set
  double train_fraction = 0.8;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(learning_rate > 0 && beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && epsilon > 0)) {
      throw ConfigError("optimizer rates must be positive and betas in [0, 1)");
    }
    if (epochs < 1 || iterations_per_epoch < 1 || layers < 1 || batch_size < 0) {
      throw ConfigError("epochs, iterations and layers must be positive");
    }
    if (!(train_fraction > 0 && train_fraction <= 1)) throw ConfigError("train_fraction must be in (0, 1]");
  }
};

class Adam {
 public:
  Adam(std::size_t size, double lr, double beta1, double beta2, double eps)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps), m_(size, 0.0), v_(size, 0.0) {}

  void step(std::vector<double> &params, const std::vector<double> &grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, t_), c2 = 1.0 - std::pow(b2_, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = b1_ * m_[i] + (1 - b1_) * grad[i];
      v_[i] = b2_ * v_[i] + (1 - b2_) * grad[i] * grad[i];
      params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
  }

 private:
  double lr_, b1_, b2_, eps_;
  std::vector<double> m_, v_;
  int t_ = 0;
};

struct EpochRecord {
  int epoch;
  double train_loss;
  double train_accuracy;
  double val_loss;
  double val_accuracy;
};

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

inline Evaluation evaluate(const ClassifierModel &m, const Dataset &ds, const std::vector<std::size_t> &indices,
                           LossKind kind) {
  Evaluation e;
  if (indices.empty()) return e;
  std::vector<double> losses(indices.size());
  std::vector<int> correct(indices.size());
  parallel_for(indices.size(), [&](std::size_t k) {
    const auto &s = ds.samples[indices[k]];
    const auto p = class_probs(m, s.state);
    losses[k] = loss_from_probability(kind, s.label == 0 ? p.first : p.second);
    correct[k] = predict_from_probs(p) == s.label;
  });
  for (std::size_t k = 0; k < indices.size(); ++k) {
    e.loss += losses[k];
    e.accuracy += correct[k];
  }
  e.loss /= static_cast<double>(indices.size());
  e.accuracy /= static_cast<double>(indices.size());
  return e;
}

struct TrainResult {
  ClassifierModel model;
  std::vector<EpochRecord> trace;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> val_indices;
};

inline TrainResult train(const Dataset &ds, const TrainConfig &cfg) {
  cfg.validate();
  detail::require(ds.size() > 0, "dataset is empty");
  for (const auto &s : ds.samples) detail::require(s.label == 0 || s.label == 1, "labels must be 0 or 1");
  TrainResult r;
  r.model = make_classifier(ds.n, cfg.layers, cfg.seed, cfg.loss);
  std::tie(r.train_indices, r.val_indices) = split_indices(ds, cfg.train_fraction);
  detail::require(!r.train_indices.empty(), "training split is empty");

  auto &m = r.model;
  Adam adam(m.params.size(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
  Rng batch_rng = Rng(cfg.seed).split(0xBA7C4);
  const std::size_t ntrain = r.train_indices.size();
  const std::size_t batch = cfg.batch_size == 0 ? ntrain : std::min<std::size_t>(cfg.batch_size, ntrain);
  std::vector<std::size_t> chosen(batch);
  std::vector<std::vector<double>> grads(batch);
  std::vector<double> losses(batch);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (int it = 0; it < cfg.iterations_per_epoch; ++it) {
      if (batch == ntrain) {
        chosen = r.train_indices;
      } else {
        for (auto &c : chosen) c = r.train_indices[batch_rng.below(ntrain)];
      }
      parallel_for(batch, [&](std::size_t k) {
        const auto &s = ds.samples[chosen[k]];
        auto lg = sample_loss_and_gradient(m, s.state.amps(), s.label, cfg.loss);
        losses[k] = lg.loss;
        grads[k] = std::move(lg.grad);
      });
      std::vector<double> g(m.params.size(), 0.0);
      double loss = 0.0;
      for (std::size_t k = 0; k < batch; ++k) {
        loss += losses[k];
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += grads[k][i];
      }
      for (auto &x : g) x /= static_cast<double>(batch);
      loss /= static_cast<double>(batch);
      bool finite = std::isfinite(loss);
      for (double x : g) finite = finite && std::isfinite(x);
      if (!finite) {
        throw NumericalError("non-finite loss or gradient at epoch " + std::to_string(epoch) + ", iteration " +
                             std::to_string(it) + " (batch loss " + std::to_string(loss) + ")");
      }
      adam.step(m.params, g);
    }
    const auto tr = evaluate(m, ds, r.train_indices, cfg.loss);
    const auto va = evaluate(m, ds, r.val_indices, cfg.loss);
    r.trace.push_back({epoch, tr.loss, tr.accuracy, va.loss, va.accuracy});
    m.epochs_trained = epoch;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr int kCheckpointFormatVersion = 1;

inline nlohmann::json checkpoint_json(const ClassifierModel &m) {
  return {{"format", "qre-classifier"},
          {"format_version", kCheckpointFormatVersion},
          {"n_data", m.n_data},
          {"ancilla", m.ancilla()},
          {"loss", to_string(m.loss)},
          {"seed", m.seed},
          {"epochs_trained", m.epochs_trained},
          {"circuit", m.circuit.to_json()},
          {"params", m.params}};
}

inline ClassifierModel model_from_json(const nlohmann::json &j) {
  if (j.value("format", "") != "qre-classifier") throw FormatError("not a classifier checkpoint");
  if (j.value("format_version", 0) != kCheckpointFormatVersion) throw FormatError("unsupported checkpoint version");
  ClassifierModel m;
  m.n_data = j.at("n_data");
  m.circuit = build_classifier_circuit(m.n_data, 1, j.at("circuit").at("layers"));
  m.loss = parse_loss_kind(j.at("loss"));
  m.seed = j.at("seed");
  m.epochs_trained = j.at("epochs_trained");
  m.params = j.at("params").get<std::vector<double>>();
  if (static_cast<int>(m.params.size()) != m.circuit.param_count()) throw FormatError("parameter count mismatch");
  return m;
}

inline void save_model(const std::string &path, const ClassifierModel &m) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << checkpoint_json(m).dump(1) << "\n";
}

inline ClassifierModel load_model(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return model_from_json(nlohmann::json::parse(is));
}

}  // namespace qre
