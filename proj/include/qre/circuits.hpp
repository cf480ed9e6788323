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

// Layered parametrized circuits.
//
// One layer, in time order, is
//   X(a) Z(b) on every qubit, CNOT chain, X(c) Z(d) on every qubit
// followed, for adversarial circuits, by the reversed CNOT chain. Rotations are
// exp(-i theta P) with P in {X, Z}. Parameter index is
//   layer * 4 * n + unit * n + qubit,  unit in {a, b, c, d} = {0, 1, 2, 3}.

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qre/error.hpp"
#include "qre/statevec.hpp"

namespace qre {

enum class OpKind { RotX, RotZ, Cnot };

struct CircuitOp {
  OpKind kind;
  int q0;          // rotation target, or CNOT control
  int q1 = -1;     // CNOT target
  int param = -1;  // parameter index for rotations
};

struct ParamInfo {
  int layer;
  int unit;
  int qubit;
  char axis;  // 'X' or 'Z'
};

class ParamCircuit {
 public:
  ParamCircuit() = default;

  int n_qubits() const { return n_qubits_; }
  int layers() const { return layers_; }
  bool adversarial() const { return adversarial_; }
  int param_count() const { return static_cast<int>(params_.size()); }
  const std::vector<CircuitOp> &ops() const { return ops_; }
  const ParamInfo &param_info(int l) const { return params_.at(static_cast<std::size_t>(l)); }
  const std::string &kind() const { return kind_; }

  /// Generator A_l of parameter l as a Pauli string on all qubits.
  PauliString generator(int l) const {
    const auto &p = param_info(l);
    return PauliString::single(n_qubits_, p.qubit, p.axis);
  }

  /// Effective generator U_-^dag A_l U_- at all-zero parameters, where U_- is
  /// the part of the circuit executed before parameter l.
  PauliString effective_generator_at_zero(int l) const {
    PauliString p = generator(l);
    std::size_t pos = 0;
    while (ops_[pos].param != l) ++pos;
    for (std::size_t k = pos; k-- > 0;) {
      if (ops_[k].kind == OpKind::Cnot) conjugate_by_cnot(p, ops_[k].q0, ops_[k].q1);
    }
    return p;
  }

  nlohmann::json to_json() const {
    nlohmann::json ops = nlohmann::json::array();
    for (const auto &op : ops_) {
      if (op.kind == OpKind::Cnot) {
        ops.push_back({{"gate", "cnot"}, {"control", op.q0}, {"target", op.q1}});
      } else {
        ops.push_back({{"gate", op.kind == OpKind::RotX ? "rx" : "rz"}, {"qubit", op.q0}, {"param", op.param}});
      }
    }
    return {{"kind", kind_},
            {"n_qubits", n_qubits_},
            {"layers", layers_},
            {"adversarial", adversarial_},
            {"param_count", param_count()},
            {"rotation", "exp(-i theta P)"},
            {"ops", ops}};
  }

  friend ParamCircuit build_layered_circuit(const std::string &kind, int n_qubits, int layers, bool adversarial);

 private:
  std::string kind_;
  int n_qubits_ = 0;
  int layers_ = 0;
  bool adversarial_ = false;
  std::vector<CircuitOp> ops_;
  std::vector<ParamInfo> params_;
};

inline ParamCircuit build_layered_circuit(const std::string &kind, int n_qubits, int layers, bool adversarial) {
  detail::require(n_qubits >= 1 && n_qubits <= kMaxQubits, "qubit count out of range");
  detail::require(layers >= 1, "layer count must be positive");
  ParamCircuit c;
  c.kind_ = kind;
  c.n_qubits_ = n_qubits;
  c.layers_ = layers;
  c.adversarial_ = adversarial;
  const int n = n_qubits;
  c.params_.resize(static_cast<std::size_t>(4 * n * layers));
  auto rotation_unit = [&](int layer, int first_unit) {
    for (int u = first_unit; u < first_unit + 2; ++u) {
      const char axis = (u % 2 == 0) ? 'X' : 'Z';
      for (int q = 0; q < n; ++q) {
        const int idx = layer * 4 * n + u * n + q;
        c.params_[static_cast<std::size_t>(idx)] = {layer, u, q, axis};
        c.ops_.push_back({axis == 'X' ? OpKind::RotX : OpKind::RotZ, q, -1, idx});
      }
    }
  };
  for (int layer = 0; layer < layers; ++layer) {
    rotation_unit(layer, 0);
    for (int q = 0; q + 1 < n; ++q) c.ops_.push_back({OpKind::Cnot, q, q + 1, -1});
    rotation_unit(layer, 2);
    if (adversarial) {
      for (int q = n - 2; q >= 0; --q) c.ops_.push_back({OpKind::Cnot, q, q + 1, -1});
    }
  }
  return c;
}

/// Classifier circuit on n data + m ancilla qubits with P layers.
inline ParamCircuit build_classifier_circuit(int n, int m, int P) {
  detail::require(n >= 1 && m >= 0 && P >= 1, "invalid classifier circuit shape");
  return build_layered_circuit("classifier", n + m, P, false);
}

/// Adversarial circuit: identity at all-zero parameters.
inline ParamCircuit build_adversarial_circuit(int n, int L) {
  detail::require(n >= 1 && L >= 1, "invalid adversarial circuit shape");
  return build_layered_circuit("adversarial", n, L, true);
}

namespace detail {

inline void check_params(const ParamCircuit &c, const std::vector<double> &params) {
  detail::require(static_cast<int>(params.size()) == c.param_count(), "parameter vector length mismatch");
}

inline void apply_op(Vec &a, const CircuitOp &op, double theta) {
  switch (op.kind) {
    case OpKind::RotX: kernel::apply_rx(a, op.q0, theta); break;
    case OpKind::RotZ: kernel::apply_rz(a, op.q0, theta); break;
    case OpKind::Cnot: kernel::apply_cnot(a, op.q0, op.q1); break;
  }
}

inline void apply_op_inverse(Vec &a, const CircuitOp &op, double theta) { apply_op(a, op, -theta); }

}  // namespace detail

/// In-place application on a raw amplitude vector of matching dimension.
inline void apply_circuit(Vec &a, const ParamCircuit &c, const std::vector<double> &params) {
  detail::check_params(c, params);
  for (const auto &op : c.ops()) detail::apply_op(a, op, op.param >= 0 ? params[op.param] : 0.0);
}

inline void apply_circuit_inverse(Vec &a, const ParamCircuit &c, const std::vector<double> &params) {
  detail::check_params(c, params);
  const auto &ops = c.ops();
  for (std::size_t k = ops.size(); k-- > 0;) {
    detail::apply_op_inverse(a, ops[k], ops[k].param >= 0 ? params[ops[k].param] : 0.0);
  }
}

inline StateVector apply_circuit(StateVector s, const ParamCircuit &c, const std::vector<double> &params) {
  detail::require(s.n_qubits() == c.n_qubits(), "circuit and state qubit counts differ");
  apply_circuit(s.mutable_amps(), c, params);
  return s;
}

inline StateVector apply_circuit_inverse(StateVector s, const ParamCircuit &c, const std::vector<double> &params) {
  detail::require(s.n_qubits() == c.n_qubits(), "circuit and state qubit counts differ");
  apply_circuit_inverse(s.mutable_amps(), c, params);
  return s;
}

/// Dense unitary of the circuit (small n only).
inline Mat circuit_unitary(const ParamCircuit &c, const std::vector<double> &params) {
  const std::size_t d = std::size_t{1} << c.n_qubits();
  Mat u(d, d);
  for (std::size_t j = 0; j < d; ++j) {
    Vec e = Vec::Zero(d);
    e[j] = 1.0;
    apply_circuit(e, c, params);
    u.col(j) = e;
  }
  return u;
}

// ---------------------------------------------------------------------------
// Gradients of L(theta) = <psi_out|O|psi_out>.

/// Reverse-mode sweep from the circuit output: given phi = U|psi> and
/// lambda = O phi, returns dL/dtheta_l = 2 Im <lambda_l|A_l|phi_l>.
inline std::vector<double> adjoint_sweep(const ParamCircuit &c, const std::vector<double> &params, Vec phi,
                                         Vec lambda) {
  detail::check_params(c, params);
  std::vector<double> grad(static_cast<std::size_t>(c.param_count()), 0.0);
  const auto &ops = c.ops();
  const std::size_t d = static_cast<std::size_t>(phi.size());
  for (std::size_t k = ops.size(); k-- > 0;) {
    const auto &op = ops[k];
    if (op.param >= 0) {
      const std::size_t m = std::size_t{1} << op.q0;
      const double *l = kernel::raw(lambda), *f = kernel::raw(phi);
      // Im(conj(l_i) f_j) = l_i.re f_j.im - l_i.im f_j.re
      auto im = [&](std::size_t i, std::size_t j) { return l[2 * i] * f[2 * j + 1] - l[2 * i + 1] * f[2 * j]; };
      double acc = 0.0;
      if (op.kind == OpKind::RotX) {
        for (std::size_t base = 0; base < d; base += 2 * m) {
          for (std::size_t i = base; i < base + m; ++i) acc += im(i, i + m) + im(i + m, i);
        }
      } else {
        for (std::size_t base = 0; base < d; base += 2 * m) {
          for (std::size_t i = base; i < base + m; ++i) acc += im(i, i) - im(i + m, i + m);
        }
      }
      grad[static_cast<std::size_t>(op.param)] += 2.0 * acc;
    }
    const double theta = op.param >= 0 ? params[op.param] : 0.0;
    detail::apply_op_inverse(phi, op, theta);
    detail::apply_op_inverse(lambda, op, theta);
  }
  return grad;
}

/// Adjoint-method gradient for an arbitrary Hermitian observable given as a
/// callable Vec -> Vec.
template <class ApplyObs>
std::vector<double> adjoint_expectation_gradient(const Vec &psi, const ParamCircuit &c,
                                                 const std::vector<double> &params, ApplyObs &&apply_obs,
                                                 double *value = nullptr) {
  Vec phi = psi;
  apply_circuit(phi, c, params);
  Vec lambda = apply_obs(phi);
  if (value) *value = phi.dot(lambda).real();
  return adjoint_sweep(c, params, std::move(phi), std::move(lambda));
}

inline double circuit_expectation(const StateVector &psi, const ParamCircuit &c, const std::vector<double> &params,
                                  const Observable &obs) {
  return expectation(apply_circuit(psi, c, params), obs);
}

/// Parameter-shift rule for exp(-i theta P): dL/dtheta = L(theta + pi/4) - L(theta - pi/4).
inline std::vector<double> parameter_shift_gradient(const StateVector &psi, const ParamCircuit &c,
                                                    const std::vector<double> &params, const Observable &obs) {
  detail::check_params(c, params);
  std::vector<double> grad(params.size());
  std::vector<double> shifted = params;
  constexpr double kShift = std::numbers::pi / 4;
  for (std::size_t l = 0; l < params.size(); ++l) {
    shifted[l] = params[l] + kShift;
    const double plus = circuit_expectation(psi, c, shifted, obs);
    shifted[l] = params[l] - kShift;
    const double minus = circuit_expectation(psi, c, shifted, obs);
    shifted[l] = params[l];
    grad[l] = plus - minus;
  }
  return grad;
}

/// Central finite differences of an arbitrary scalar function of the parameters.
inline std::vector<double> finite_difference_gradient(const std::function<double(const std::vector<double> &)> &f,
                                                      const std::vector<double> &params, double step = 1e-6) {
  std::vector<double> grad(params.size());
  std::vector<double> p = params;
  for (std::size_t l = 0; l < params.size(); ++l) {
    p[l] = params[l] + step;
    const double plus = f(p);
    p[l] = params[l] - step;
    const double minus = f(p);
    p[l] = params[l];
    grad[l] = (plus - minus) / (2 * step);
  }
  return grad;
}

/// Gradient of an expectation-valued loss; `method` is "adjoint" or
/// "parameter-shift". Both are exact for the circuit's Pauli generators.
inline std::vector<double> loss_gradient(const StateVector &psi, const ParamCircuit &c,
                                         const std::vector<double> &params, const Observable &obs,
                                         const std::string &method = "parameter-shift") {
  detail::require(psi.n_qubits() == c.n_qubits() && obs.dim() == psi.dim(), "dimension mismatch");
  if (method == "parameter-shift") return parameter_shift_gradient(psi, c, params, obs);
  if (method == "adjoint") {
    return adjoint_expectation_gradient(psi.amps(), c, params, [&](const Vec &v) { return obs.apply(v); });
  }
  throw std::invalid_argument("unknown gradient method: " + method);
}

}  // namespace qre
