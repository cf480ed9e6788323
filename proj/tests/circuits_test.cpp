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

#include "qre/circuits.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "qre/rng.hpp"

namespace {

using namespace qre;
constexpr double kPi = std::numbers::pi;

StateVector random_state(int n, Rng &rng) {
  Vec v(std::size_t{1} << n);
  for (auto &a : v) a = cplx(rng.normal(), rng.normal());
  return StateVector::from_amplitudes(v, true);
}

std::vector<double> random_params(int count, Rng &rng) {
  std::vector<double> p(static_cast<std::size_t>(count));
  for (auto &x : p) x = rng.uniform(-kPi, kPi);
  return p;
}

int cnot_count(const ParamCircuit &c) {
  int k = 0;
  for (const auto &op : c.ops()) k += op.kind == OpKind::Cnot;
  return k;
}

TEST(Circuits, ParameterCounts) {
  EXPECT_EQ(build_classifier_circuit(8, 1, 10).param_count(), 360);
  const auto single = build_classifier_circuit(1, 0, 1);
  EXPECT_EQ(single.param_count(), 4);
  EXPECT_EQ(cnot_count(single), 0);
  EXPECT_EQ(build_classifier_circuit(4, 0, 4).param_count(), 64);
  EXPECT_EQ(build_adversarial_circuit(2, 1).param_count(), 8);
  EXPECT_EQ(cnot_count(build_classifier_circuit(5, 0, 3)), 12);
  EXPECT_EQ(cnot_count(build_adversarial_circuit(5, 3)), 24);
  EXPECT_THROW(build_classifier_circuit(0, 1, 1), std::invalid_argument);
  EXPECT_THROW(build_adversarial_circuit(3, 0), std::invalid_argument);
}

TEST(Circuits, ParameterIndexLayout) {
  const auto c = build_classifier_circuit(3, 0, 2);
  const auto &p = c.param_info(1 * 12 + 2 * 3 + 1);
  EXPECT_EQ(p.layer, 1);
  EXPECT_EQ(p.unit, 2);
  EXPECT_EQ(p.qubit, 1);
  EXPECT_EQ(p.axis, 'X');
  EXPECT_EQ(c.param_info(3 + 2).axis, 'Z');
  EXPECT_EQ(c.generator(5).str(), "+IIZ");
}

TEST(Circuits, AdversarialIdentityOnBasisStates) {
  for (int n = 1; n <= 6; ++n) {
    const auto c = build_adversarial_circuit(n, 4);
    const std::vector<double> zero(static_cast<std::size_t>(c.param_count()), 0.0);
    for (std::size_t b = 0; b < (std::size_t{1} << n); ++b) {
      const auto out = apply_circuit(StateVector::basis(n, b), c, zero);
      ASSERT_NEAR(std::abs(out[b] - cplx(1)), 0.0, 1e-10) << "n=" << n << " b=" << b;
    }
  }
  const auto c = build_adversarial_circuit(4, 4);
  const auto out = apply_circuit(StateVector::basis(4, 0b1010), c, std::vector<double>(64, 0.0));
  EXPECT_NEAR(std::abs(out[0b1010]), 1.0, 1e-12);
}

TEST(Circuits, AdversarialIdentityOnRandomStates) {
  Rng rng(21);
  for (int n = 1; n <= 10; ++n) {
    for (int L = 1; L <= 8; ++L) {
      const auto c = build_adversarial_circuit(n, L);
      const std::vector<double> zero(static_cast<std::size_t>(c.param_count()), 0.0);
      for (int t = 0; t < (n > 6 ? 2 : 3); ++t) {
        const auto s = random_state(n, rng);
        ASSERT_NEAR(fidelity(apply_circuit(s, c, zero), s), 1.0, 1e-10);
      }
    }
  }
}

TEST(Circuits, ClassifierAtZeroKeepsAllZeros) {
  const auto c = build_classifier_circuit(4, 1, 3);
  const auto out = apply_circuit(StateVector(5), c, std::vector<double>(60, 0.0));
  EXPECT_NEAR(std::abs(out[0] - cplx(1)), 0.0, 1e-12);
}

TEST(Circuits, InverseRoundTrip) {
  Rng rng(22);
  const auto c = build_classifier_circuit(5, 1, 3);
  const auto p = random_params(c.param_count(), rng);
  const auto s = random_state(6, rng);
  const auto back = apply_circuit_inverse(apply_circuit(s, c, p), c, p);
  EXPECT_LT((back.amps() - s.amps()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Circuits, SingleQubitRotationConvention) {
  const auto c = build_classifier_circuit(1, 0, 1);
  const auto half = apply_circuit(StateVector(1), c, {kPi / 2, 0, 0, 0});
  EXPECT_NEAR(std::abs(half[1] - cplx(0, -1)), 0.0, 1e-15);
  const auto full = apply_circuit(StateVector(1), c, {kPi, 0, 0, 0});
  EXPECT_NEAR(std::abs(full[0] - cplx(-1)), 0.0, 1e-15);
  EXPECT_THROW(apply_circuit(StateVector(1), c, {0.0}), std::invalid_argument);
}

TEST(Gradients, SingleQubitAnalytic) {
  const auto c = build_classifier_circuit(1, 0, 1);
  const auto z = Observable::pauli(PauliString::parse("Z"));
  for (const char *method : {"parameter-shift", "adjoint"}) {
    const auto g0 = loss_gradient(StateVector(1), c, {0, 0, 0, 0}, z, method);
    EXPECT_NEAR(g0[0], 0.0, 1e-14);
    const auto g1 = loss_gradient(StateVector(1), c, {kPi / 8, 0, 0, 0}, z, method);
    EXPECT_NEAR(g1[0], -2 * std::sin(kPi / 4), 1e-12);
  }
}

TEST(Gradients, ParameterShiftAdjointFiniteDifferenceAgree) {
  Rng rng(23);
  const char letters[] = {'I', 'X', 'Y', 'Z'};
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(6));
    const int P = 1 + static_cast<int>(rng.below(3));
    const auto c = rng.uniform() < 0.5 ? build_classifier_circuit(n, 0, P) : build_adversarial_circuit(n, P);
    PauliString p;
    p.n_qubits = n;
    for (int q = 0; q < n; ++q) p.set(q, letters[rng.below(4)]);
    const auto obs = Observable::pauli(p);
    const auto params = random_params(c.param_count(), rng);
    const auto psi = random_state(n, rng);
    const auto ps = loss_gradient(psi, c, params, obs, "parameter-shift");
    const auto adj = loss_gradient(psi, c, params, obs, "adjoint");
    const auto fd = finite_difference_gradient(
        [&](const std::vector<double> &x) { return circuit_expectation(psi, c, x, obs); }, params);
    for (std::size_t l = 0; l < ps.size(); ++l) {
      ASSERT_NEAR(ps[l], fd[l], 1e-5);
      ASSERT_NEAR(ps[l], adj[l], 1e-10);
    }
  }
}

TEST(Gradients, DisjointSupportGivesZero) {
  // Last-unit rotations on qubit 1 act after the final entangler and commute with Z_0.
  Rng rng(24);
  const auto c = build_classifier_circuit(2, 0, 2);
  const auto params = random_params(c.param_count(), rng);
  const auto g = loss_gradient(random_state(2, rng), c, params, Observable::pauli(PauliString::parse("ZI")));
  EXPECT_NEAR(g[1 * 8 + 2 * 2 + 1], 0.0, 1e-13);
  EXPECT_NEAR(g[1 * 8 + 3 * 2 + 1], 0.0, 1e-13);
}

TEST(Circuits, EffectiveGeneratorMatchesDense) {
  const int n = 4;
  const auto c = build_adversarial_circuit(n, 2);
  const std::vector<double> zero(static_cast<std::size_t>(c.param_count()), 0.0);
  const Mat ent = [&] {
    Mat u = Mat::Identity(16, 16);
    for (int q = 0; q + 1 < n; ++q) {
      Mat g = Mat::Zero(16, 16);
      for (int i = 0; i < 16; ++i) g(((i >> q) & 1) ? (i ^ (1 << (q + 1))) : i, i) = 1;
      u = g * u;
    }
    return u;
  }();
  for (int l = 0; l < c.param_count(); ++l) {
    const auto &info = c.param_info(l);
    const Mat a = to_dense(c.generator(l));
    const Mat expected = info.unit >= 2 ? Mat(ent.adjoint() * a * ent) : a;
    EXPECT_LT((to_dense(c.effective_generator_at_zero(l)) - expected).norm(), 1e-12) << l;
  }
}

TEST(Circuits, JsonDescriptor) {
  const auto j = build_adversarial_circuit(3, 2).to_json();
  EXPECT_EQ(j["param_count"], 24);
  EXPECT_EQ(j["adversarial"], true);
  EXPECT_EQ(j["ops"].size(), 2u * (12 + 4));
}

}  // namespace
