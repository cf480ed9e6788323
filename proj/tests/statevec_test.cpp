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

#include "qre/statevec.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "qre/rng.hpp"

namespace {

using namespace qre;

StateVector random_state(int n, Rng &rng) {
  Vec v(std::size_t{1} << n);
  for (auto &a : v) a = cplx(rng.normal(), rng.normal());
  return StateVector::from_amplitudes(v, true);
}

TEST(StateVector, XOnZeroGivesOne) {
  const auto s = apply_gate(StateVector(1), gates::x(0));
  EXPECT_NEAR(std::abs(s[1] - cplx(1)), 0, 1e-15);
  EXPECT_NEAR(std::abs(s[0]), 0, 1e-15);
}

TEST(StateVector, HadamardOnZero) {
  const auto s = apply_gate(StateVector(1), gates::h(0));
  EXPECT_NEAR(s[0].real(), 1 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(s[1].real(), 1 / std::sqrt(2.0), 1e-15);
}

TEST(StateVector, CnotTruthTable) {
  // |10> in ket order q1 q0 with control qubit 0 set is index 1.
  const auto s = apply_gate(StateVector::basis(2, 0b01), gates::cnot(0, 1));
  EXPECT_NEAR(std::abs(s[0b11] - cplx(1)), 0, 1e-15);
  const auto t = apply_gate(StateVector::basis(2, 0b10), gates::cnot(0, 1));
  EXPECT_NEAR(std::abs(t[0b10] - cplx(1)), 0, 1e-15);
}

TEST(StateVector, RejectsBadGates) {
  StateVector s(2);
  EXPECT_THROW(apply(s, gates::x(2)), std::out_of_range);
  EXPECT_THROW(apply(s, gates::cnot(1, 1)), std::invalid_argument);
  Gate1 bad{Mat2::Identity() * 1.001, 0};
  EXPECT_THROW(apply(s, bad), std::invalid_argument);
  EXPECT_THROW(StateVector::from_amplitudes(Vec::Ones(3)), std::invalid_argument);
  EXPECT_THROW(StateVector::from_amplitudes(Vec::Ones(4)), std::invalid_argument);
}

TEST(StateVector, Expectations) {
  EXPECT_DOUBLE_EQ(expectation(StateVector(1), Observable::pauli(PauliString::parse("Z"))), 1.0);
  const auto plus = apply_gate(StateVector(1), gates::h(0));
  EXPECT_NEAR(expectation(plus, Observable::pauli(PauliString::parse("Z"))), 0.0, 1e-15);
  EXPECT_NEAR(expectation(plus, Observable::pauli(PauliString::parse("X"))), 1.0, 1e-15);
  EXPECT_THROW(expectation(plus, Observable::pauli(PauliString::parse("ZZ"))), std::invalid_argument);
}

TEST(StateVector, AncillaProbs) {
  auto [a0, a1] = ancilla_probs(StateVector(2), 1);
  EXPECT_DOUBLE_EQ(a0, 1.0);
  EXPECT_DOUBLE_EQ(a1, 0.0);
  auto [b0, b1] = ancilla_probs(apply_gate(StateVector(2), gates::h(1)), 1);
  EXPECT_NEAR(b0, 0.5, 1e-15);
  EXPECT_NEAR(b1, 0.5, 1e-15);
  Vec v(2);
  v << std::cos(std::numbers::pi / 8), std::sin(std::numbers::pi / 8);
  auto [c0, c1] = ancilla_probs(StateVector::from_amplitudes(v), 0);
  EXPECT_NEAR(c0, 0.8535533905932737, 1e-12);
  EXPECT_NEAR(c1, 0.1464466094067262, 1e-12);
  EXPECT_THROW(ancilla_probs(StateVector(2), 2), std::out_of_range);
}

TEST(StateVector, Fidelity) {
  EXPECT_DOUBLE_EQ(fidelity(StateVector(1), StateVector(1)), 1.0);
  EXPECT_DOUBLE_EQ(fidelity(StateVector(1), StateVector::basis(1, 1)), 0.0);
  EXPECT_NEAR(fidelity(StateVector(1), apply_gate(StateVector(1), gates::h(0))), 0.5, 1e-15);
  EXPECT_THROW(fidelity(StateVector(1), StateVector(2)), std::invalid_argument);
}

TEST(StateVector, NormPreservedOverRandomGateSequence) {
  Rng rng(11);
  auto s = random_state(6, rng);
  for (int k = 0; k < 500; ++k) {
    const int q = static_cast<int>(rng.below(6));
    const int r = static_cast<int>((q + 1 + rng.below(5)) % 6);
    switch (rng.below(4)) {
      case 0: apply(s, gates::rx(rng.uniform(-3, 3), q)); break;
      case 1: apply(s, gates::rz(rng.uniform(-3, 3), q)); break;
      case 2: apply(s, gates::h(q)); break;
      default: apply(s, gates::cnot(q, r)); break;
    }
  }
  EXPECT_LT(std::abs(s.norm_squared() - 1.0), 1e-9);
}

TEST(StateVector, GateThenAdjointRoundTrip) {
  Rng rng(12);
  const auto s0 = random_state(4, rng);
  const Gate1 g1{gates::rx_matrix(0.3) * gates::rz_matrix(1.1), 2};
  Gate2 g2{gates::cnot(0, 3).u * gates::cz(0, 3).u, 3, 1};
  auto s = apply_gate(apply_gate(s0, g1), g2);
  s = apply_gate(apply_gate(s, adjoint(g2)), adjoint(g1));
  EXPECT_LT((s.amps() - s0.amps()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(StateVector, TwoQubitKernelMatchesKron) {
  // Local index 2*bit(control) + bit(target) against a dense embedding.
  Rng rng(13);
  Mat4 u = gates::cnot(0, 1).u * kron(gates::h_matrix(), gates::rx_matrix(0.7));
  const auto s0 = random_state(2, rng);
  const auto s = apply_gate(s0, Gate2{u, 1, 0});
  EXPECT_LT((s.amps() - u * s0.amps()).norm(), 1e-12);
  Mat swap = Mat::Zero(4, 4);
  swap(0, 0) = swap(1, 2) = swap(2, 1) = swap(3, 3) = 1;
  const auto t = apply_gate(s0, Gate2{u, 0, 1});
  EXPECT_LT((t.amps() - swap * u * swap * s0.amps()).norm(), 1e-12);
}

TEST(Pauli, SparseMatchesDense) {
  Rng rng(14);
  const char letters[] = {'I', 'X', 'Y', 'Z'};
  for (int n = 1; n <= 6; ++n) {
    for (int trial = 0; trial < 10; ++trial) {
      PauliString p;
      p.n_qubits = n;
      p.coeff = rng.uniform() < 0.5 ? -1.0 : 1.0;
      for (int q = 0; q < n; ++q) p.set(q, letters[rng.below(4)]);
      Mat dense = Mat::Identity(1, 1);
      for (int q = n - 1; q >= 0; --q) {
        Mat2 m = p.letter(q) == 'X' ? gates::x_matrix()
                 : p.letter(q) == 'Y' ? gates::y_matrix()
                 : p.letter(q) == 'Z' ? gates::z_matrix()
                                      : Mat2::Identity();
        dense = kron(dense, m);
      }
      dense *= p.coeff;
      EXPECT_LT((to_dense(p) - dense).norm(), 1e-12) << p.str();
      const auto s = random_state(n, rng);
      const double sparse = expectation(s, Observable::pauli(p));
      const double full = expectation(s, Observable::dense(dense));
      EXPECT_NEAR(sparse, full, 1e-10);
    }
  }
}

TEST(Pauli, CnotConjugationMatchesDense) {
  const char letters[] = {'I', 'X', 'Y', 'Z'};
  const Mat c = [] {
    Mat u = Mat::Zero(8, 8);
    for (int i = 0; i < 8; ++i) u((i & 1) ? (i ^ 4) : i, i) = 1;  // CNOT(0 -> 2)
    return u;
  }();
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      for (int e = 0; e < 4; ++e) {
        PauliString p;
        p.n_qubits = 3;
        p.set(0, letters[a]);
        p.set(1, letters[b]);
        p.set(2, letters[e]);
        const Mat expected = c * to_dense(p) * c;
        conjugate_by_cnot(p, 0, 2);
        EXPECT_LT((to_dense(p) - expected).norm(), 1e-12);
      }
    }
  }
}

TEST(Observable, RejectsNonHermitian) {
  Mat m = Mat::Zero(2, 2);
  m(0, 1) = 1.0;
  EXPECT_THROW(Observable::dense(m), std::invalid_argument);
}

TEST(StateVector, ReducedDensityAndPermutation) {
  Rng rng(15);
  const auto a = random_state(1, rng), b = random_state(2, rng);
  const auto s = tensor(a, b);  // a on qubit 2
  const Mat rho = reduced_density(s, {2});
  EXPECT_LT((rho - a.amps() * a.amps().adjoint()).norm(), 1e-12);
  const auto p = permute_qubits(s, {1, 2, 0});  // a moves to qubit 0
  EXPECT_LT((reduced_density(p, {0}) - rho).norm(), 1e-12);
  EXPECT_LT((reduced_density(p, {1, 2}) - reduced_density(s, {0, 1})).norm(), 1e-12);
}

TEST(StateVector, DenseUnitaryOnSubsetMatchesGate2) {
  Rng rng(16);
  const auto s0 = random_state(4, rng);
  Mat4 u = kron(gates::h_matrix(), gates::rz_matrix(0.4)) * gates::cnot(0, 1).u;
  auto s1 = s0;
  apply_unitary(s1, {1, 3}, u);  // local bit 1 = qubit 3
  const auto s2 = apply_gate(s0, Gate2{u, 3, 1});
  EXPECT_LT((s1.amps() - s2.amps()).norm(), 1e-12);
}

}  // namespace
