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

#include "qre/dataset.hpp"

#include <gtest/gtest.h>

#include <sstream>

namespace {

using namespace qre;

// Independent dense construction from 2x2 factors.
Mat dense_cluster_ising(int n, double lambda) {
  auto embed = [n](const std::vector<std::pair<int, Mat2>> &factors) {
    Mat m = Mat::Identity(1, 1);
    for (int q = n - 1; q >= 0; --q) {
      Mat2 f = Mat2::Identity();
      for (const auto &[fq, fm] : factors) {
        if (fq == q) f = fm;
      }
      m = kron(m, f);
    }
    return m;
  };
  const std::size_t d = std::size_t{1} << n;
  Mat h = Mat::Zero(d, d);
  for (int i = 1; i + 1 < n; ++i) {
    h -= embed({{i - 1, gates::x_matrix()}, {i, gates::z_matrix()}, {i + 1, gates::x_matrix()}});
  }
  for (int i = 0; i + 1 < n; ++i) h += lambda * embed({{i, gates::y_matrix()}, {i + 1, gates::y_matrix()}});
  return h;
}

StateVector random_state(int n, Rng &rng) {
  Vec v(std::size_t{1} << n);
  for (auto &a : v) a = cplx(rng.normal(), rng.normal());
  return StateVector::from_amplitudes(v, true);
}

TEST(ClusterIsing, SingleTermActionOnZeros) {
  const Vec hv = hamiltonian_apply({3, 0.0}, StateVector(3));
  Vec expected = Vec::Zero(8);
  expected[0b101] = -1.0;
  EXPECT_LT((hv - expected).norm(), 1e-15);
}

TEST(ClusterIsing, MatrixFreeMatchesDense) {
  Rng rng(31);
  for (int n = 3; n <= 6; ++n) {
    for (double lambda : {0.0, 0.3, 1.7}) {
      const auto v = random_state(n, rng);
      const Vec hv = hamiltonian_apply({n, lambda}, v);
      EXPECT_LT((hv - dense_cluster_ising(n, lambda) * v.amps()).norm(), 1e-10);
    }
  }
}

TEST(ClusterIsing, Hermitian) {
  Rng rng(32);
  const ClusterIsingSpec spec{6, 0.8};
  const auto u = random_state(6, rng), v = random_state(6, rng);
  const cplx a = u.amps().dot(hamiltonian_apply(spec, v));
  const cplx b = hamiltonian_apply(spec, u).dot(v.amps());
  EXPECT_LT(std::abs(a - b), 1e-10);
}

TEST(ClusterIsing, RejectsBadSpec) {
  EXPECT_THROW(hamiltonian_apply({2, 0.0}, StateVector(2)), std::invalid_argument);
  EXPECT_THROW(hamiltonian_apply({3, -1.0}, StateVector(3)), std::invalid_argument);
  EXPECT_THROW(hamiltonian_apply({4, 0.0}, StateVector(3)), std::invalid_argument);
}

TEST(GroundState, ThreeQubitsZeroCoupling) {
  const auto gs = ground_state({3, 0.0});
  EXPECT_NEAR(gs.energy, -1.0, 1e-10);
  const auto h = Observable::dense(dense_cluster_ising(3, 0.0));
  EXPECT_NEAR(expectation(gs.state, h), -1.0, 1e-10);
}

TEST(GroundState, MatchesDenseDiagonalization) {
  for (int n = 4; n <= 8; ++n) {
    for (double lambda : {0.2, 1.8}) {
      const auto gs = ground_state({n, lambda});
      Eigen::SelfAdjointEigenSolver<Mat> es(dense_cluster_ising(n, lambda));
      const double e0 = es.eigenvalues()(0);
      EXPECT_NEAR(gs.energy, e0, 1e-8) << "n=" << n << " lambda=" << lambda;
      EXPECT_GE(gs.energy, e0 - 1e-8);
      EXPECT_LE(gs.residual, 1e-8);
      EXPECT_NEAR(gs.state.norm_squared(), 1.0, 1e-12);
    }
  }
}

TEST(GroundState, LargeSystemResidual) {
  const auto gs = ground_state({12, 0.5});
  const Vec hv = hamiltonian_apply({12, 0.5}, gs.state);
  EXPECT_LE((hv - gs.energy * gs.state.amps()).norm(), 1e-8);
}

TEST(GroundState, NonConvergenceIsAnError) {
  LanczosOptions opt;
  opt.max_iterations = 3;
  opt.krylov_dim = 2;
  const PauliSum h = cluster_ising_hamiltonian({8, 0.7});
  EXPECT_THROW(lanczos_ground_state([&](const Vec &in, Vec &out) { h.apply(in, out); }, 256, opt), NumericalError);
}

TEST(Dataset, DeterministicLabeledAndBalanced) {
  const auto a = generate_dataset(4, 100, 7);
  const auto b = generate_dataset(4, 100, 7);
  ASSERT_EQ(a.size(), 100u);
  int ones = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto &s = a.samples[i];
    EXPECT_EQ(s.lambda, b.samples[i].lambda);
    EXPECT_EQ(s.state.amps(), b.samples[i].state.amps());
    EXPECT_EQ(s.label, s.lambda < 1.0 ? 0 : 1);
    EXPECT_FALSE(s.lambda > 0.9 && s.lambda < 1.1);
    EXPECT_GE(s.lambda, 0.0);
    EXPECT_LE(s.lambda, 2.0);
    ones += s.label;
  }
  EXPECT_NEAR(ones, 50, 10);
  EXPECT_THROW(generate_dataset(4, 1, 7), std::invalid_argument);
}

TEST(Dataset, SamplesAreGroundStates) {
  const auto ds = generate_dataset(5, 6, 3);
  for (const auto &s : ds.samples) {
    Eigen::SelfAdjointEigenSolver<Mat> es(dense_cluster_ising(5, s.lambda));
    EXPECT_NEAR(expectation(s.state, Observable::dense(dense_cluster_ising(5, s.lambda))), es.eigenvalues()(0),
                1e-8);
  }
}

TEST(Dataset, BinaryRoundTrip) {
  const auto ds = generate_dataset(3, 10, 11);
  std::stringstream buf;
  write_dataset(buf, ds);
  const std::string bytes = buf.str();
  EXPECT_EQ(bytes.size(), 4 + 4 + 4 + 4 + 8 + 8 + 10 * (8 + 1 + 8 * 16));
  EXPECT_EQ(bytes.substr(0, 4), "QRED");
  const auto back = read_dataset(buf);
  ASSERT_EQ(back.size(), ds.size());
  EXPECT_EQ(back.n, 3);
  EXPECT_EQ(back.seed, 11u);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(back.samples[i].lambda, ds.samples[i].lambda);
    EXPECT_EQ(back.samples[i].label, ds.samples[i].label);
    EXPECT_LT((back.samples[i].state.amps() - ds.samples[i].state.amps()).norm(), 1e-15);
  }
  std::stringstream rewritten;
  write_dataset(rewritten, back);
  EXPECT_EQ(rewritten.str(), bytes);

  std::stringstream bad("QREX0000");
  EXPECT_THROW(read_dataset(bad), FormatError);
  std::stringstream truncated(bytes.substr(0, bytes.size() - 5));
  EXPECT_THROW(read_dataset(truncated), FormatError);
}

TEST(Dataset, StratifiedSplit) {
  const auto ds = generate_dataset(3, 20, 5);
  const auto [train, val] = split_indices(ds, 0.8);
  EXPECT_EQ(train.size(), 16u);
  EXPECT_EQ(val.size(), 4u);
  int val_ones = 0;
  for (auto i : val) val_ones += ds.samples[i].label;
  EXPECT_EQ(val_ones, 2);
}

}  // namespace
