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

// Randomized encoders (codebooks) and the encoded adversarial loss.
//
// Alice applies an encoder E to the input, the adversary's circuit U(theta)
// acts on the encoded register, Bob undoes E and classifies:
//   L(theta) = f(<psi| E^dag U^dag E H_eff E^dag U E |psi>)
// with H_eff the classifier's Pr(y) observable on the data register.

#include <Eigen/QR>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include "qre/circuits.hpp"
#include "qre/classifier.hpp"
#include "qre/error.hpp"
#include "qre/haar.hpp"
#include "qre/rng.hpp"
#include "qre/statevec.hpp"

namespace qre {

inline constexpr std::size_t kMaxDenseEncoderDim = 4096;

inline Mat ginibre(Eigen::Index rows, Eigen::Index cols, Rng &rng) {
  Mat g(rows, cols);
  const double s = 1.0 / std::sqrt(2.0);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) g(i, j) = cplx(s * rng.normal(), s * rng.normal());
  }
  return g;
}

/// First k columns of a Haar-random d x d unitary: thin QR of a d x k
/// Ginibre matrix with the phases of diag(R) moved into Q.
inline Mat sample_haar_frame(std::size_t d, std::size_t k, Rng &rng) {
  detail::require(k >= 1 && k <= d, "frame width must be in [1, d]");
  const auto di = static_cast<Eigen::Index>(d), ki = static_cast<Eigen::Index>(k);
  Eigen::HouseholderQR<Mat> qr(ginibre(di, ki, rng));
  Mat q = qr.householderQ() * Mat::Identity(di, ki);
  const Mat &r = qr.matrixQR();
  for (Eigen::Index j = 0; j < ki; ++j) {
    const cplx rjj = r(j, j);
    const double a = std::abs(rjj);
    q.col(j) *= a > 0 ? rjj / a : cplx(1.0);
  }
  return q;
}

/// Exact Haar-random unitary. Dimensions above 4096 need `allow_large`.
inline Mat sample_haar_unitary(std::size_t d, Rng &rng, bool allow_large = false) {
  detail::require(d >= 1, "dimension must be positive");
  if (d > kMaxDenseEncoderDim && !allow_large) {
    throw std::invalid_argument("dense Haar unitary of dimension " + std::to_string(d) +
                                " exceeds the 4096 cap; pass allow_large to opt in");
  }
  return sample_haar_frame(d, d, rng);
}

// ---------------------------------------------------------------------------
// Encoders

struct IdentityEncoder {};

struct DenseEncoder {
  Mat u;
};

/// xi independent Haar blocks; block j acts on qubits j*m .. j*m + m - 1.
struct BlockEncoder {
  int m = 1;
  std::vector<Mat> blocks;
};

struct PvqcEncoder {
  ParamCircuit circuit;
  std::vector<double> params;
};

using Encoder = std::variant<IdentityEncoder, DenseEncoder, BlockEncoder, PvqcEncoder>;

inline std::vector<int> block_qubits(int m, int j) {
  std::vector<int> q(static_cast<std::size_t>(m));
  for (int t = 0; t < m; ++t) q[static_cast<std::size_t>(t)] = j * m + t;
  return q;
}

inline BlockEncoder sample_block_encoder(int m, int xi, Rng &rng) {
  detail::require(m >= 1 && xi >= 1, "block size and count must be positive");
  BlockEncoder e;
  e.m = m;
  for (int j = 0; j < xi; ++j) e.blocks.push_back(sample_haar_unitary(std::size_t{1} << m, rng));
  return e;
}

inline PvqcEncoder sample_pvqc_encoder(int n, int depth, Rng &rng) {
  detail::require(depth >= 1, "encoder depth must be positive");
  PvqcEncoder e{build_classifier_circuit(n, 0, depth), {}};
  e.params.resize(static_cast<std::size_t>(e.circuit.param_count()));
  for (auto &p : e.params) p = rng.uniform(-std::numbers::pi, std::numbers::pi);
  return e;
}

inline void apply_encoder(const Encoder &enc, Vec &v) {
  std::visit(
      [&](const auto &e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, DenseEncoder>) {
          detail::require(e.u.cols() == v.size(), "encoder dimension mismatch");
          v = e.u * v;
        } else if constexpr (std::is_same_v<T, BlockEncoder>) {
          detail::require(v.size() == (Eigen::Index{1} << (e.m * static_cast<int>(e.blocks.size()))),
                          "encoder dimension mismatch");
          for (std::size_t j = 0; j < e.blocks.size(); ++j) {
            kernel::apply_kq(v, block_qubits(e.m, static_cast<int>(j)), e.blocks[j]);
          }
        } else if constexpr (std::is_same_v<T, PvqcEncoder>) {
          apply_circuit(v, e.circuit, e.params);
        }
      },
      enc);
}

inline void apply_encoder_inverse(const Encoder &enc, Vec &v) {
  std::visit(
      [&](const auto &e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, DenseEncoder>) {
          detail::require(e.u.rows() == v.size(), "encoder dimension mismatch");
          v = e.u.adjoint() * v;
        } else if constexpr (std::is_same_v<T, BlockEncoder>) {
          for (std::size_t j = e.blocks.size(); j-- > 0;) {
            kernel::apply_kq(v, block_qubits(e.m, static_cast<int>(j)), e.blocks[j].adjoint());
          }
        } else if constexpr (std::is_same_v<T, PvqcEncoder>) {
          apply_circuit_inverse(v, e.circuit, e.params);
        }
      },
      enc);
}

inline Mat encoder_matrix(const Encoder &enc, int n) {
  const std::size_t d = std::size_t{1} << n;
  Mat u(d, d);
  for (std::size_t j = 0; j < d; ++j) {
    Vec e = Vec::Zero(d);
    e[j] = 1.0;
    apply_encoder(enc, e);
    u.col(j) = e;
  }
  return u;
}

enum class CodebookKind { Identity, GlobalHaar, BlockHaar, Pvqc };

inline std::string to_string(CodebookKind k) {
  switch (k) {
    case CodebookKind::Identity: return "none";
    case CodebookKind::GlobalHaar: return "global-haar";
    case CodebookKind::BlockHaar: return "block-haar";
    case CodebookKind::Pvqc: return "pvqc";
  }
  return "?";
}

inline CodebookKind parse_codebook_kind(const std::string &s) {
  if (s == "none") return CodebookKind::Identity;
  if (s == "global-haar") return CodebookKind::GlobalHaar;
  if (s == "block-haar") return CodebookKind::BlockHaar;
  if (s == "pvqc") return CodebookKind::Pvqc;
  throw ConfigError("unknown encoder '" + s + "' (expected none, global-haar, block-haar or pvqc)");
}

/// A seeded sampler of encoders. Draw i always comes from stream split(i).
struct Codebook {
  CodebookKind kind = CodebookKind::GlobalHaar;
  int n_qubits = 1;
  int block_size = 2;  // m for BlockHaar
  int depth = 4;       // layers for Pvqc
  std::uint64_t seed = 0;
  bool allow_large = false;

  void validate() const {
    detail::require(n_qubits >= 1, "codebook needs at least one qubit");
    if (kind == CodebookKind::BlockHaar) {
      detail::require(block_size >= 1 && n_qubits % block_size == 0, "BlockHaar needs n = m * xi");
    }
    if (kind == CodebookKind::Pvqc) detail::require(depth >= 1, "PVQC depth must be positive");
    if (kind == CodebookKind::GlobalHaar && !allow_large) {
      detail::require((std::size_t{1} << n_qubits) <= kMaxDenseEncoderDim,
                      "global Haar encoders are capped at 12 qubits without allow_large");
    }
  }

  Encoder sample(std::uint64_t index) const {
    validate();
    Rng rng = Rng(seed).split(index);
    switch (kind) {
      case CodebookKind::Identity: return IdentityEncoder{};
      case CodebookKind::GlobalHaar:
        return DenseEncoder{sample_haar_unitary(std::size_t{1} << n_qubits, rng, allow_large)};
      case CodebookKind::BlockHaar: return sample_block_encoder(block_size, n_qubits / block_size, rng);
      case CodebookKind::Pvqc: return sample_pvqc_encoder(n_qubits, depth, rng);
    }
    return IdentityEncoder{};
  }
};

// ---------------------------------------------------------------------------
// 2-design diagnostic

/// Haar twirl of a d^2 x d^2 operator: alpha I + beta SWAP with
///   alpha = (Tr M - Tr(M S)/d) / (d^2 - 1),  beta = (Tr(M S) - Tr M/d) / (d^2 - 1).
inline Mat haar_twirl2(const Mat &m0, std::size_t d) {
  const auto dd = static_cast<Eigen::Index>(d * d);
  detail::require(m0.rows() == dd && m0.cols() == dd, "probe must be d^2 x d^2");
  detail::require(d >= 2, "dimension must be at least 2");
  Mat swap = Mat::Zero(dd, dd);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) swap(static_cast<Eigen::Index>(i * d + j), static_cast<Eigen::Index>(j * d + i)) = 1;
  }
  const double df = static_cast<double>(d);
  const cplx tr = m0.trace(), trs = (m0 * swap).trace();
  const cplx alpha = (tr - trs / df) / (df * df - 1), beta = (trs - tr / df) / (df * df - 1);
  return alpha * Mat::Identity(dd, dd) + beta * swap;
}

struct DeficitEstimate {
  double deficit;
  double stderr_frobenius;
};

/// Frobenius distance between the empirical t = 2 twirl of `probe` under
/// `sampler` and the Haar twirl. The default probe is |00><00|.
inline DeficitEstimate two_design_deficit(const std::function<Mat()> &sampler, std::size_t d, long samples,
                                          Mat probe = Mat()) {
  if (samples < 100) throw std::invalid_argument("two_design_deficit needs at least 100 samples");
  const auto dd = static_cast<Eigen::Index>(d * d);
  if (probe.size() == 0) {
    probe = Mat::Zero(dd, dd);
    probe(0, 0) = 1.0;
  }
  const Mat target = haar_twirl2(probe, d);
  const auto est = monte_carlo_moment(
      sampler,
      [&](const Mat &u) {
        const Mat uu = kron(u, u);
        return Mat(uu * probe * uu.adjoint());
      },
      samples);
  return {(est.mean - target).norm(), est.stderr_frobenius};
}

// ---------------------------------------------------------------------------
// Encoded loss

/// One attacked sample: classifier, label, encoder and adversarial circuit.
struct EncodedLossContext {
  const ClassifierModel *model = nullptr;
  ParamCircuit adversary;
  Encoder encoder = IdentityEncoder{};
  Vec psi;
  int label = 0;
  LossKind loss = LossKind::KL;

  void validate() const {
    detail::require(model != nullptr, "context has no classifier");
    detail::require(adversary.n_qubits() == model->n_data, "adversary and classifier sizes differ");
    detail::require(psi.size() == (Eigen::Index{1} << model->n_data), "input state size mismatch");
  }

  /// O v = E H_eff E^dag v on the encoded register.
  Vec apply_observable(const Vec &v) const {
    Vec w = v;
    apply_encoder_inverse(encoder, w);
    w = apply_effective_observable(*model, label, w);
    apply_encoder(encoder, w);
    return w;
  }

  Vec encoded_input() const {
    Vec v = psi;
    apply_encoder(encoder, v);
    return v;
  }
};

/// Loss and gradient with respect to the adversarial angles.
inline LossAndGradient encoded_loss_and_gradient(const EncodedLossContext &ctx, const std::vector<double> &theta) {
  ctx.validate();
  double py = 0.0;
  auto g = adjoint_expectation_gradient(
      ctx.encoded_input(), ctx.adversary, theta, [&](const Vec &v) { return ctx.apply_observable(v); }, &py);
  const double scale = loss_derivative(ctx.loss, py);
  for (auto &x : g) x *= scale;
  return {loss_from_probability(ctx.loss, py), py, std::move(g)};
}

/// Decoded state E^dag U(theta) E |psi> seen by the classifier.
inline Vec attacked_state(const EncodedLossContext &ctx, const std::vector<double> &theta) {
  Vec v = ctx.encoded_input();
  apply_circuit(v, ctx.adversary, theta);
  apply_encoder_inverse(ctx.encoder, v);
  return v;
}

inline double encoded_loss(const EncodedLossContext &ctx, const std::vector<double> &theta) {
  const auto p = class_probs(*ctx.model, attacked_state(ctx, theta));
  return loss_from_probability(ctx.loss, ctx.label == 0 ? p.first : p.second);
}

}  // namespace qre
