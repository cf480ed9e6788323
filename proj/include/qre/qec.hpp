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

// Stabilizer codes used as black-box input encoders, local noise, recovery,
// logical error rates and empirical differential-privacy measurements.
//
// Register layout: logical qubit j owns physical qubits [j N, (j + 1) N) with
// N = n0^levels. Inside a level-1 block the code's encoder maps
// |b> (x) |s> (b on the first qubit, syndrome s on the rest) to
// R_s X_L^b |0_L>, so decoding with its inverse leaves the logical value on the
// block's first qubit and the error syndrome on the others.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qre/adversary.hpp"
#include "qre/classifier.hpp"
#include "qre/defense.hpp"
#include "qre/error.hpp"
#include "qre/parallel.hpp"
#include "qre/rng.hpp"
#include "qre/statevec.hpp"

namespace qre {

inline constexpr int kMaxPhysicalQubits = 14;

struct StabilizerCode {
  std::string name;
  int n0 = 0;
  std::vector<PauliString> generators;
  PauliString logical_x, logical_z;
  std::vector<PauliString> recovery;  // indexed by syndrome bitmask
  Mat encoder;

  /// Bit i is set when e anticommutes with generator i.
  std::uint64_t syndrome(const PauliString &e) const {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < generators.size(); ++i) {
      if (!e.commutes_with(generators[i])) s |= std::uint64_t{1} << i;
    }
    return s;
  }

  Vec codeword(int b) const { return encoder.col(b); }
};

/// Builds the syndrome table from errors of increasing weight over `letters`
/// and the encoder unitary. Throws if the table does not cover every syndrome.
inline StabilizerCode make_stabilizer_code(std::string name, const std::vector<std::string> &generators,
                                           const std::string &lx, const std::string &lz, const std::string &letters) {
  StabilizerCode c;
  c.name = std::move(name);
  for (const auto &g : generators) c.generators.push_back(PauliString::parse(g));
  c.logical_x = PauliString::parse(lx);
  c.logical_z = PauliString::parse(lz);
  c.n0 = c.logical_x.n_qubits;
  const std::size_t r = c.generators.size();
  detail::require(static_cast<int>(r) == c.n0 - 1, "code must encode exactly one logical qubit");
  const std::size_t nsyn = std::size_t{1} << r;
  c.recovery.assign(nsyn, PauliString::single(c.n0, 0, 'I'));
  std::vector<bool> filled(nsyn, false);
  filled[0] = true;
  for (int q = 0; q < c.n0; ++q) {
    for (char l : letters) {
      const auto e = PauliString::single(c.n0, q, l);
      const auto s = c.syndrome(e);
      if (!filled[s]) {
        filled[s] = true;
        c.recovery[s] = e;
      }
    }
  }
  for (bool f : filled) {
    if (!f) throw std::invalid_argument("weight-1 errors do not cover every syndrome of " + c.name);
  }

  // |0_L>: project a basis state onto the joint +1 eigenspace of the
  // generators and Z_L.
  const std::size_t d = std::size_t{1} << c.n0;
  Vec zero_l;
  for (std::size_t start = 0; start < d && zero_l.size() == 0; ++start) {
    Vec v = Vec::Zero(static_cast<Eigen::Index>(d));
    v[static_cast<Eigen::Index>(start)] = 1.0;
    for (const auto &g : c.generators) v = (v + apply_pauli(g, v)) / 2.0;
    v = (v + apply_pauli(c.logical_z, v)) / 2.0;
    if (v.norm() > 1e-6) zero_l = v.normalized();
  }
  c.encoder = Mat::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t s = 0; s < nsyn; ++s) {
    for (int b = 0; b < 2; ++b) {
      Vec w = b ? apply_pauli(c.logical_x, zero_l) : zero_l;
      c.encoder.col(static_cast<Eigen::Index>(b | (s << 1))) = apply_pauli(c.recovery[s], w);
    }
  }
  return c;
}

inline StabilizerCode repetition3() { return make_stabilizer_code("repetition3", {"ZZI", "IZZ"}, "XXX", "ZII", "X"); }

inline StabilizerCode perfect5() {
  return make_stabilizer_code("perfect5", {"XZZXI", "IXZZX", "XIXZZ", "ZXIXZ"}, "XXXXX", "ZZZZZ", "XYZ");
}

struct QecCode {
  StabilizerCode base;
  int levels = 1;

  int block_size() const {
    int n = 1;
    for (int l = 0; l < levels; ++l) n *= base.n0;
    return n;
  }
  std::string name() const { return levels == 1 ? base.name : base.name + "^" + std::to_string(levels); }
};

inline QecCode concatenate(const StabilizerCode &code, int levels) {
  detail::require(levels == 1 || levels == 2, "concatenation supports 1 or 2 levels");
  QecCode c{code, levels};
  if (c.block_size() > kMaxPhysicalQubits) {
    throw std::invalid_argument(code.name + " at " + std::to_string(levels) + " levels needs " +
                                std::to_string(c.block_size()) + " physical qubits (cap " +
                                std::to_string(kMaxPhysicalQubits) + ")");
  }
  return c;
}

inline QecCode parse_code(const std::string &name, int levels = 1) {
  if (name == "repetition3" || name == "rep3") return concatenate(repetition3(), levels);
  if (name == "perfect5") return concatenate(perfect5(), levels);
  throw ConfigError("unknown code '" + name + "' (expected repetition3 or perfect5)");
}

/// Places a Pauli string given on local qubits onto `qubits` of an n-qubit register.
inline PauliString place_pauli(const PauliString &local, const std::vector<int> &qubits, int n) {
  PauliString p;
  p.n_qubits = n;
  p.coeff = local.coeff;
  for (int j = 0; j < local.n_qubits; ++j) p.set(qubits[static_cast<std::size_t>(j)], local.letter(j));
  return p;
}

// ---------------------------------------------------------------------------
// Obfuscation frame: qubit permutation followed by a Pauli frame.

struct ObfuscationFrame {
  std::vector<int> perm;  // physical qubit q moves to perm[q]
  PauliString pauli;
  std::uint64_t seed = 0;

  static ObfuscationFrame identity(int n) {
    ObfuscationFrame f;
    for (int q = 0; q < n; ++q) f.perm.push_back(q);
    f.pauli = PauliString::single(n, 0, 'I');
    return f;
  }

  static ObfuscationFrame sample(int n, std::uint64_t seed) {
    Rng rng(seed);
    ObfuscationFrame f = identity(n);
    f.seed = seed;
    for (int i = n - 1; i > 0; --i) std::swap(f.perm[static_cast<std::size_t>(i)], f.perm[rng.below(i + 1)]);
    for (int q = 0; q < n; ++q) f.pauli.set(q, "IXYZ"[rng.below(4)]);
    return f;
  }

  void apply(Vec &v) const {
    v = permute_qubits(StateVector::from_amplitudes(v), perm).amps();
    v = apply_pauli(pauli, v);
  }

  void apply_inverse(Vec &v) const {
    v = apply_pauli(pauli, v);
    std::vector<int> inv(perm.size());
    for (std::size_t q = 0; q < perm.size(); ++q) inv[static_cast<std::size_t>(perm[q])] = static_cast<int>(q);
    v = permute_qubits(StateVector::from_amplitudes(v), inv).amps();
  }
};

// ---------------------------------------------------------------------------
// Encoding and decoding

namespace detail {

inline std::vector<int> range_qubits(int start, int count, int stride = 1) {
  std::vector<int> q;
  for (int i = 0; i < count; ++i) q.push_back(start + i * stride);
  return q;
}

/// Level-1 blocks of the logical qubit starting at `offset`, innermost first,
/// with the outer block last for two levels.
inline std::vector<std::vector<int>> code_blocks(const QecCode &code, int offset) {
  const int n0 = code.base.n0;
  if (code.levels == 1) return {range_qubits(offset, n0)};
  std::vector<std::vector<int>> blocks;
  for (int t = 0; t < n0; ++t) blocks.push_back(range_qubits(offset + t * n0, n0));
  blocks.push_back(range_qubits(offset, n0, n0));
  return blocks;
}

}  // namespace detail

inline int physical_qubits(const QecCode &code, int n_logical) { return n_logical * code.block_size(); }

/// Physical state for a logical state of n_logical qubits, before the frame.
inline Vec encode_logical(const Vec &logical, const QecCode &code) {
  const int k = static_cast<int>(std::lround(std::log2(static_cast<double>(logical.size()))));
  detail::require(logical.size() == (Eigen::Index{1} << k) && k >= 1, "logical state size must be a power of two");
  const int nb = code.block_size(), n = physical_qubits(code, k);
  if (n > kMaxPhysicalQubits) throw std::invalid_argument("physical register exceeds the 14-qubit cap");
  Vec v = Vec::Zero(Eigen::Index{1} << n);
  for (Eigen::Index x = 0; x < logical.size(); ++x) {
    std::size_t idx = 0;
    for (int j = 0; j < k; ++j) idx |= bit_of(static_cast<std::size_t>(x), j) << (j * nb);
    v[static_cast<Eigen::Index>(idx)] = logical[x];
  }
  for (int j = 0; j < k; ++j) {
    const auto blocks = detail::code_blocks(code, j * nb);
    for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) kernel::apply_kq(v, *it, code.base.encoder);
  }
  return v;
}

inline Vec encode_logical(const Vec &logical, const QecCode &code, const ObfuscationFrame &frame) {
  Vec v = encode_logical(logical, code);
  frame.apply(v);
  return v;
}

enum class RecoveryMode { Coherent, Projective };

/// Inverse frame, recovery and decoding. Coherent mode decodes directly, which
/// moves any correctable error into the syndrome qubits. Projective mode
/// measures every generator (seeded), applies the table recovery and then
/// decodes, block by block from the innermost level.
inline Vec correct_and_decode(Vec v, const QecCode &code, int n_logical, const ObfuscationFrame &frame,
                              RecoveryMode mode = RecoveryMode::Coherent, Rng *rng = nullptr) {
  const int nb = code.block_size(), n = physical_qubits(code, n_logical);
  detail::require(v.size() == (Eigen::Index{1} << n), "physical state size mismatch");
  frame.apply_inverse(v);
  const Mat dec = code.base.encoder.adjoint();
  for (int j = 0; j < n_logical; ++j) {
    for (const auto &blk : detail::code_blocks(code, j * nb)) {
      if (mode == RecoveryMode::Projective) {
        detail::require(rng != nullptr, "projective recovery needs an Rng");
        std::uint64_t s = 0;
        for (std::size_t i = 0; i < code.base.generators.size(); ++i) {
          const Vec gv = apply_pauli(place_pauli(code.base.generators[i], blk, n), v);
          Vec plus = (v + gv) / 2.0;
          const double p_plus = plus.squaredNorm() / v.squaredNorm();
          if (rng->uniform() < p_plus) {
            v = plus;
          } else {
            v = (v - gv) / 2.0;
            s |= std::uint64_t{1} << i;
          }
          v.normalize();
        }
        v = apply_pauli(place_pauli(code.base.recovery[s], blk, n), v);
      }
      kernel::apply_kq(v, blk, dec);
    }
  }
  return v;
}

/// Physical positions of the decoded logical qubits.
inline std::vector<int> logical_positions(const QecCode &code, int n_logical) {
  return detail::range_qubits(0, n_logical, code.block_size());
}

/// Reduced density matrix of the decoded logical register.
inline Mat logical_density(const Vec &decoded, const QecCode &code, int n_logical) {
  return reduced_density(StateVector::from_amplitudes(decoded, true), logical_positions(code, n_logical));
}

// ---------------------------------------------------------------------------
// Local noise

enum class NoiseKind { BitFlip, Depolarizing, RandomUnitary };
enum class Placement { Iid, Fixed };

inline std::string to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::BitFlip: return "bit-flip";
    case NoiseKind::Depolarizing: return "depolarizing";
    case NoiseKind::RandomUnitary: return "random-unitary";
  }
  return "?";
}

inline NoiseKind parse_noise_kind(const std::string &s) {
  if (s == "bit-flip") return NoiseKind::BitFlip;
  if (s == "depolarizing") return NoiseKind::Depolarizing;
  if (s == "random-unitary") return NoiseKind::RandomUnitary;
  throw ConfigError("unknown noise '" + s + "' (expected bit-flip, depolarizing or random-unitary)");
}

/// Iid: every qubit passes through the channel. Fixed: exactly floor(tau n)
/// uniformly chosen qubits do. For RandomUnitary, p is the rotation-angle bound.
struct NoiseModel {
  NoiseKind kind = NoiseKind::BitFlip;
  double p = 0.0;
  Placement placement = Placement::Iid;
  double tau = 0.0;

  void validate() const {
    if (kind != NoiseKind::RandomUnitary && !(p >= 0 && p <= 1)) throw ConfigError("noise probability must be in [0, 1]");
    if (kind == NoiseKind::RandomUnitary && !(p >= 0)) throw ConfigError("rotation bound must be non-negative");
    if (!(tau >= 0 && tau <= 1)) throw ConfigError("tau must be in [0, 1]");
  }
};

/// Random rotation exp(-i theta n.sigma) with theta uniform in [0, bound] and a
/// uniformly random axis.
inline Mat2 random_rotation(double bound, Rng &rng) {
  const double theta = rng.uniform(0.0, bound);
  double ax = rng.normal(), ay = rng.normal(), az = rng.normal();
  const double norm = std::sqrt(ax * ax + ay * ay + az * az);
  ax /= norm;
  ay /= norm;
  az /= norm;
  Mat2 g;
  const double c = std::cos(theta), s = std::sin(theta);
  g << cplx(c, -s * az), cplx(-s * ay, -s * ax), cplx(s * ay, -s * ax), cplx(c, s * az);
  return g;
}

/// Applies the noise and returns the qubits that received a non-identity
/// operation.
inline std::vector<int> apply_local_noise(Vec &v, int n, const NoiseModel &model, Rng &rng) {
  model.validate();
  std::vector<int> targets;
  if (model.placement == Placement::Iid) {
    targets = detail::range_qubits(0, n);
  } else {
    std::vector<int> order = detail::range_qubits(0, n);
    const int k = replacement_budget(n, model.tau);
    for (int i = 0; i < k; ++i) {
      std::swap(order[static_cast<std::size_t>(i)], order[i + rng.below(static_cast<std::uint64_t>(n - i))]);
      targets.push_back(order[static_cast<std::size_t>(i)]);
    }
  }
  std::vector<int> hit;
  for (int q : targets) {
    switch (model.kind) {
      case NoiseKind::BitFlip:
        if (rng.uniform() < model.p) {
          kernel::apply_x(v, q);
          hit.push_back(q);
        }
        break;
      case NoiseKind::Depolarizing:
        if (rng.uniform() < model.p) {
          v = apply_pauli(PauliString::single(n, q, "XYZ"[rng.below(3)]), v);
          hit.push_back(q);
        }
        break;
      case NoiseKind::RandomUnitary:
        kernel::apply_1q(v, q, random_rotation(model.p, rng));
        hit.push_back(q);
        break;
    }
  }
  std::sort(hit.begin(), hit.end());
  return hit;
}

// ---------------------------------------------------------------------------
// Logical error rates

struct ErrorRate {
  double rate = 0.0;  // fraction of trials with logical infidelity > 1e-6
  double stderr_rate = 0.0;
  double mean_infidelity = 0.0;
  long trials = 0;
};

/// Monte Carlo over noise draws on one logical qubit; trial i uses
/// rng.split(i). The input is |0_L> or, with random_input, a Haar state.
inline ErrorRate logical_error_rate(const QecCode &code, const NoiseModel &noise, long trials, const Rng &rng,
                                    bool random_input = false, RecoveryMode mode = RecoveryMode::Coherent) {
  detail::require(trials >= 1000, "logical_error_rate needs at least 1000 trials");
  noise.validate();
  const int n = physical_qubits(code, 1);
  const auto frame = ObfuscationFrame::identity(n);
  std::vector<double> infid(static_cast<std::size_t>(trials));
  parallel_for(infid.size(), [&](std::size_t i) {
    Rng r = rng.split(i);
    Vec logical(2);
    if (random_input) {
      logical = sample_haar_frame(2, 1, r).col(0);
    } else {
      logical << 1.0, 0.0;
    }
    Vec v = encode_logical(logical, code);
    apply_local_noise(v, n, noise, r);
    v = correct_and_decode(std::move(v), code, 1, frame, mode, &r);
    const Mat rho = logical_density(v, code, 1);
    infid[i] = std::max(0.0, 1.0 - logical.dot(rho * logical).real());
  });
  ErrorRate e;
  e.trials = trials;
  long fails = 0;
  for (double f : infid) {
    fails += f > 1e-6;
    e.mean_infidelity += f;
  }
  e.mean_infidelity /= static_cast<double>(trials);
  e.rate = static_cast<double>(fails) / static_cast<double>(trials);
  e.stderr_rate = std::sqrt(e.rate * (1 - e.rate) / static_cast<double>(trials));
  return e;
}

/// 3p^2 - 2p^3, the majority-vote failure probability.
inline double majority_failure(double p) { return 3 * p * p - 2 * p * p * p; }

// ---------------------------------------------------------------------------
// Differential privacy of a noisy classifier

/// Classifier followed by a depolarizing layer on the readout qubit that
/// floors each outcome probability at p0: q_y = p0 + (1 - 2 p0) p_y.
struct NoisyClassifier {
  const ClassifierModel *model = nullptr;
  double p0 = 0.05;

  std::pair<double, double> probs(const Vec &psi) const {
    const auto p = class_probs(*model, psi);
    return {p0 + (1 - 2 * p0) * p.first, p0 + (1 - 2 * p0) * p.second};
  }

  /// Outcome probabilities for a decoded register whose logical qubits sit at
  /// `positions`; the remaining qubits are traced out.
  std::pair<double, double> probs_on_subsystem(const Vec &v, const std::vector<int> &positions) const {
    const int n = static_cast<int>(std::lround(std::log2(static_cast<double>(v.size()))));
    std::vector<int> perm(static_cast<std::size_t>(n), -1);
    int next = static_cast<int>(positions.size());
    for (std::size_t j = 0; j < positions.size(); ++j) perm[static_cast<std::size_t>(positions[j])] = static_cast<int>(j);
    for (auto &p : perm) {
      if (p < 0) p = next++;
    }
    const Vec w = permute_qubits(StateVector::from_amplitudes(v), perm).amps();
    const Eigen::Index dl = Eigen::Index{1} << positions.size();
    double q0 = 0.0, q1 = 0.0, total = 0.0;
    for (Eigen::Index s = 0; s < w.size() / dl; ++s) {
      const Vec slice = w.segment(s * dl, dl);
      const double weight = slice.squaredNorm();
      if (weight < 1e-300) continue;
      const auto p = probs(slice / std::sqrt(weight));
      q0 += weight * p.first;
      q1 += weight * p.second;
      total += weight;
    }
    return {q0 / total, q1 / total};
  }
};

using OutputChannel = std::function<std::pair<double, double>(const ProductStateSpec &)>;

inline OutputChannel noisy_channel(const NoisyClassifier &c) {
  return [c](const ProductStateSpec &s) { return c.probs(s.state()); };
}

struct DpEstimate {
  double epsilon = 0.0;
  double tau = 0.0;
  long pairs = 0;
  long best_pair = -1;
  int best_outcome = -1;
  double p_rho = 0.0;
  double p_sigma = 0.0;
};

struct QdpReport {
  DpEstimate dp;
  double risk = 0.0;  // E_rho max_sigma Pr(s1 != s2)
  double risk_stderr = 0.0;
  double exp_neg_entropy = 0.0;  // E_rho exp(-H(Q(rho)))
  double bound = 0.0;            // 1 - exp(-2 eps^2) E[exp(-H)]
};

inline double qdp_risk_bound(double epsilon, double exp_neg_entropy) {
  detail::require(epsilon >= 0, "epsilon must be non-negative");
  detail::require(exp_neg_entropy > 0 && exp_neg_entropy <= 1 + 1e-12, "E[exp(-H)] must be in (0, 1]");
  return 1.0 - std::exp(-2 * epsilon * epsilon) * exp_neg_entropy;
}

/// Pairs (rho, sigma) of Haar product inputs: pair i draws rho, a qubit order
/// and replacement factors from rng.split(i); sigma_j replaces the first j
/// qubits of that order. Every prefix j <= floor(tau n) is evaluated, so the
/// neighbourhoods are nested in tau and the estimate is monotone on a grid.
inline QdpReport qdp_estimate(int n, const OutputChannel &channel, double tau, long pairs, const Rng &rng) {
  detail::require(pairs >= 1, "need at least one pair");
  detail::require(tau >= 0 && tau <= 1, "tau must be in [0, 1]");
  const int k = replacement_budget(n, tau);
  struct PairResult {
    double eps = 0.0;
    int outcome = -1;
    double p_rho = 0.0, p_sigma = 0.0;
    double risk = 0.0, exp_neg_h = 0.0;
  };
  std::vector<PairResult> res(static_cast<std::size_t>(pairs));
  parallel_for(res.size(), [&](std::size_t i) {
    Rng r = rng.split(i);
    const auto rho = sample_product_spec(n, r);
    std::vector<int> order = detail::range_qubits(0, n);
    for (int a = n - 1; a > 0; --a) std::swap(order[static_cast<std::size_t>(a)], order[r.below(a + 1)]);
    const auto repl = sample_product_spec(n, r);
    const auto p = channel(rho);
    if (!(p.first > 0 && p.second > 0)) {
      throw NumericalError("zero output probability: enable the classifier's noise floor (p0 > 0)");
    }
    auto &out = res[i];
    out.exp_neg_h = std::exp(p.first * std::log(p.first) + p.second * std::log(p.second));
    out.p_rho = p.first;
    out.p_sigma = p.first;
    ProductStateSpec sigma = rho;
    for (int j = 0; j < k; ++j) {
      const auto q = static_cast<std::size_t>(order[static_cast<std::size_t>(j)]);
      sigma.factors[q] = repl.factors[q];
      const auto ps = channel(sigma);
      if (!(ps.first > 0 && ps.second > 0)) {
        throw NumericalError("zero output probability: enable the classifier's noise floor (p0 > 0)");
      }
      const double e0 = std::abs(std::log(p.first / ps.first)), e1 = std::abs(std::log(p.second / ps.second));
      if (std::max(e0, e1) > out.eps) {
        out.eps = std::max(e0, e1);
        out.outcome = e0 >= e1 ? 0 : 1;
        out.p_rho = out.outcome == 0 ? p.first : p.second;
        out.p_sigma = out.outcome == 0 ? ps.first : ps.second;
      }
      out.risk = std::max(out.risk, 1.0 - (p.first * ps.first + p.second * ps.second));
    }
  });
  QdpReport rep;
  rep.dp.tau = tau;
  rep.dp.pairs = pairs;
  double s = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < res.size(); ++i) {
    if (res[i].eps > rep.dp.epsilon) {
      rep.dp.epsilon = res[i].eps;
      rep.dp.best_pair = static_cast<long>(i);
      rep.dp.best_outcome = res[i].outcome;
      rep.dp.p_rho = res[i].p_rho;
      rep.dp.p_sigma = res[i].p_sigma;
    }
    s += res[i].risk;
    s2 += res[i].risk * res[i].risk;
    rep.exp_neg_entropy += res[i].exp_neg_h;
  }
  const double np = static_cast<double>(pairs);
  rep.risk = s / np;
  rep.risk_stderr = pairs > 1 ? std::sqrt(std::max(0.0, s2 / np - rep.risk * rep.risk) / (np - 1)) : 0.0;
  rep.exp_neg_entropy /= np;
  rep.bound = qdp_risk_bound(rep.dp.epsilon, rep.exp_neg_entropy);
  return rep;
}

inline DpEstimate qdp_epsilon_estimate(int n, const OutputChannel &channel, double tau, long pairs, const Rng &rng) {
  return qdp_estimate(n, channel, tau, pairs, rng).dp;
}

/// Piecewise-linear interpolation of a measured (tau, epsilon) curve; the
/// curve must start at tau = 0.
inline double interpolate_curve(const std::vector<std::pair<double, double>> &curve, double t) {
  detail::require(!curve.empty() && curve.front().first == 0.0, "curve must start at tau = 0");
  if (t <= 0) return curve.front().second;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    if (t <= curve[i].first) {
      const auto [t0, e0] = curve[i - 1];
      const auto [t1, e1] = curve[i];
      return e0 + (e1 - e0) * (t - t0) / (t1 - t0);
    }
  }
  return curve.back().second;
}

struct Thm4Report {
  double distance_bound = 0.0;  // n0 (n0 - 1) tau^2 / delta
  double epsilon_bound = 0.0;   // measured epsilon curve at distance_bound
  long pairs = 0;
  double fraction_distance_ok = 0.0;
  double fraction_ratio_ok = 0.0;
  double fraction_ok = 0.0;  // both conditions
  double stderr_ok = 0.0;
  double mean_physical_distance = 0.0;
  double mean_logical_distance = 0.0;
};

/// Pairs of physical states: rho encodes a Haar product logical input under a
/// fresh frame per pair, sigma is rho after `noise` on the physical register.
/// A logical qubit counts as changed when its decoded reduced state has
/// fidelity < 1 - 1e-6 with the original factor state.
inline Thm4Report verify_thm4(const QecCode &code, int n_logical, const NoisyClassifier &classifier,
                              const NoiseModel &noise, double tau, double delta,
                              const std::vector<std::pair<double, double>> &eps_curve, long pairs, const Rng &rng) {
  detail::require(delta > 0 && delta < 1, "delta must be in (0, 1)");
  detail::require(classifier.model && classifier.model->n_data == n_logical, "classifier size mismatch");
  const int n0 = code.block_size(), n = physical_qubits(code, n_logical);
  Thm4Report rep;
  rep.pairs = pairs;
  rep.distance_bound = n0 * (n0 - 1) * tau * tau / delta;
  rep.epsilon_bound = interpolate_curve(eps_curve, rep.distance_bound);
  const auto positions = logical_positions(code, n_logical);
  std::vector<std::array<double, 4>> res(static_cast<std::size_t>(pairs));
  parallel_for(res.size(), [&](std::size_t i) {
    Rng r = rng.split(i);
    const auto spec = sample_product_spec(n_logical, r);
    const Vec logical = spec.state();
    const auto frame = ObfuscationFrame::sample(n, r());
    const Vec rho = encode_logical(logical, code, frame);
    Vec sigma = rho;
    const auto hit = apply_local_noise(sigma, n, noise, r);
    const Vec dr = correct_and_decode(rho, code, n_logical, frame);
    const Vec ds = correct_and_decode(std::move(sigma), code, n_logical, frame);
    int changed = 0;
    const auto state = StateVector::from_amplitudes(ds, true);
    for (int j = 0; j < n_logical; ++j) {
      const Mat rj = reduced_density(state, {positions[static_cast<std::size_t>(j)]});
      const Vec phi = spec.factors[static_cast<std::size_t>(j)].col(0);
      changed += phi.dot(rj * phi).real() < 1 - 1e-6;
    }
    const double dist = static_cast<double>(changed) / n_logical;
    const auto pr = classifier.probs_on_subsystem(dr, positions);
    const auto ps = classifier.probs_on_subsystem(ds, positions);
    const double eps = std::max(std::abs(std::log(pr.first / ps.first)), std::abs(std::log(pr.second / ps.second)));
    res[i] = {dist <= rep.distance_bound + 1e-12 ? 1.0 : 0.0, eps <= rep.epsilon_bound + 1e-9 ? 1.0 : 0.0,
              static_cast<double>(hit.size()) / n, dist};
  });
  long ok = 0;
  for (const auto &x : res) {
    rep.fraction_distance_ok += x[0];
    rep.fraction_ratio_ok += x[1];
    ok += x[0] > 0 && x[1] > 0;
    rep.mean_physical_distance += x[2];
    rep.mean_logical_distance += x[3];
  }
  const double np = static_cast<double>(pairs);
  rep.fraction_distance_ok /= np;
  rep.fraction_ratio_ok /= np;
  rep.mean_physical_distance /= np;
  rep.mean_logical_distance /= np;
  rep.fraction_ok = static_cast<double>(ok) / np;
  rep.stderr_ok = std::sqrt(rep.fraction_ok * (1 - rep.fraction_ok) / np);
  return rep;
}

}  // namespace qre
