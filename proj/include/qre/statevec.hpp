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

// Dense statevector engine.
//
// Qubit ordering is little-endian everywhere in the library: qubit q is bit q
// of the amplitude index, so |q_{n-1} ... q_1 q_0> has index sum_q q_k 2^k.
// Two-qubit gate matrices use the local index 2*bit(first) + bit(second).

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "qre/error.hpp"

namespace qre {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;
using Mat2 = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4cd;

inline constexpr cplx kI{0.0, 1.0};
inline constexpr int kMaxQubits = 24;

inline constexpr std::size_t bit_of(std::size_t index, int q) { return (index >> q) & 1u; }

/// Inserts a zero bit at position q of x (x has one fewer bit than the result).
inline constexpr std::size_t insert_zero_bit(std::size_t x, int q) {
  const std::size_t low = x & ((std::size_t{1} << q) - 1);
  return ((x >> q) << (q + 1)) | low;
}

class StateVector {
 public:
  StateVector() = default;

  /// |0...0> on n qubits.
  explicit StateVector(int n_qubits) : n_(n_qubits) {
    detail::require(n_qubits >= 0 && n_qubits <= kMaxQubits, "qubit count out of range");
    amps_ = Vec::Zero(std::size_t{1} << n_qubits);
    amps_[0] = 1.0;
  }

  static StateVector basis(int n_qubits, std::size_t index) {
    StateVector s(n_qubits);
    detail::require_index(index < s.dim(), "basis index out of range");
    s.amps_[0] = 0.0;
    s.amps_[static_cast<Eigen::Index>(index)] = 1.0;
    return s;
  }

  /// Wraps an amplitude vector. The length must be a power of two. With
  /// `normalize` the vector is rescaled, otherwise its norm must already be 1.
  static StateVector from_amplitudes(Vec amps, bool normalize = false) {
    const auto d = static_cast<std::size_t>(amps.size());
    detail::require(d >= 1 && std::has_single_bit(d), "amplitude count must be a power of two");
    StateVector s;
    s.n_ = std::countr_zero(d);
    const double nrm = amps.norm();
    if (normalize) {
      if (!(nrm > 0.0) || !std::isfinite(nrm)) throw NumericalError("cannot normalize a zero or non-finite vector");
      amps /= nrm;
    } else {
      detail::require(std::abs(nrm * nrm - 1.0) <= 1e-10, "amplitudes are not normalized");
    }
    s.amps_ = std::move(amps);
    return s;
  }

  int n_qubits() const { return n_; }
  std::size_t dim() const { return static_cast<std::size_t>(amps_.size()); }
  const Vec &amps() const { return amps_; }
  Vec &mutable_amps() { return amps_; }
  cplx operator[](std::size_t i) const { return amps_[static_cast<Eigen::Index>(i)]; }
  double norm_squared() const { return amps_.squaredNorm(); }

  void renormalize() { amps_ /= amps_.norm(); }

 private:
  int n_ = 0;
  Vec amps_;
};

// ---------------------------------------------------------------------------
// Gates

struct Gate1 {
  Mat2 u;
  int target;
};

/// Two-qubit gate. `u` is indexed by 2*bit(control) + bit(target); for
/// non-controlled gates "control" simply names the more significant local bit.
struct Gate2 {
  Mat4 u;
  int control;
  int target;
};

namespace gates {

inline Mat2 x_matrix() { return (Mat2() << 0, 1, 1, 0).finished(); }
inline Mat2 y_matrix() { return (Mat2() << 0, -kI, kI, 0).finished(); }
inline Mat2 z_matrix() { return (Mat2() << 1, 0, 0, -1).finished(); }
inline Mat2 h_matrix() {
  const double s = 1.0 / std::sqrt(2.0);
  return (Mat2() << s, s, s, -s).finished();
}
/// exp(-i theta X)
inline Mat2 rx_matrix(double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  return (Mat2() << c, cplx(0, -s), cplx(0, -s), c).finished();
}
/// exp(-i theta Z)
inline Mat2 rz_matrix(double theta) {
  return (Mat2() << std::polar(1.0, -theta), 0, 0, std::polar(1.0, theta)).finished();
}

inline Gate1 x(int q) { return {x_matrix(), q}; }
inline Gate1 y(int q) { return {y_matrix(), q}; }
inline Gate1 z(int q) { return {z_matrix(), q}; }
inline Gate1 h(int q) { return {h_matrix(), q}; }
inline Gate1 rx(double theta, int q) { return {rx_matrix(theta), q}; }
inline Gate1 rz(double theta, int q) { return {rz_matrix(theta), q}; }

inline Gate2 cnot(int control, int target) {
  Mat4 u = Mat4::Zero();
  u(0, 0) = u(1, 1) = 1;
  u(2, 3) = u(3, 2) = 1;
  return {u, control, target};
}

inline Gate2 cz(int a, int b) {
  Mat4 u = Mat4::Identity();
  u(3, 3) = -1;
  return {u, a, b};
}

}  // namespace gates

inline Gate1 adjoint(const Gate1 &g) { return {g.u.adjoint(), g.target}; }
inline Gate2 adjoint(const Gate2 &g) { return {g.u.adjoint(), g.control, g.target}; }

template <class M>
double unitarity_deficit(const M &u) {
  return (u.adjoint() * u - M::Identity(u.rows(), u.cols())).norm();
}

// ---------------------------------------------------------------------------
// Raw kernels on amplitude arrays. No validation; callers check indices.

namespace kernel {

inline void apply_1q(Vec &a, int q, const Mat2 &u) {
  const std::size_t half = static_cast<std::size_t>(a.size()) >> 1;
  const std::size_t step = std::size_t{1} << q;
  const cplx u00 = u(0, 0), u01 = u(0, 1), u10 = u(1, 0), u11 = u(1, 1);
  for (std::size_t k = 0; k < half; ++k) {
    const std::size_t i0 = insert_zero_bit(k, q);
    const std::size_t i1 = i0 | step;
    const cplx x0 = a[i0], x1 = a[i1];
    a[i0] = u00 * x0 + u01 * x1;
    a[i1] = u10 * x0 + u11 * x1;
  }
}

inline double *raw(Vec &a) { return reinterpret_cast<double *>(a.data()); }
inline const double *raw(const Vec &a) { return reinterpret_cast<const double *>(a.data()); }

inline void apply_rx(Vec &a, int q, double theta) {
  const std::size_t d = static_cast<std::size_t>(a.size());
  const std::size_t step = std::size_t{1} << q;
  const double c = std::cos(theta), s = std::sin(theta);
  double *p = raw(a);
  for (std::size_t base = 0; base < d; base += 2 * step) {
    for (std::size_t i0 = base; i0 < base + step; ++i0) {
      double *x0 = p + 2 * i0, *x1 = p + 2 * (i0 + step);
      const double r0 = x0[0], m0 = x0[1], r1 = x1[0], m1 = x1[1];
      x0[0] = c * r0 + s * m1;
      x0[1] = c * m0 - s * r1;
      x1[0] = c * r1 + s * m0;
      x1[1] = c * m1 - s * r0;
    }
  }
}

inline void apply_rz(Vec &a, int q, double theta) {
  const std::size_t d = static_cast<std::size_t>(a.size());
  const std::size_t step = std::size_t{1} << q;
  const double c = std::cos(theta), s = std::sin(theta);
  double *p = raw(a);
  for (std::size_t base = 0; base < d; base += 2 * step) {
    for (std::size_t i0 = base; i0 < base + step; ++i0) {
      double *x0 = p + 2 * i0, *x1 = p + 2 * (i0 + step);
      const double r0 = x0[0], m0 = x0[1], r1 = x1[0], m1 = x1[1];
      x0[0] = c * r0 + s * m0;
      x0[1] = c * m0 - s * r0;
      x1[0] = c * r1 - s * m1;
      x1[1] = c * m1 + s * r1;
    }
  }
}

inline void apply_x(Vec &a, int q) {
  const std::size_t d = static_cast<std::size_t>(a.size());
  const std::size_t step = std::size_t{1} << q;
  for (std::size_t base = 0; base < d; base += 2 * step) {
    for (std::size_t i0 = base; i0 < base + step; ++i0) std::swap(a[i0], a[i0 + step]);
  }
}

inline void apply_cnot(Vec &a, int control, int target) {
  const std::size_t d = static_cast<std::size_t>(a.size());
  const std::size_t cm = std::size_t{1} << control;
  const std::size_t tm = std::size_t{1} << target;
  for (std::size_t base = 0; base < d; base += 2 * tm) {
    for (std::size_t i = base; i < base + tm; ++i) {
      if (i & cm) std::swap(a[i], a[i + tm]);
    }
  }
}

inline void apply_2q(Vec &a, int q1, int q0, const Mat4 &u) {
  const std::size_t d = static_cast<std::size_t>(a.size());
  const std::size_t m1 = std::size_t{1} << q1, m0 = std::size_t{1} << q0;
  const int lo = std::min(q0, q1), hi = std::max(q0, q1);
  for (std::size_t k = 0; k < d / 4; ++k) {
    const std::size_t base = insert_zero_bit(insert_zero_bit(k, lo), hi);
    const std::size_t idx[4] = {base, base | m0, base | m1, base | m1 | m0};
    cplx x[4];
    for (int r = 0; r < 4; ++r) x[r] = a[idx[r]];
    for (int r = 0; r < 4; ++r) {
      a[idx[r]] = u(r, 0) * x[0] + u(r, 1) * x[1] + u(r, 2) * x[2] + u(r, 3) * x[3];
    }
  }
}

/// Applies a dense 2^k x 2^k unitary to the listed qubits; local bit j of the
/// matrix index is qubit qubits[j].
inline void apply_kq(Vec &a, const std::vector<int> &qubits, const Mat &u) {
  const int k = static_cast<int>(qubits.size());
  const std::size_t dk = std::size_t{1} << k;
  const std::size_t d = static_cast<std::size_t>(a.size());
  std::vector<int> sorted = qubits;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> offset(dk, 0);
  for (std::size_t l = 0; l < dk; ++l) {
    for (int j = 0; j < k; ++j) {
      if ((l >> j) & 1u) offset[l] |= std::size_t{1} << qubits[j];
    }
  }
  Vec buf(static_cast<Eigen::Index>(dk));
  for (std::size_t r = 0; r < (d >> k); ++r) {
    std::size_t base = r;
    for (int q : sorted) base = insert_zero_bit(base, q);
    for (std::size_t l = 0; l < dk; ++l) buf[l] = a[base | offset[l]];
    const Vec out = u * buf;
    for (std::size_t l = 0; l < dk; ++l) a[base | offset[l]] = out[l];
  }
}

}  // namespace kernel

namespace detail {

inline void check_qubit(const StateVector &s, int q) {
  detail::require_index(q >= 0 && q < s.n_qubits(), "qubit index out of range");
}

inline void check_gate_unitary(double deficit) {
  detail::require(deficit <= 1e-9, "gate matrix is not unitary");
}

}  // namespace detail

inline void apply(StateVector &s, const Gate1 &g) {
  detail::check_qubit(s, g.target);
  detail::check_gate_unitary(unitarity_deficit(g.u));
  kernel::apply_1q(s.mutable_amps(), g.target, g.u);
}

inline void apply(StateVector &s, const Gate2 &g) {
  detail::check_qubit(s, g.control);
  detail::check_qubit(s, g.target);
  detail::require(g.control != g.target, "control and target must differ");
  detail::check_gate_unitary(unitarity_deficit(g.u));
  kernel::apply_2q(s.mutable_amps(), g.control, g.target, g.u);
}

/// Value-semantics form of `apply`.
template <class G>
StateVector apply_gate(StateVector s, const G &g) {
  apply(s, g);
  return s;
}

/// Applies a dense unitary to a subset of qubits (local bit j = qubits[j]).
inline void apply_unitary(StateVector &s, const std::vector<int> &qubits, const Mat &u) {
  detail::require(u.rows() == u.cols() && u.rows() == (Eigen::Index{1} << qubits.size()),
                  "unitary size does not match qubit count");
  std::vector<int> seen;
  for (int q : qubits) {
    detail::check_qubit(s, q);
    detail::require(std::find(seen.begin(), seen.end(), q) == seen.end(), "repeated qubit");
    seen.push_back(q);
  }
  detail::check_gate_unitary(unitarity_deficit(u));
  kernel::apply_kq(s.mutable_amps(), qubits, u);
}

// ---------------------------------------------------------------------------
// Pauli strings

/// Hermitian Pauli product coeff * P with P = i^{|x&z|} X^x Z^z, i.e. per-qubit
/// letters with Y = iXZ. Acting on a basis state:
///   P|b> = i^{nY} (-1)^{|b & z|} |b ^ x>.
struct PauliString {
  int n_qubits = 0;
  std::uint64_t x = 0;
  std::uint64_t z = 0;
  double coeff = 1.0;

  /// Parses e.g. "+XIZ" or "-YY"; letter k acts on qubit k.
  static PauliString parse(std::string_view text) {
    PauliString p;
    if (!text.empty() && (text.front() == '+' || text.front() == '-')) {
      if (text.front() == '-') p.coeff = -1.0;
      text.remove_prefix(1);
    }
    detail::require(text.size() <= 63, "Pauli string too long");
    p.n_qubits = static_cast<int>(text.size());
    for (int q = 0; q < p.n_qubits; ++q) p.set(q, text[q]);
    return p;
  }

  static PauliString single(int n_qubits, int q, char letter, double coeff = 1.0) {
    PauliString p;
    p.n_qubits = n_qubits;
    p.coeff = coeff;
    detail::require_index(q >= 0 && q < n_qubits, "qubit index out of range");
    p.set(q, letter);
    return p;
  }

  void set(int q, char letter) {
    const std::uint64_t m = std::uint64_t{1} << q;
    x &= ~m;
    z &= ~m;
    switch (letter) {
      case 'I': case '_': break;
      case 'X': x |= m; break;
      case 'Z': z |= m; break;
      case 'Y': x |= m; z |= m; break;
      default: throw std::invalid_argument(std::string("bad Pauli letter: ") + letter);
    }
  }

  char letter(int q) const {
    const bool bx = (x >> q) & 1u, bz = (z >> q) & 1u;
    return bx ? (bz ? 'Y' : 'X') : (bz ? 'Z' : 'I');
  }

  int weight() const { return std::popcount(x | z); }
  int n_y() const { return std::popcount(x & z); }

  std::string str() const {
    std::string s = coeff < 0 ? "-" : "+";
    for (int q = 0; q < n_qubits; ++q) s += letter(q);
    return s;
  }

  bool commutes_with(const PauliString &o) const {
    return (std::popcount((x & o.z) ^ (z & o.x)) & 1) == 0;
  }
};

/// out = P * in.
inline void apply_pauli(const PauliString &p, const Vec &in, Vec &out) {
  const std::size_t d = static_cast<std::size_t>(in.size());
  static const cplx phases[4] = {1.0, kI, -1.0, -kI};
  const cplx base = p.coeff * phases[p.n_y() & 3];
  out.resize(in.size());
  for (std::size_t b = 0; b < d; ++b) {
    const cplx v = (std::popcount(b & p.z) & 1) ? -in[b] : in[b];
    out[b ^ p.x] = base * v;
  }
}

inline Vec apply_pauli(const PauliString &p, const Vec &in) {
  Vec out;
  apply_pauli(p, in, out);
  return out;
}

/// <u|P|v>
inline cplx pauli_matrix_element(const PauliString &p, const Vec &u, const Vec &v) {
  const std::size_t d = static_cast<std::size_t>(v.size());
  static const cplx phases[4] = {1.0, kI, -1.0, -kI};
  cplx acc = 0.0;
  for (std::size_t b = 0; b < d; ++b) {
    const cplx t = std::conj(u[b ^ p.x]) * v[b];
    acc += (std::popcount(b & p.z) & 1) ? -t : t;
  }
  return acc * p.coeff * phases[p.n_y() & 3];
}

inline Mat to_dense(const PauliString &p) {
  const std::size_t d = std::size_t{1} << p.n_qubits;
  Mat m = Mat::Zero(d, d);
  Vec e = Vec::Zero(d), col;
  for (std::size_t b = 0; b < d; ++b) {
    e.setZero();
    e[b] = 1.0;
    apply_pauli(p, e, col);
    m.col(b) = col;
  }
  return m;
}

/// Conjugation P -> C P C for C = CNOT(control, target), including sign.
inline void conjugate_by_cnot(PauliString &p, int control, int target) {
  const int xc = (p.x >> control) & 1, zc = (p.z >> control) & 1;
  const int xt = (p.x >> target) & 1, zt = (p.z >> target) & 1;
  if (xc && zt && (xt ^ zc ^ 1)) p.coeff = -p.coeff;
  if (xc) p.x ^= std::uint64_t{1} << target;
  if (zt) p.z ^= std::uint64_t{1} << control;
}

struct PauliSum {
  int n_qubits = 0;
  std::vector<PauliString> terms;

  void add(PauliString p) {
    detail::require(p.n_qubits == n_qubits, "Pauli term size mismatch");
    terms.push_back(p);
  }

  void apply(const Vec &in, Vec &out) const {
    out = Vec::Zero(in.size());
    Vec tmp;
    for (const auto &t : terms) {
      apply_pauli(t, in, tmp);
      out += tmp;
    }
  }

  Mat dense() const {
    const std::size_t d = std::size_t{1} << n_qubits;
    Mat m = Mat::Zero(d, d);
    for (const auto &t : terms) m += to_dense(t);
    return m;
  }

  double coefficient_l1() const {
    double s = 0;
    for (const auto &t : terms) s += std::abs(t.coeff);
    return s;
  }
};

// ---------------------------------------------------------------------------
// Observables and measurements

class Observable {
 public:
  static Observable pauli(PauliString p) {
    PauliSum s{p.n_qubits, {p}};
    return Observable(std::move(s));
  }
  static Observable pauli_sum(PauliSum s) { return Observable(std::move(s)); }

  /// Dense Hermitian matrix; rejects non-Hermitian input.
  static Observable dense(Mat m) {
    detail::require(m.rows() == m.cols(), "observable must be square");
    detail::require(m.rows() >= 1 && std::has_single_bit(static_cast<std::size_t>(m.rows())),
                    "observable dimension must be a power of two");
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    detail::require((m - m.adjoint()).cwiseAbs().maxCoeff() <= 1e-12 * scale, "observable is not Hermitian");
    return Observable(std::move(m));
  }

  std::size_t dim() const {
    if (const auto *p = std::get_if<PauliSum>(&rep_)) return std::size_t{1} << p->n_qubits;
    return static_cast<std::size_t>(std::get<Mat>(rep_).rows());
  }

  void apply(const Vec &in, Vec &out) const {
    if (const auto *p = std::get_if<PauliSum>(&rep_)) {
      p->apply(in, out);
    } else {
      out = std::get<Mat>(rep_) * in;
    }
  }

  Vec apply(const Vec &in) const {
    Vec out;
    apply(in, out);
    return out;
  }

  Mat to_dense() const {
    if (const auto *p = std::get_if<PauliSum>(&rep_)) return p->dense();
    return std::get<Mat>(rep_);
  }

  double scale() const {
    if (const auto *p = std::get_if<PauliSum>(&rep_)) return std::max(1.0, p->coefficient_l1());
    return std::max(1.0, std::get<Mat>(rep_).norm());
  }

  bool is_pauli() const { return std::holds_alternative<PauliSum>(rep_); }

  /// <u|O|v> without materializing O for Pauli sums.
  cplx matrix_element(const Vec &u, const Vec &v) const {
    if (const auto *p = std::get_if<PauliSum>(&rep_)) {
      cplx acc = 0.0;
      for (const auto &t : p->terms) acc += pauli_matrix_element(t, u, v);
      return acc;
    }
    return u.dot(std::get<Mat>(rep_) * v);
  }

 private:
  explicit Observable(PauliSum s) : rep_(std::move(s)) {}
  explicit Observable(Mat m) : rep_(std::move(m)) {}
  std::variant<PauliSum, Mat> rep_;
};

inline double expectation(const StateVector &s, const Observable &obs) {
  detail::require(obs.dim() == s.dim(), "observable dimension mismatch");
  const cplx v = obs.matrix_element(s.amps(), s.amps());
  if (std::abs(v.imag()) > 1e-10 * obs.scale()) {
    throw NumericalError("expectation value has a non-negligible imaginary part");
  }
  return v.real();
}

inline cplx inner(const StateVector &a, const StateVector &b) {
  detail::require(a.dim() == b.dim(), "state dimension mismatch");
  return a.amps().dot(b.amps());
}

inline double fidelity(const StateVector &a, const StateVector &b) {
  return std::clamp(std::norm(inner(a, b)), 0.0, 1.0);
}

/// (Pr[q = 0], Pr[q = 1]) for a computational-basis measurement of qubit q.
inline std::pair<double, double> ancilla_probs(const StateVector &s, int q) {
  detail::check_qubit(s, q);
  double p0 = 0.0, p1 = 0.0;
  const Vec &a = s.amps();
  for (std::size_t i = 0; i < s.dim(); ++i) (bit_of(i, q) ? p1 : p0) += std::norm(a[i]);
  const double t = p0 + p1;
  return {p0 / t, p1 / t};
}

/// Reduced density matrix of `qubits` (local bit j = qubits[j]).
inline Mat reduced_density(const StateVector &s, const std::vector<int> &qubits) {
  const int k = static_cast<int>(qubits.size());
  for (int q : qubits) detail::check_qubit(s, q);
  const std::size_t dk = std::size_t{1} << k;
  std::vector<int> sorted = qubits;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> offset(dk, 0);
  for (std::size_t l = 0; l < dk; ++l) {
    for (int j = 0; j < k; ++j) {
      if ((l >> j) & 1u) offset[l] |= std::size_t{1} << qubits[j];
    }
  }
  Mat rho = Mat::Zero(dk, dk);
  Vec buf(static_cast<Eigen::Index>(dk));
  for (std::size_t r = 0; r < (s.dim() >> k); ++r) {
    std::size_t base = r;
    for (int q : sorted) base = insert_zero_bit(base, q);
    for (std::size_t l = 0; l < dk; ++l) buf[l] = s[base | offset[l]];
    rho.noalias() += buf * buf.adjoint();
  }
  return rho;
}

/// Relabels qubits: old qubit q becomes new qubit perm[q].
inline StateVector permute_qubits(const StateVector &s, const std::vector<int> &perm) {
  const int n = s.n_qubits();
  detail::require(static_cast<int>(perm.size()) == n, "permutation size mismatch");
  std::vector<bool> used(n, false);
  for (int p : perm) {
    detail::require(p >= 0 && p < n && !used[p], "not a permutation");
    used[p] = true;
  }
  Vec out(static_cast<Eigen::Index>(s.dim()));
  for (std::size_t i = 0; i < s.dim(); ++i) {
    std::size_t j = 0;
    for (int q = 0; q < n; ++q) j |= bit_of(i, q) << perm[q];
    out[j] = s[i];
  }
  return StateVector::from_amplitudes(std::move(out));
}

/// a (x) b with b on the low qubits.
inline StateVector tensor(const StateVector &high, const StateVector &low) {
  Vec out(static_cast<Eigen::Index>(high.dim() * low.dim()));
  for (std::size_t h = 0; h < high.dim(); ++h) {
    out.segment(static_cast<Eigen::Index>(h * low.dim()), static_cast<Eigen::Index>(low.dim())) =
        high[h] * low.amps();
  }
  return StateVector::from_amplitudes(std::move(out), true);
}

/// Kronecker product with `a` acting on the more significant qubits.
inline Mat kron(const Mat &a, const Mat &b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

}  // namespace qre
