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

// Haar-measure moments over U(d) and over tensor products of independent
// block unitaries, plus the gradient-variance expressions built from them.
//
//   first moment   E[U^dag O U]             = Tr(O)/d I
//   second moment  E[U^dag A U X U^dag B U] = c1 Tr(X) I + c2 X
//     c1 = (d Tr(AB) - Tr A Tr B) / (d (d^2 - 1))
//     c2 = (d Tr A Tr B - Tr(AB)) / (d (d^2 - 1))
//
// For a block acting on a subsystem the same coefficients apply with Tr(X) I
// replaced by Tr_block(X) (x) I_block.

#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include "qre/error.hpp"
#include "qre/statevec.hpp"

namespace qre {

namespace detail {

inline void require_square(const Mat &m, const char *what) {
  detail::require(m.rows() == m.cols(), std::string(what) + " must be square");
}

inline std::pair<double, double> second_moment_coefficients(const Mat &a, const Mat &b) {
  const auto d = static_cast<double>(a.rows());
  detail::require(a.rows() > 1, "second moment needs dimension d >= 2");
  const cplx tra = a.trace(), trb = b.trace();
  const cplx trab = (a * b).trace();
  const double den = d * (d * d - 1.0);
  return {((d * trab - tra * trb) / den).real(), ((d * tra * trb - trab) / den).real()};
}

/// Extracts the bits of i selected by mask into a compact integer.
inline std::size_t gather_bits(std::size_t i, std::uint64_t mask) {
  std::size_t out = 0;
  int k = 0;
  for (std::uint64_t m = mask; m; m &= m - 1, ++k) {
    if (i & (m & -m)) out |= std::size_t{1} << k;
  }
  return out;
}

inline std::size_t scatter_bits(std::size_t v, std::uint64_t mask) {
  std::size_t out = 0;
  int k = 0;
  for (std::uint64_t m = mask; m; m &= m - 1, ++k) {
    if ((v >> k) & 1u) out |= static_cast<std::size_t>(m & -m);
  }
  return out;
}

}  // namespace detail

inline Mat first_moment(const Mat &o) {
  detail::require_square(o, "operator");
  const auto d = o.rows();
  return (o.trace() / static_cast<double>(d)) * Mat::Identity(d, d);
}

inline Mat second_moment(const Mat &a, const Mat &b, const Mat &x) {
  detail::require_square(a, "A");
  detail::require(a.rows() == b.rows() && b.cols() == b.rows() && x.rows() == a.rows() && x.cols() == a.rows(),
                  "A, B and X must have equal dimensions");
  const auto [c1, c2] = detail::second_moment_coefficients(a, b);
  return c1 * x.trace() * Mat::Identity(x.rows(), x.cols()) + c2 * x;
}

/// Tr_S(X) (x) I_S for the qubits selected by `mask`, in place of those qubits.
inline Mat partial_trace_replace(const Mat &x, std::uint64_t mask) {
  const auto d = static_cast<std::size_t>(x.rows());
  const std::size_t ds = std::size_t{1} << std::popcount(mask);
  const std::uint64_t rest = (d - 1) & ~mask;
  const std::size_t dr = d / ds;
  Mat reduced = Mat::Zero(static_cast<Eigen::Index>(dr), static_cast<Eigen::Index>(dr));
  for (std::size_t r = 0; r < dr; ++r) {
    for (std::size_t c = 0; c < dr; ++c) {
      cplx acc = 0.0;
      const std::size_t ri = detail::scatter_bits(r, rest), ci = detail::scatter_bits(c, rest);
      for (std::size_t t = 0; t < ds; ++t) {
        const std::size_t tb = detail::scatter_bits(t, mask);
        acc += x(static_cast<Eigen::Index>(ri | tb), static_cast<Eigen::Index>(ci | tb));
      }
      reduced(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = acc;
    }
  }
  Mat out = Mat::Zero(x.rows(), x.cols());
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      if ((i & mask) != (j & mask)) continue;
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          reduced(static_cast<Eigen::Index>(detail::gather_bits(i, rest)),
                  static_cast<Eigen::Index>(detail::gather_bits(j, rest)));
    }
  }
  return out;
}

/// One Haar-random factor acting on the qubits in `qubits` (local bit j =
/// qubits[j]) with local operators A and B.
struct BlockMomentTerm {
  std::vector<int> qubits;
  Mat a;
  Mat b;
};

/// E[ (x)_j U_j^dag A_j U_j  X  (x)_j U_j^dag B_j U_j ] over independent Haar
/// factors, integrating one block at a time in the order given.
inline Mat block_second_moment(const std::vector<BlockMomentTerm> &blocks, const Mat &x) {
  detail::require_square(x, "X");
  const auto d = static_cast<std::size_t>(x.rows());
  detail::require(std::has_single_bit(d), "X dimension must be a power of two");
  std::size_t total = 1;
  std::uint64_t seen = 0;
  for (const auto &blk : blocks) {
    std::uint64_t mask = 0;
    for (int q : blk.qubits) {
      detail::require(q >= 0 && (std::size_t{1} << q) < d, "block qubit out of range");
      mask |= std::uint64_t{1} << q;
    }
    detail::require((mask & seen) == 0 && std::popcount(mask) == static_cast<int>(blk.qubits.size()),
                    "blocks must be disjoint");
    seen |= mask;
    const auto db = std::size_t{1} << blk.qubits.size();
    detail::require(static_cast<std::size_t>(blk.a.rows()) == db && static_cast<std::size_t>(blk.b.rows()) == db,
                    "block operator dimension mismatch");
    total *= db;
  }
  detail::require(total == d, "block dimensions must multiply to dim(X)");

  Mat y = x;
  for (const auto &blk : blocks) {
    std::uint64_t mask = 0;
    for (int q : blk.qubits) mask |= std::uint64_t{1} << q;
    const auto [c1, c2] = detail::second_moment_coefficients(blk.a, blk.b);
    y = c1 * partial_trace_replace(y, mask) + c2 * y;
  }
  return y;
}

// ---------------------------------------------------------------------------
// Gradient variance at theta_0 under a Haar-random encoder E:
//   g = i <psi| [E^dag A E, H] |psi>,   E[g] = 0,
//   E[g^2] = T2 + T3 - T1 - T4 with
//   T1 = Tr(S(H rho) H rho),  T2 = Tr(S(H rho H) rho),
//   T3 = Tr(S(rho) H rho H),  T4 = Tr(S(rho H) rho H),
// where S(X) = E[E^dag A E X E^dag A E].

template <class Moment>
double exact_gradient_variance(const Vec &psi, const Mat &h, Moment &&moment) {
  const Mat rho = psi * psi.adjoint();
  const Mat hr = h * rho, rh = rho * h, hrh = h * rho * h;
  const double t1 = (moment(hr) * hr).trace().real();
  const double t2 = (moment(hrh) * rho).trace().real();
  const double t3 = (moment(rho) * hrh).trace().real();
  const double t4 = (moment(rh) * rh).trace().real();
  return t2 + t3 - t1 - t4;
}

inline double exact_gradient_variance_global(const Mat &a, const Vec &psi, const Mat &h) {
  return exact_gradient_variance(psi, h, [&](const Mat &x) { return second_moment(a, a, x); });
}

struct VarianceAndBound {
  double exact;
  double bound;
};

/// Global 2-design gradient variance from traces:
///   exact = 2/(d(d^2-1)) [d Tr(A^2) - Tr(A)^2] [Tr(rho H^2) - Tr(rho H)^2]
///   bound = 2 Tr(A^2) Tr(rho H^2) / (d^2 - 1)
inline VarianceAndBound thm1_variance_from_traces(double d, double tr_a, double tr_a2, double rho_h,
                                                  double rho_h2) {
  detail::require(d >= 2, "dimension must be at least 2");
  const double exact = 2.0 / (d * (d * d - 1.0)) * (d * tr_a2 - tr_a * tr_a) * (rho_h2 - rho_h * rho_h);
  const double bound = 2.0 * tr_a2 * rho_h2 / (d * d - 1.0);
  return {exact, bound};
}

inline VarianceAndBound thm1_variance_exact(const Mat &a, const Mat &rho, const Mat &h) {
  detail::require(a.rows() == rho.rows() && rho.rows() == h.rows(), "dimension mismatch");
  return thm1_variance_from_traces(static_cast<double>(a.rows()), a.trace().real(), (a * a).trace().real(),
                                   (rho * h).trace().real(), (rho * h * h).trace().real());
}

/// Same as thm1_variance_exact for rho = |psi><psi| given h_psi = H|psi> and a
/// generator with Tr(A) = tr_a, Tr(A^2) = tr_a2.
inline VarianceAndBound thm1_variance_pure(const Vec &psi, const Vec &h_psi, double tr_a, double tr_a2) {
  return thm1_variance_from_traces(static_cast<double>(psi.size()), tr_a, tr_a2, psi.dot(h_psi).real(),
                                   h_psi.squaredNorm());
}

/// sum_{k,k'} c_k c_k' ((2^m + 1) / (2^{2m} - 1))^xi C0.
inline double thm2_variance_bound(int m, int xi, double coeff_sum, double c0) {
  detail::require(m >= 1 && xi >= 1, "block size and count must be positive");
  const double dm = std::ldexp(1.0, m);
  return coeff_sum * std::pow((dm + 1.0) / (dm * dm - 1.0), xi) * c0;
}

struct C0Terms {
  std::vector<double> per_subset;  // indexed by block-subset bitmask J
  double c0 = 0.0;
};

/// Block-subset constants for a = |psi>, b = H|psi> with xi consecutive blocks
/// of m qubits:
///   M(u,v,w,x) = <w| (Tr_J |u><v| (x) I_J) |x>
///   C(J) = M(a,a,b,b) + M(b,b,a,a) - M(a,b,b,a) - M(b,a,a,b),  C0 = max_J C(J).
inline C0Terms c0_terms(const Vec &a, const Vec &b, int m, int xi) {
  detail::require(a.size() == b.size() && a.size() == (Eigen::Index{1} << (m * xi)), "vector size mismatch");
  C0Terms out;
  const std::size_t d = static_cast<std::size_t>(a.size());
  const std::uint64_t block_mask = (std::uint64_t{1} << m) - 1;
  for (std::uint64_t subset = 0; subset < (std::uint64_t{1} << xi); ++subset) {
    std::uint64_t mask = 0;
    for (int j = 0; j < xi; ++j) {
      if ((subset >> j) & 1u) mask |= block_mask << (j * m);
    }
    const std::uint64_t rest = (d - 1) & ~mask;
    const auto dj = static_cast<Eigen::Index>(std::size_t{1} << std::popcount(mask));
    const auto dc = static_cast<Eigen::Index>(d) / dj;
    Mat ra(dc, dj), rb(dc, dj);
    for (std::size_t i = 0; i < d; ++i) {
      const auto k = static_cast<Eigen::Index>(detail::gather_bits(i, rest));
      const auto j = static_cast<Eigen::Index>(detail::gather_bits(i, mask));
      ra(k, j) = a[static_cast<Eigen::Index>(i)];
      rb(k, j) = b[static_cast<Eigen::Index>(i)];
    }
    auto mterm = [](const Mat &u, const Mat &v, const Mat &w, const Mat &x) {
      return ((w.adjoint() * u) * (v.adjoint() * x)).trace();
    };
    const cplx c = mterm(ra, ra, rb, rb) + mterm(rb, rb, ra, ra) - mterm(ra, rb, rb, ra) - mterm(rb, ra, ra, rb);
    out.per_subset.push_back(c.real());
    out.c0 = subset == 0 ? c.real() : std::max(out.c0, c.real());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo moment estimators

struct MomentEstimate {
  Mat mean;
  double stderr_frobenius;  // from batch means
};

/// Estimates E[f(U)] for a matrix-valued f over `samples` draws of `sampler`,
/// with a batch-means error bar (Frobenius norm).
template <class Sampler, class F>
MomentEstimate monte_carlo_moment(Sampler &&sampler, F &&f, long samples, int batches = 20) {
  detail::require(samples >= batches && batches >= 2, "too few samples for the requested batches");
  std::vector<Mat> batch_means;
  Mat total;
  long done = 0;
  for (int bidx = 0; bidx < batches; ++bidx) {
    const long count = samples / batches + (bidx < samples % batches ? 1 : 0);
    Mat acc;
    for (long s = 0; s < count; ++s) {
      const Mat v = f(sampler());
      if (acc.size() == 0) acc = Mat::Zero(v.rows(), v.cols());
      acc += v;
    }
    total = total.size() == 0 ? acc : Mat(total + acc);
    batch_means.push_back(acc / static_cast<double>(count));
    done += count;
  }
  Mat mean = total / static_cast<double>(done);
  double ss = 0.0;
  for (const auto &bm : batch_means) ss += (bm - mean).squaredNorm();
  const double b = static_cast<double>(batches);
  return {mean, std::sqrt(ss / (b * (b - 1.0)))};
}

}  // namespace qre
