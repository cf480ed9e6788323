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

// Cluster-Ising ground-state datasets.
//
//   H(lambda) = -sum_{i=1}^{n-2} X_{i-1} Z_i X_{i+1} + lambda sum_{i=0}^{n-2} Y_i Y_{i+1}
//
// with open boundaries. Label 0 (cluster phase) for lambda < 1, label 1
// (antiferromagnetic phase) for lambda > 1.

#include <Eigen/Eigenvalues>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qre/error.hpp"
#include "qre/parallel.hpp"
#include "qre/rng.hpp"
#include "qre/statevec.hpp"

namespace qre {

struct ClusterIsingSpec {
  int n = 3;
  double lambda = 0.0;

  void validate() const {
    detail::require(n >= 3 && n <= 20, "cluster-Ising model needs 3 <= n <= 20");
    detail::require(lambda >= 0.0, "lambda must be non-negative");
  }
};

inline PauliSum cluster_ising_hamiltonian(const ClusterIsingSpec &spec) {
  spec.validate();
  PauliSum h{spec.n, {}};
  for (int i = 1; i + 1 < spec.n; ++i) {
    PauliString p;
    p.n_qubits = spec.n;
    p.coeff = -1.0;
    p.set(i - 1, 'X');
    p.set(i, 'Z');
    p.set(i + 1, 'X');
    h.add(p);
  }
  if (spec.lambda != 0.0) {
    for (int i = 0; i + 1 < spec.n; ++i) {
      PauliString p;
      p.n_qubits = spec.n;
      p.coeff = spec.lambda;
      p.set(i, 'Y');
      p.set(i + 1, 'Y');
      h.add(p);
    }
  }
  return h;
}

/// H v (unnormalized), matrix-free.
inline Vec hamiltonian_apply(const ClusterIsingSpec &spec, const StateVector &v) {
  spec.validate();
  detail::require(v.n_qubits() == spec.n, "state dimension does not match the Hamiltonian");
  Vec out;
  cluster_ising_hamiltonian(spec).apply(v.amps(), out);
  return out;
}

struct LanczosOptions {
  double tol = 1e-8;
  int max_iterations = 2000;  // total matrix-vector products
  int krylov_dim = 200;
  std::uint64_t seed = 0;
};

struct LanczosResult {
  double energy = 0.0;
  Vec state;
  double residual = 0.0;
  double ritz_gap = 0.0;  // second-lowest minus lowest Ritz value of the last cycle
  int iterations = 0;
};

/// Lowest eigenpair of a Hermitian operator by restarted Lanczos with full
/// reorthogonalization. Throws NumericalError if the residual does not reach
/// `tol` within `max_iterations` products.
inline LanczosResult lanczos_ground_state(const std::function<void(const Vec &, Vec &)> &apply_h, std::size_t dim,
                                          const LanczosOptions &opt = {}) {
  detail::require(dim >= 1, "empty operator");
  const auto d = static_cast<Eigen::Index>(dim);
  Rng rng(opt.seed, 0x1A2C305);
  Vec v(d);
  for (auto &a : v) a = cplx(rng.normal(), rng.normal());
  v.normalize();

  LanczosResult res;
  Vec w;
  const int kmax = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(opt.krylov_dim), dim));
  while (res.iterations < opt.max_iterations) {
    Mat basis(d, kmax);
    std::vector<double> alpha, beta;
    basis.col(0) = v;
    Eigen::VectorXd ritz;
    Eigen::MatrixXd ritz_vecs;
    int k = 0;
    bool converged = false;
    for (;;) {
      apply_h(basis.col(k), w);
      ++res.iterations;
      const double a = basis.col(k).dot(w).real();
      alpha.push_back(a);
      w -= a * basis.col(k);
      if (k > 0) w -= beta.back() * basis.col(k - 1);
      for (int pass = 0; pass < 2; ++pass) {
        const Vec overlaps = basis.leftCols(k + 1).adjoint() * w;
        w -= basis.leftCols(k + 1) * overlaps;
      }
      const double b = w.norm();
      ++k;
      const bool full = k == kmax || res.iterations >= opt.max_iterations;
      const bool breakdown = b < 1e-12;
      if (k % 10 == 0 || full || breakdown) {
        Eigen::MatrixXd t = Eigen::MatrixXd::Zero(k, k);
        for (int i = 0; i < k; ++i) {
          t(i, i) = alpha[static_cast<std::size_t>(i)];
          if (i + 1 < k) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
        ritz = es.eigenvalues();
        ritz_vecs = es.eigenvectors();
        const double estimate = b * std::abs(ritz_vecs(k - 1, 0));
        if (estimate < 0.1 * opt.tol) converged = true;
        if (converged || full || breakdown) break;
      }
      beta.push_back(b);
      basis.col(k) = w / b;
    }
    v = basis.leftCols(k) * ritz_vecs.col(0).cast<cplx>();
    v.normalize();
    res.energy = ritz(0);
    res.ritz_gap = k > 1 ? ritz(1) - ritz(0) : 0.0;
    apply_h(v, w);
    ++res.iterations;
    res.energy = v.dot(w).real();
    res.residual = (w - res.energy * v).norm();
    if (res.residual <= opt.tol) {
      res.state = std::move(v);
      return res;
    }
  }
  throw NumericalError("Lanczos did not converge: residual " + std::to_string(res.residual) + " after " +
                       std::to_string(res.iterations) + " iterations");
}

struct GroundState {
  double energy;
  StateVector state;
  double residual;
  double ritz_gap;
};

inline GroundState ground_state(const ClusterIsingSpec &spec, double tol = 1e-8, std::uint64_t seed = 0) {
  spec.validate();
  detail::require(spec.n <= 14, "ground_state supports n <= 14");
  const PauliSum h = cluster_ising_hamiltonian(spec);
  LanczosOptions opt;
  opt.tol = tol;
  opt.seed = seed;
  auto r = lanczos_ground_state([&](const Vec &in, Vec &out) { h.apply(in, out); }, std::size_t{1} << spec.n, opt);
  return {r.energy, StateVector::from_amplitudes(std::move(r.state), true), r.residual, r.ritz_gap};
}

// ---------------------------------------------------------------------------
// Datasets

struct LabeledSample {
  double lambda = 0.0;
  int label = 0;
  StateVector state;
  bool degenerate = false;
};

struct Dataset {
  int n = 0;
  std::uint64_t seed = 0;
  double margin = 0.1;
  double lambda_lo = 0.0;
  double lambda_hi = 2.0;
  std::vector<LabeledSample> samples;

  std::size_t size() const { return samples.size(); }
};

inline int phase_label(double lambda) { return lambda < 1.0 ? 0 : 1; }

struct DatasetOptions {
  double lambda_lo = 0.0;
  double lambda_hi = 2.0;
  double margin = 0.1;
  double tol = 1e-8;
  double degeneracy_threshold = 1e-6;
  int degeneracy_retries = 2;
};

/// Balanced dataset: ceil(count/2) samples with lambda uniform on
/// [lo, 1 - margin] and floor(count/2) on [1 + margin, hi], then shuffled.
inline Dataset generate_dataset(int n, int count, std::uint64_t seed, const DatasetOptions &opt = {}) {
  detail::require(count >= 2, "dataset needs at least two samples");
  detail::require(opt.margin >= 0 && opt.lambda_lo >= 0 && opt.lambda_lo < 1 - opt.margin &&
                      opt.lambda_hi > 1 + opt.margin,
                  "invalid lambda range or margin");
  ClusterIsingSpec{n, 0.0}.validate();
  Dataset ds;
  ds.n = n;
  ds.seed = seed;
  ds.margin = opt.margin;
  ds.lambda_lo = opt.lambda_lo;
  ds.lambda_hi = opt.lambda_hi;
  const Rng root(seed);
  Rng lambda_rng = root.split(0);
  std::vector<double> lambdas(static_cast<std::size_t>(count));
  const int n0 = (count + 1) / 2;
  for (int i = 0; i < count; ++i) {
    lambdas[static_cast<std::size_t>(i)] = i < n0 ? lambda_rng.uniform(opt.lambda_lo, 1.0 - opt.margin)
                                                  : lambda_rng.uniform(1.0 + opt.margin, opt.lambda_hi);
  }
  Rng shuffle_rng = root.split(1);
  for (std::size_t i = lambdas.size(); i > 1; --i) std::swap(lambdas[i - 1], lambdas[shuffle_rng.below(i)]);

  ds.samples.resize(lambdas.size());
  const Rng solver_seeds = root.split(2);
  parallel_for(lambdas.size(), [&](std::size_t i) {
    double lambda = lambdas[i];
    const int label = phase_label(lambda);
    const std::uint64_t start_seed = solver_seeds.split(i)();
    GroundState gs = ground_state({n, lambda}, opt.tol, start_seed);
    bool degenerate = gs.ritz_gap < opt.degeneracy_threshold;
    for (int retry = 0; degenerate && retry < opt.degeneracy_retries; ++retry) {
      const double shifted = lambda + (retry % 2 == 0 ? 0.01 : -0.02);
      if (phase_label(shifted) != label || std::abs(shifted - 1.0) < opt.margin || shifted < 0) break;
      lambda = shifted;
      gs = ground_state({n, lambda}, opt.tol, start_seed);
      degenerate = gs.ritz_gap < opt.degeneracy_threshold;
    }
    ds.samples[i] = {lambda, label, std::move(gs.state), degenerate};
  });
  return ds;
}

/// Stratified split: the first round(train_fraction * k) samples of each
/// class (in dataset order) go to the training set.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(const Dataset &ds,
                                                                                   double train_fraction) {
  detail::require(train_fraction > 0 && train_fraction <= 1, "train fraction must be in (0, 1]");
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.samples[i].label].push_back(i);
  std::vector<std::size_t> train, val;
  for (const auto &cls : by_class) {
    const auto k = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(cls.size())));
    for (std::size_t j = 0; j < cls.size(); ++j) (j < k ? train : val).push_back(cls[j]);
  }
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  return {train, val};
}

// ---------------------------------------------------------------------------
// Binary container
//
//   "QRED" | u32 version | u32 n | u32 count | u64 seed | f64 margin
//   count x { f64 lambda | u8 label | 2^n x (f64 re, f64 im) }
//
// All fields little-endian.

inline constexpr std::uint32_t kDatasetFormatVersion = 1;

namespace detail {

template <class T>
void put_le(std::ostream &os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  os.write(reinterpret_cast<const char *>(bytes), sizeof(T));
}

template <class T>
T get_le(std::istream &is) {
  unsigned char bytes[sizeof(T)];
  is.read(reinterpret_cast<char *>(bytes), sizeof(T));
  if (!is) throw FormatError("truncated dataset file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace detail

inline void write_dataset(std::ostream &os, const Dataset &ds) {
  os.write("QRED", 4);
  detail::put_le<std::uint32_t>(os, kDatasetFormatVersion);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.n));
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.size()));
  detail::put_le<std::uint64_t>(os, ds.seed);
  detail::put_le<double>(os, ds.margin);
  for (const auto &s : ds.samples) {
    detail::put_le<double>(os, s.lambda);
    detail::put_le<std::uint8_t>(os, static_cast<std::uint8_t>(s.label));
    for (std::size_t i = 0; i < s.state.dim(); ++i) {
      detail::put_le<double>(os, s.state[i].real());
      detail::put_le<double>(os, s.state[i].imag());
    }
  }
}

inline Dataset read_dataset(std::istream &is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "QRED", 4) != 0) throw FormatError("not a dataset file");
  const auto version = detail::get_le<std::uint32_t>(is);
  if (version != kDatasetFormatVersion) throw FormatError("unsupported dataset version " + std::to_string(version));
  Dataset ds;
  ds.n = static_cast<int>(detail::get_le<std::uint32_t>(is));
  const auto count = detail::get_le<std::uint32_t>(is);
  ds.seed = detail::get_le<std::uint64_t>(is);
  ds.margin = detail::get_le<double>(is);
  if (ds.n < 1 || ds.n > kMaxQubits) throw FormatError("bad qubit count in dataset header");
  const std::size_t dim = std::size_t{1} << ds.n;
  ds.samples.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    LabeledSample s;
    s.lambda = detail::get_le<double>(is);
    s.label = detail::get_le<std::uint8_t>(is);
    if (s.label > 1) throw FormatError("bad label in dataset record");
    Vec amps(static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < dim; ++i) {
      const double re = detail::get_le<double>(is);
      const double im = detail::get_le<double>(is);
      amps[static_cast<Eigen::Index>(i)] = cplx(re, im);
    }
    s.state = StateVector::from_amplitudes(std::move(amps), true);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

inline nlohmann::json dataset_sidecar(const Dataset &ds) {
  int counts[2] = {0, 0}, degenerate = 0;
  for (const auto &s : ds.samples) {
    ++counts[s.label];
    degenerate += s.degenerate;
  }
  return {{"format", "QRED"},
          {"format_version", kDatasetFormatVersion},
          {"model", "cluster-ising-open"},
          {"n", ds.n},
          {"count", ds.size()},
          {"seed", ds.seed},
          {"margin", ds.margin},
          {"lambda_range", {ds.lambda_lo, ds.lambda_hi}},
          {"class_counts", {counts[0], counts[1]}},
          {"degenerate_flagged", degenerate},
          {"rng", Rng::kAlgorithm}};
}

inline void save_dataset(const std::string &path, const Dataset &ds) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path);
  write_dataset(os, ds);
  std::ofstream js(path + ".json");
  js << dataset_sidecar(ds).dump(2) << "\n";
}

inline Dataset load_dataset(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  Dataset ds = read_dataset(is);
  std::ifstream js(path + ".json");
  if (js) {
    const auto meta = nlohmann::json::parse(js);
    if (meta.contains("lambda_range")) {
      ds.lambda_lo = meta["lambda_range"][0];
      ds.lambda_hi = meta["lambda_range"][1];
    }
  }
  return ds;
}

}  // namespace qre
