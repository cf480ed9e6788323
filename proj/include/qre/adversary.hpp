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

// Attacks on the classifier, gradient statistics of the adversarial circuit
// under random encoders, adversarial risk over Haar product inputs, and the
// concentration-of-measure probe.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "qre/circuits.hpp"
#include "qre/classifier.hpp"
#include "qre/dataset.hpp"
#include "qre/defense.hpp"
#include "qre/error.hpp"
#include "qre/haar.hpp"
#include "qre/parallel.hpp"
#include "qre/rng.hpp"
#include "qre/statevec.hpp"

namespace qre {

// ---------------------------------------------------------------------------
// Gradient attack

struct AttackConfig {
  int steps = 50;
  double step_size = 0.1;
  double budget = 0.5;  // radius of the Euclidean ball around theta_0
  int adversary_layers = 4;
  int max_halvings = 8;

  void validate() const {
    if (steps < 0) throw ConfigError("attack steps must be non-negative");
    if (!(budget > 0) || !(step_size > 0)) throw ConfigError("attack budget and step size must be positive");
    if (adversary_layers < 1 || max_halvings < 0) throw ConfigError("invalid adversary layer or halving count");
  }
};

struct AttackResult {
  std::vector<double> theta;
  std::vector<double> loss_trace;  // loss_trace[0] is the clean loss
  double first_grad_inf_norm = 0.0;
  int clean_label = 0;
  int attacked_label = 0;

  bool flipped() const { return clean_label != attacked_label; }
};

inline void project_to_ball(std::vector<double> &theta, double radius) {
  double s = 0.0;
  for (double t : theta) s += t * t;
  const double norm = std::sqrt(s);
  if (norm > radius) {
    for (auto &t : theta) t *= radius / norm;
  }
}

/// Projected gradient ascent on the adversarial angles, starting at theta_0 = 0.
/// A step that lowers the loss is retried with half the step size; if every
/// retry fails the iterate stays put, so the trace never decreases.
inline AttackResult gradient_attack(EncodedLossContext ctx, const AttackConfig &cfg) {
  cfg.validate();
  if (ctx.adversary.param_count() == 0 || ctx.adversary.n_qubits() != ctx.model->n_data) {
    ctx.adversary = build_adversarial_circuit(ctx.model->n_data, cfg.adversary_layers);
  }
  ctx.validate();
  AttackResult r;
  r.theta.assign(static_cast<std::size_t>(ctx.adversary.param_count()), 0.0);
  r.clean_label = predict_from_probs(class_probs(*ctx.model, ctx.psi));
  auto lg = encoded_loss_and_gradient(ctx, r.theta);
  r.loss_trace.push_back(lg.loss);
  for (double g : lg.grad) r.first_grad_inf_norm = std::max(r.first_grad_inf_norm, std::abs(g));

  for (int step = 0; step < cfg.steps; ++step) {
    double eta = cfg.step_size;
    bool moved = false;
    for (int h = 0; h <= cfg.max_halvings && !moved; ++h, eta /= 2) {
      std::vector<double> next = r.theta;
      for (std::size_t i = 0; i < next.size(); ++i) next[i] += eta * lg.grad[i];
      project_to_ball(next, cfg.budget);
      auto trial = encoded_loss_and_gradient(ctx, next);
      if (trial.loss >= lg.loss) {
        r.theta = std::move(next);
        lg = std::move(trial);
        moved = true;
      }
    }
    r.loss_trace.push_back(lg.loss);
  }
  r.attacked_label = predict_from_probs(class_probs(*ctx.model, attacked_state(ctx, r.theta)));
  return r;
}

// ---------------------------------------------------------------------------
// Gradient statistics at theta_0

/// Data-register observable seen by the adversary plus the loss built on it.
/// Without a loss the gradient is that of the expectation value itself.
struct Readout {
  std::string name;
  std::function<Vec(const Vec &)> apply;
  std::optional<LossKind> loss;
};

inline Readout z0_readout() {
  return {"none",
          [](const Vec &v) {
            Vec w = v;
            for (Eigen::Index i = 1; i < w.size(); i += 2) w[i] = -w[i];
            return w;
          },
          std::nullopt};
}

inline Readout classifier_readout(const ClassifierModel &m, int label, LossKind loss, std::string name) {
  return {std::move(name), [m, label](const Vec &v) { return apply_effective_observable(m, label, v); }, loss};
}

struct GradStatsConfig {
  std::vector<int> n_values{4, 6, 8};
  CodebookKind encoder = CodebookKind::GlobalHaar;
  int block_size = 2;
  int encoder_depth = 4;
  int adversary_layers = 4;
  long samples = 1000;
  std::uint64_t seed = 1;
  std::string classifier = "none";  // none | random
  int classifier_layers = 10;
  LossKind loss = LossKind::KL;
  std::string input = "ground";  // ground | random
  double lambda = 0.5;
  bool theorem_scope = false;
  int exact_block_max_n = 8;

  void validate() const {
    if (n_values.empty()) throw ConfigError("grad-stats needs at least one n");
    for (int n : n_values) {
      if (n < 2 || n > 14) throw ConfigError("grad-stats n must be in [2, 14]");
      if (encoder == CodebookKind::BlockHaar && n % block_size != 0) {
        throw ConfigError("block-haar needs n divisible by the block size");
      }
    }
    if (samples < 2) throw ConfigError("grad-stats needs at least two samples");
    if (classifier != "none" && classifier != "random") throw ConfigError("classifier must be none or random");
    if (input != "ground" && input != "random") throw ConfigError("input must be ground or random");
    if (block_size < 1 || encoder_depth < 1 || adversary_layers < 1 || classifier_layers < 1) {
      throw ConfigError("sizes must be positive");
    }
  }
};

struct GradStatsRecord {
  int n = 0;
  std::string encoder;
  std::string classifier;
  std::string loss;
  std::string input;
  long samples = 0;
  std::vector<int> params;  // adversarial parameter indices included
  std::vector<double> param_mean, param_mean_stderr, param_variance;
  double mean = 0.0;  // parameter-averaged signed mean
  double mean_stderr = 0.0;
  double mean_abs = 0.0;  // parameter-averaged |mean|
  double variance = 0.0;  // parameter-averaged variance
  double variance_stderr = 0.0;
  double thm1_exact = 0.0;
  double thm1_bound = 0.0;
  double thm2_bound = std::nan("");
  double c0 = std::nan("");
  double block_exact = std::nan("");
};

namespace detail {

inline bool full_block_support(const PauliString &p, int m) {
  const std::uint64_t support = p.x | p.z, mask = (std::uint64_t{1} << m) - 1;
  for (int j = 0; j * m < p.n_qubits; ++j) {
    if (((support >> (j * m)) & mask) == 0) return false;
  }
  return true;
}

inline std::vector<BlockMomentTerm> pauli_block_terms(const PauliString &p, int m) {
  std::vector<BlockMomentTerm> blocks;
  for (int j = 0; j * m < p.n_qubits; ++j) {
    PauliString local;
    local.n_qubits = m;
    for (int t = 0; t < m; ++t) local.set(t, p.letter(j * m + t));
    const Mat lm = to_dense(local);
    blocks.push_back({block_qubits(m, j), lm, lm});
  }
  return blocks;
}

}  // namespace detail

/// Gradients of the encoded loss at theta_0 for every sampled encoder, for one
/// input state psi and readout. Encoder i is drawn from Rng(seed).split(i).
inline GradStatsRecord grad_stats_for_state(int n, const GradStatsConfig &cfg, const Readout &readout,
                                            const Vec &psi) {
  detail::require(psi.size() == (Eigen::Index{1} << n), "input state size mismatch");
  const ParamCircuit adv = build_adversarial_circuit(n, cfg.adversary_layers);
  const Vec hpsi = readout.apply(psi);
  const double p = psi.dot(hpsi).real();
  const double scale = readout.loss ? loss_derivative(*readout.loss, p) : 1.0;

  GradStatsRecord rec;
  rec.n = n;
  rec.encoder = to_string(cfg.encoder);
  rec.classifier = readout.name;
  rec.loss = readout.loss ? to_string(*readout.loss) : "expectation";
  rec.input = cfg.input;
  rec.samples = cfg.samples;
  for (int l = 0; l < adv.param_count(); ++l) {
    if (cfg.theorem_scope && cfg.encoder == CodebookKind::BlockHaar &&
        !detail::full_block_support(adv.effective_generator_at_zero(l), cfg.block_size)) {
      continue;
    }
    rec.params.push_back(l);
  }
  detail::require(!rec.params.empty(), "no adversarial parameter satisfies the theorem scope");
  const std::size_t np = rec.params.size();
  const auto ns = static_cast<std::size_t>(cfg.samples);

  // [psi, H psi] = Q R for the global Haar frame shortcut: E psi = W r1, E H psi = W r2.
  Mat basis(psi.size(), 2);
  basis << psi, hpsi;
  Eigen::HouseholderQR<Mat> qr(basis);
  const Mat rr = qr.matrixQR().topRows(2).triangularView<Eigen::Upper>();

  const Codebook book{cfg.encoder, n, cfg.block_size, cfg.encoder_depth, cfg.seed};
  const std::vector<double> zeros(static_cast<std::size_t>(adv.param_count()), 0.0);
  std::vector<double> g(ns * np);
  parallel_for(ns, [&](std::size_t i) {
    Vec phi, lambda;
    if (cfg.encoder == CodebookKind::GlobalHaar) {
      Rng rng = Rng(cfg.seed).split(i);
      const Mat w = sample_haar_frame(static_cast<std::size_t>(psi.size()), 2, rng);
      const Mat wr = w * rr;
      phi = wr.col(0);
      lambda = wr.col(1);
    } else {
      const Encoder e = book.sample(i);
      phi = psi;
      lambda = hpsi;
      apply_encoder(e, phi);
      apply_encoder(e, lambda);
    }
    const auto grad = adjoint_sweep(adv, zeros, std::move(phi), std::move(lambda));
    for (std::size_t k = 0; k < np; ++k) g[i * np + k] = scale * grad[static_cast<std::size_t>(rec.params[k])];
  });

  const double nd = static_cast<double>(ns);
  rec.param_mean.assign(np, 0.0);
  rec.param_variance.assign(np, 0.0);
  rec.param_mean_stderr.assign(np, 0.0);
  for (std::size_t i = 0; i < ns; ++i) {
    for (std::size_t k = 0; k < np; ++k) rec.param_mean[k] += g[i * np + k];
  }
  for (auto &m : rec.param_mean) m /= nd;
  std::vector<double> q(ns, 0.0), r(ns, 0.0);
  for (std::size_t i = 0; i < ns; ++i) {
    for (std::size_t k = 0; k < np; ++k) {
      const double dev = g[i * np + k] - rec.param_mean[k];
      rec.param_variance[k] += dev * dev;
      q[i] += dev * dev;
      r[i] += g[i * np + k];
    }
    q[i] /= static_cast<double>(np);
    r[i] /= static_cast<double>(np);
  }
  for (std::size_t k = 0; k < np; ++k) {
    rec.param_variance[k] /= nd - 1;
    rec.param_mean_stderr[k] = std::sqrt(rec.param_variance[k] / nd);
    rec.mean_abs += std::abs(rec.param_mean[k]) / static_cast<double>(np);
    rec.variance += rec.param_variance[k] / static_cast<double>(np);
  }
  auto mean_and_stderr = [&](const std::vector<double> &x) {
    double s = 0.0, s2 = 0.0;
    for (double v : x) s += v;
    const double mu = s / nd;
    for (double v : x) s2 += (v - mu) * (v - mu);
    return std::pair{mu, std::sqrt(s2 / (nd - 1) / nd)};
  };
  std::tie(rec.mean, rec.mean_stderr) = mean_and_stderr(r);
  rec.variance_stderr = mean_and_stderr(q).second * nd / (nd - 1);

  // Every effective generator is a non-identity Pauli string: Tr A = 0, Tr A^2 = d.
  const double d = static_cast<double>(psi.size());
  const auto t1 = thm1_variance_pure(psi, hpsi, 0.0, d);
  rec.thm1_exact = scale * scale * t1.exact;
  rec.thm1_bound = scale * scale * t1.bound;
  if (cfg.encoder == CodebookKind::BlockHaar) {
    const int xi = n / cfg.block_size;
    rec.c0 = c0_terms(psi, hpsi, cfg.block_size, xi).c0;
    rec.thm2_bound = scale * scale * thm2_variance_bound(cfg.block_size, xi, 1.0, rec.c0);
    if (n <= cfg.exact_block_max_n) {
      Mat h(psi.size(), psi.size());
      for (Eigen::Index j = 0; j < psi.size(); ++j) h.col(j) = readout.apply(Vec::Unit(psi.size(), j));
      std::vector<std::pair<std::string, double>> cache;
      double acc = 0.0;
      for (int l : rec.params) {
        const PauliString a = adv.effective_generator_at_zero(l);
        const std::string key = a.str();
        auto it = std::find_if(cache.begin(), cache.end(), [&](const auto &c) { return c.first == key; });
        if (it == cache.end()) {
          const auto blocks = detail::pauli_block_terms(a, cfg.block_size);
          cache.emplace_back(key, exact_gradient_variance(
                                      psi, h, [&](const Mat &x) { return block_second_moment(blocks, x); }));
          it = cache.end() - 1;
        }
        acc += it->second;
      }
      rec.block_exact = scale * scale * acc / static_cast<double>(rec.params.size());
    }
  }
  return rec;
}

/// Input state and label for size n: a cluster-Ising ground state at
/// cfg.lambda, or a Haar-random state when requested or n < 3.
inline std::pair<Vec, int> grad_stats_input(int n, const GradStatsConfig &cfg) {
  if (cfg.input == "ground" && n >= 3) {
    const auto gs = ground_state({n, cfg.lambda}, 1e-10, cfg.seed);
    return {gs.state.amps(), phase_label(cfg.lambda)};
  }
  Rng rng = Rng(cfg.seed).split(0x1A9u + static_cast<std::uint64_t>(n));
  Vec v(Eigen::Index{1} << n);
  for (auto &a : v) a = cplx(rng.normal(), rng.normal());
  return {v.normalized(), 0};
}

inline Readout grad_stats_readout(int n, int label, const GradStatsConfig &cfg) {
  if (cfg.classifier == "none") return z0_readout();
  const auto model = make_classifier(n, cfg.classifier_layers, cfg.seed + static_cast<std::uint64_t>(n), cfg.loss);
  return classifier_readout(model, label, cfg.loss, "random");
}

inline std::vector<GradStatsRecord> grad_stats_experiment(const GradStatsConfig &cfg) {
  cfg.validate();
  std::vector<GradStatsRecord> out;
  for (int n : cfg.n_values) {
    const auto [psi, label] = grad_stats_input(n, cfg);
    GradStatsConfig c = cfg;
    c.seed = Rng(cfg.seed).split(static_cast<std::uint64_t>(n))();
    auto rec = grad_stats_for_state(n, c, grad_stats_readout(n, label, cfg), psi);
    if (cfg.input == "ground" && n < 3) rec.input = "random";
    out.push_back(std::move(rec));
  }
  return out;
}

/// Least-squares slope of log2(y) against x.
inline double log2_slope(const std::vector<double> &x, const std::vector<double> &y) {
  detail::require(x.size() == y.size() && x.size() >= 2, "need at least two points");
  const double k = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    detail::require(y[i] > 0, "log2_slope needs positive values");
    const double ly = std::log2(y[i]);
    sx += x[i];
    sy += ly;
    sxx += x[i] * x[i];
    sxy += x[i] * ly;
  }
  return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

// ---------------------------------------------------------------------------
// Product inputs g = (x)_i g^i applied to |0...0>

struct ProductStateSpec {
  std::vector<Mat2> factors;  // factors[i] acts on qubit i

  int n_qubits() const { return static_cast<int>(factors.size()); }

  void validate() const {
    for (const auto &f : factors) {
      if ((f.adjoint() * f - Mat2::Identity()).norm() > 1e-10) throw std::invalid_argument("factor is not unitary");
    }
  }

  Vec state() const {
    Vec v(Eigen::Index{1} << factors.size());
    v.setZero();
    v[0] = 1.0;
    for (std::size_t q = 0; q < factors.size(); ++q) kernel::apply_1q(v, static_cast<int>(q), factors[q]);
    return v;
  }
};

inline Mat2 haar_su2(Rng &rng) { return Mat2(sample_haar_unitary(2, rng)); }

inline ProductStateSpec sample_product_spec(int n, Rng &rng) {
  detail::require(n >= 1, "product state needs at least one qubit");
  ProductStateSpec s;
  for (int q = 0; q < n; ++q) s.factors.push_back(haar_su2(rng));
  return s;
}

/// Distance between single-qubit factors up to a global phase.
inline double factor_distance(const Mat2 &a, const Mat2 &b) {
  const cplx ov = (b.adjoint() * a).trace();
  const cplx phase = std::abs(ov) > 0 ? ov / std::abs(ov) : cplx(1.0);
  return (a - phase * b).norm();
}

/// Fraction of qubits whose factors differ (Frobenius distance > 1e-9 after
/// phase alignment).
inline double hamming_distance(const ProductStateSpec &a, const ProductStateSpec &b) {
  if (a.factors.size() != b.factors.size()) throw std::invalid_argument("product specs differ in length");
  if (a.factors.empty()) return 0.0;
  int diff = 0;
  for (std::size_t i = 0; i < a.factors.size(); ++i) diff += factor_distance(a.factors[i], b.factors[i]) > 1e-9;
  return static_cast<double>(diff) / static_cast<double>(a.factors.size());
}

/// Six single-qubit unitaries preparing the Pauli eigenstates
/// |0>, |1>, |+>, |->, |+i>, |-i> from |0>.
inline const std::vector<Mat2> &stabilizer_alphabet() {
  static const std::vector<Mat2> alphabet = [] {
    const Mat2 i = Mat2::Identity(), x = gates::x_matrix(), h = gates::h_matrix();
    Mat2 s = Mat2::Identity();
    s(1, 1) = cplx(0, 1);
    return std::vector<Mat2>{i, x, h, h * x, s * h, s * h * x};
  }();
  return alphabet;
}

// ---------------------------------------------------------------------------
// Local-unitary attacks and adversarial risk

enum class LocalStrategy { Random, Greedy };

inline LocalStrategy parse_local_strategy(const std::string &s) {
  if (s == "random") return LocalStrategy::Random;
  if (s == "greedy") return LocalStrategy::Greedy;
  throw ConfigError("unknown local attack strategy '" + s + "' (expected random or greedy)");
}

inline int replacement_budget(int n, double tau) {
  return static_cast<int>(std::floor(tau * n + 1e-12));
}

/// Replaces at most floor(tau n) factors. Random resamples that many distinct
/// qubits; greedy replaces one qubit per round with the candidate that most
/// increases `score`, stopping when no candidate helps.
inline ProductStateSpec local_unitary_attack(const ProductStateSpec &spec,
                                             const std::function<double(const ProductStateSpec &)> &score,
                                             double tau, LocalStrategy strategy, Rng &rng, int candidates = 16) {
  const int n = spec.n_qubits();
  const int k = replacement_budget(n, tau);
  detail::require(k >= 1, "tau * n must allow at least one replacement");
  ProductStateSpec out = spec;
  if (strategy == LocalStrategy::Random) {
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int q = 0; q < n; ++q) order[static_cast<std::size_t>(q)] = q;
    for (int i = 0; i < k; ++i) {
      const auto j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - i)));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
      out.factors[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = haar_su2(rng);
    }
    return out;
  }
  std::vector<Mat2> pool = stabilizer_alphabet();
  for (int c = 0; c < candidates; ++c) pool.push_back(haar_su2(rng));
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  double best = score(out);
  for (int round = 0; round < k; ++round) {
    int best_q = -1;
    Mat2 best_u;
    for (int q = 0; q < n; ++q) {
      if (used[static_cast<std::size_t>(q)]) continue;
      ProductStateSpec trial = out;
      for (const auto &u : pool) {
        trial.factors[static_cast<std::size_t>(q)] = u;
        const double s = score(trial);
        if (s > best) {
          best = s;
          best_q = q;
          best_u = u;
        }
      }
    }
    if (best_q < 0) break;
    out.factors[static_cast<std::size_t>(best_q)] = best_u;
    used[static_cast<std::size_t>(best_q)] = true;
  }
  return out;
}

/// Loss of the classifier on a product input, measured against the label the
/// classifier assigns to `reference`.
inline std::function<double(const ProductStateSpec &)> loss_score(const ClassifierModel &m,
                                                                  const ProductStateSpec &reference) {
  const int label = predict_from_probs(class_probs(m, reference.state()));
  return [&m, label](const ProductStateSpec &s) { return sample_loss(m, s.state(), label, m.loss); };
}

struct Proportion {
  double value = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  long trials = 0;

  double standard_error() const {
    return trials > 0 ? std::sqrt(value * (1 - value) / static_cast<double>(trials)) : 0.0;
  }
};

/// Wilson score interval at z = 1.96.
inline Proportion wilson_interval(long successes, long trials, double z = 1.959963984540054) {
  detail::require(trials > 0 && successes >= 0 && successes <= trials, "invalid proportion counts");
  const double nt = static_cast<double>(trials), p = static_cast<double>(successes) / nt;
  const double denom = 1 + z * z / nt;
  const double centre = (p + z * z / (2 * nt)) / denom;
  const double half = z * std::sqrt(p * (1 - p) / nt + z * z / (4 * nt * nt)) / denom;
  const double lo = successes == 0 ? 0.0 : std::max(0.0, centre - half);
  const double hi = successes == trials ? 1.0 : std::min(1.0, centre + half);
  return {p, lo, hi, trials};
}

using LabelFn = std::function<int(const Vec &)>;
using ProductAttack = std::function<ProductStateSpec(const ProductStateSpec &, Rng &)>;

/// Fraction of Haar-product inputs whose label changes under `attack`. Trial i
/// uses rng.split(i) for both the input and the attack.
inline Proportion adversarial_risk_estimate(int n, const LabelFn &label, const ProductAttack &attack, long trials,
                                            const Rng &rng) {
  detail::require(trials >= 1, "risk estimate needs at least one trial");
  std::vector<char> changed(static_cast<std::size_t>(trials));
  parallel_for(changed.size(), [&](std::size_t i) {
    Rng r = rng.split(i);
    const auto spec = sample_product_spec(n, r);
    const auto attacked = attack(spec, r);
    changed[i] = label(spec.state()) != label(attacked.state());
  });
  long k = 0;
  for (char c : changed) k += c;
  return wilson_interval(k, trials);
}

inline LabelFn classifier_label(const ClassifierModel &m) {
  return [&m](const Vec &v) { return predict_from_probs(class_probs(m, v)); };
}

/// sqrt((1/n) min_{k=2..K} ln[4k / (mu_k (1 - R))]) for class measures sorted
/// in descending order.
inline double thm3_threshold(int n, const std::vector<double> &measures, double risk) {
  detail::require(n >= 1, "n must be positive");
  detail::require(measures.size() >= 2, "need at least two classes");
  detail::require(risk > 0 && risk < 1, "risk must be in (0, 1)");
  double total = 0.0;
  for (std::size_t k = 0; k < measures.size(); ++k) {
    detail::require(measures[k] > 0, "class measure must be positive");
    if (k > 0) detail::require(measures[k] <= measures[k - 1], "class measures must be sorted descending");
    total += measures[k];
  }
  detail::require(std::abs(total - 1.0) < 1e-9, "class measures must sum to 1");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 2; k <= measures.size(); ++k) {
    best = std::min(best, std::log(4.0 * static_cast<double>(k) / (measures[k - 1] * (1 - risk))));
  }
  return std::sqrt(best / n);
}

// ---------------------------------------------------------------------------
// Concentration probe

/// Set {spec : score(spec) >= threshold}; the score guides the extension search.
struct SetPredicate {
  std::string name;
  std::function<double(const ProductStateSpec &)> score;
  double threshold = 0.0;

  bool contains(const ProductStateSpec &s) const { return score(s) >= threshold - 1e-12; }
};

/// Mean over qubits of |<0|g^i|0>|^2. Under the Haar product measure its
/// median is 1/2 by the symmetry f -> 1 - f.
inline SetPredicate mean_fidelity_predicate() {
  return {"mean-fidelity",
          [](const ProductStateSpec &s) {
            double acc = 0.0;
            for (const auto &f : s.factors) acc += std::norm(f(0, 0));
            return acc / static_cast<double>(s.factors.size());
          },
          0.5};
}

/// First-qubit fidelity |<0|g^0|0>|^2 >= 1/2, its median.
inline SetPredicate first_qubit_predicate() {
  return {"first-qubit", [](const ProductStateSpec &s) { return std::norm(s.factors.at(0)(0, 0)); }, 0.5};
}

struct ConcentrationReport {
  Proportion set_measure;
  Proportion extension_measure;  // lower estimate: the search is heuristic
  double levy_bound = 0.0;       // 1 - 2 exp(-tau^2 n), valid when mu(set) >= 1/2
  double lemma_bound = 0.0;      // R solving tau^2 = (1/n) ln(4 / (mu (1 - R))), clamped at 0
  int replacements = 0;
};

inline double lemma_extension_bound(int n, double tau, double mu) {
  if (mu <= 0) return 0.0;
  return std::max(0.0, 1.0 - 4.0 / (mu * std::exp(tau * tau * n)));
}

/// Greedy search for a point of the set within `k` replacements, with random
/// restarts over the qubit order. Candidates are the stabilizer alphabet plus
/// `candidates` Haar draws per restart.
inline bool reaches_set(const ProductStateSpec &spec, const SetPredicate &pred, int k, Rng &rng, int restarts,
                        int candidates, bool alphabet_only = false) {
  if (pred.contains(spec)) return true;
  for (int r = 0; r < restarts; ++r) {
    std::vector<Mat2> pool = stabilizer_alphabet();
    if (!alphabet_only) {
      for (int c = 0; c < candidates; ++c) pool.push_back(haar_su2(rng));
    }
    ProductStateSpec cur = spec;
    std::vector<bool> used(spec.factors.size(), false);
    for (int round = 0; round < k; ++round) {
      double best = -std::numeric_limits<double>::infinity();
      int best_q = -1;
      Mat2 best_u;
      const int n = spec.n_qubits();
      const int offset = r == 0 ? 0 : static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
      for (int t = 0; t < n; ++t) {
        const int q = (t + offset) % n;
        if (used[static_cast<std::size_t>(q)]) continue;
        ProductStateSpec trial = cur;
        for (const auto &u : pool) {
          trial.factors[static_cast<std::size_t>(q)] = u;
          const double s = pred.score(trial);
          if (s > best) {
            best = s;
            best_q = q;
            best_u = u;
          }
        }
      }
      if (best_q < 0) break;
      cur.factors[static_cast<std::size_t>(best_q)] = best_u;
      used[static_cast<std::size_t>(best_q)] = true;
      if (pred.contains(cur)) return true;
    }
  }
  return false;
}

inline ConcentrationReport concentration_probe(int n, const SetPredicate &pred, double tau, long samples,
                                               const Rng &rng, int restarts = 4, int candidates = 8) {
  detail::require(samples >= 1, "probe needs at least one sample");
  detail::require(tau >= 0 && tau <= 1, "tau must be in [0, 1]");
  const int k = replacement_budget(n, tau);
  std::vector<char> in_set(static_cast<std::size_t>(samples)), in_ext(static_cast<std::size_t>(samples));
  parallel_for(in_set.size(), [&](std::size_t i) {
    Rng r = rng.split(i);
    const auto spec = sample_product_spec(n, r);
    in_set[i] = pred.contains(spec);
    in_ext[i] = in_set[i] || (k >= 1 && reaches_set(spec, pred, k, r, restarts, candidates));
  });
  long a = 0, b = 0;
  for (std::size_t i = 0; i < in_set.size(); ++i) {
    a += in_set[i];
    b += in_ext[i];
  }
  ConcentrationReport rep;
  rep.set_measure = wilson_interval(a, samples);
  rep.extension_measure = wilson_interval(b, samples);
  rep.levy_bound = 1.0 - 2.0 * std::exp(-tau * tau * n);
  rep.lemma_bound = lemma_extension_bound(n, tau, rep.set_measure.value);
  rep.replacements = k;
  return rep;
}

struct DiscreteConcentration {
  double set_measure = 0.0;
  double extension_measure = 0.0;
  int replacements = 0;
};

/// Exact set and extension measures on the discretized space alphabet^n with
/// the uniform measure. Multi-source BFS over Hamming moves from the set.
inline DiscreteConcentration exhaustive_concentration(int n, const SetPredicate &pred, double tau) {
  detail::require(n >= 1 && n <= 6, "exhaustive oracle is limited to n <= 6");
  const auto &alpha = stabilizer_alphabet();
  const std::size_t a = alpha.size();
  std::size_t total = 1;
  for (int q = 0; q < n; ++q) total *= a;
  const int k = replacement_budget(n, tau);
  auto decode = [&](std::size_t code) {
    ProductStateSpec s;
    for (int q = 0; q < n; ++q) {
      s.factors.push_back(alpha[code % a]);
      code /= a;
    }
    return s;
  };
  std::vector<int> dist(total, -1);
  std::vector<std::size_t> frontier;
  for (std::size_t c = 0; c < total; ++c) {
    if (pred.contains(decode(c))) {
      dist[c] = 0;
      frontier.push_back(c);
    }
  }
  const std::size_t in_set = frontier.size();
  for (int level = 1; level <= k && !frontier.empty(); ++level) {
    std::vector<std::size_t> next;
    for (std::size_t c : frontier) {
      std::size_t stride = 1;
      for (int q = 0; q < n; ++q, stride *= a) {
        const std::size_t digit = (c / stride) % a;
        for (std::size_t v = 0; v < a; ++v) {
          const std::size_t nb = c + (v - digit) * stride;
          if (v != digit && dist[nb] < 0) {
            dist[nb] = level;
            next.push_back(nb);
          }
        }
      }
    }
    frontier = std::move(next);
  }
  std::size_t reached = 0;
  for (int dv : dist) reached += dv >= 0;
  return {static_cast<double>(in_set) / static_cast<double>(total),
          static_cast<double>(reached) / static_cast<double>(total), k};
}

/// Greedy extension search restricted to the alphabet, evaluated on every
/// point of alphabet^n; compared against exhaustive_concentration.
inline double greedy_discrete_extension(int n, const SetPredicate &pred, double tau, int restarts = 4) {
  detail::require(n >= 1 && n <= 6, "discrete greedy check is limited to n <= 6");
  const auto &alpha = stabilizer_alphabet();
  std::size_t total = 1;
  for (int q = 0; q < n; ++q) total *= alpha.size();
  const int k = replacement_budget(n, tau);
  std::vector<char> hit(total);
  parallel_for(total, [&](std::size_t c) {
    ProductStateSpec s;
    std::size_t code = c;
    for (int q = 0; q < n; ++q) {
      s.factors.push_back(alpha[code % alpha.size()]);
      code /= alpha.size();
    }
    Rng r = Rng(0xD15C).split(c);
    hit[c] = pred.contains(s) || (k >= 1 && reaches_set(s, pred, k, r, restarts, 0, true));
  });
  std::size_t reached = 0;
  for (char h : hit) reached += h;
  return static_cast<double>(reached) / static_cast<double>(total);
}

}  // namespace qre
