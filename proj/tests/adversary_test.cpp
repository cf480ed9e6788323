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

#include "qre/adversary.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace {

using namespace qre;

Vec random_vector(int d, Rng &rng) {
  Vec v(d);
  for (auto &a : v) a = cplx(rng.normal(), rng.normal());
  return v.normalized();
}

EncodedLossContext make_context(const ClassifierModel &m, Encoder e, const Vec &psi, int label, int layers = 2) {
  EncodedLossContext ctx;
  ctx.model = &m;
  ctx.adversary = build_adversarial_circuit(m.n_data, layers);
  ctx.encoder = std::move(e);
  ctx.psi = psi;
  ctx.label = label;
  ctx.loss = m.loss;
  return ctx;
}

TEST(GradientAttack, ZeroStepsReturnsCleanLoss) {
  const auto m = make_classifier(3, 2, 4);
  Rng rng(90);
  const Vec psi = random_vector(8, rng);
  AttackConfig cfg;
  cfg.steps = 0;
  const auto r = gradient_attack(make_context(m, IdentityEncoder{}, psi, 0), cfg);
  ASSERT_EQ(r.loss_trace.size(), 1u);
  EXPECT_NEAR(r.loss_trace[0], sample_loss(m, psi, 0, m.loss), 1e-12);
  for (double t : r.theta) EXPECT_EQ(t, 0.0);
  EXPECT_FALSE(r.flipped());
}

TEST(GradientAttack, TraceIsMonotoneAndStaysInBall) {
  const auto m = make_classifier(3, 2, 5, LossKind::NormalizedSquare);
  Rng rng(91);
  AttackConfig cfg;
  cfg.steps = 30;
  cfg.step_size = 0.5;
  cfg.budget = 0.7;
  for (int trial = 0; trial < 5; ++trial) {
    const Vec psi = random_vector(8, rng);
    const auto r = gradient_attack(make_context(m, IdentityEncoder{}, psi, trial % 2), cfg);
    ASSERT_EQ(r.loss_trace.size(), 31u);
    for (std::size_t i = 1; i < r.loss_trace.size(); ++i) EXPECT_GE(r.loss_trace[i], r.loss_trace[i - 1]);
    EXPECT_GT(r.loss_trace.back(), r.loss_trace.front());
    double s = 0;
    for (double t : r.theta) s += t * t;
    EXPECT_LE(std::sqrt(s), cfg.budget + 1e-12);
    EXPECT_GT(r.first_grad_inf_norm, 0.0);
  }
}

TEST(GradientAttack, RejectsBadConfig) {
  AttackConfig cfg;
  cfg.budget = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.steps = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(ProjectToBall, ScalesOnlyOutside) {
  std::vector<double> a{0.3, 0.4};
  project_to_ball(a, 1.0);
  EXPECT_DOUBLE_EQ(a[0], 0.3);
  std::vector<double> b{3.0, 4.0};
  project_to_ball(b, 1.0);
  EXPECT_NEAR(b[0], 0.6, 1e-15);
  EXPECT_NEAR(b[1], 0.8, 1e-15);
}

GradStatsConfig small_config(CodebookKind kind, long samples) {
  GradStatsConfig c;
  c.encoder = kind;
  c.samples = samples;
  c.adversary_layers = 1;
  c.seed = 7;
  return c;
}

TEST(GradStats, GlobalHaarMatchesExactVariance) {
  Rng rng(92);
  for (int n : {2, 4}) {
    for (const char *cls : {"none", "random"}) {
      auto cfg = small_config(CodebookKind::GlobalHaar, 4000);
      cfg.classifier = cls;
      const Vec psi = random_vector(1 << n, rng);
      const auto rec = grad_stats_for_state(n, cfg, grad_stats_readout(n, 0, cfg), psi);
      EXPECT_EQ(rec.params.size(), static_cast<std::size_t>(4 * n));
      EXPECT_NEAR(rec.variance, rec.thm1_exact, 3 * rec.variance_stderr) << n << cls;
      EXPECT_LE(rec.thm1_exact, rec.thm1_bound);
      for (std::size_t k = 0; k < rec.params.size(); ++k) {
        EXPECT_LE(std::abs(rec.param_mean[k]), 4.5 * rec.param_mean_stderr[k]) << n << cls << k;
      }
    }
  }
}

TEST(GradStats, FrameShortcutAgreesWithDenseEncoders) {
  // Same statistic from full Haar unitaries through the generic path.
  const int n = 3;
  Rng rng(93);
  const Vec psi = random_vector(8, rng);
  auto cfg = small_config(CodebookKind::GlobalHaar, 6000);
  const auto fast = grad_stats_for_state(n, cfg, z0_readout(), psi);
  const ParamCircuit adv = build_adversarial_circuit(n, 1);
  const Vec hpsi = z0_readout().apply(psi);
  const std::vector<double> zeros(adv.param_count(), 0.0);
  const long samples = 6000;
  double acc = 0, acc2 = 0;
  Rng srng(94);
  for (long i = 0; i < samples; ++i) {
    const Mat e = sample_haar_unitary(8, srng);
    const auto g = adjoint_sweep(adv, zeros, e * psi, e * hpsi);
    double q = 0;
    for (double x : g) q += x * x;
    q /= static_cast<double>(g.size());
    acc += q;
    acc2 += q * q;
  }
  const double mean = acc / samples, se = std::sqrt((acc2 / samples - mean * mean) / samples);
  EXPECT_NEAR(fast.variance, mean, 3 * std::hypot(se, fast.variance_stderr));
}

TEST(GradStats, BlockHaarTheoremScope) {
  Rng rng(95);
  const int n = 4;
  const Vec psi = random_vector(16, rng);
  auto cfg = small_config(CodebookKind::BlockHaar, 4000);
  cfg.theorem_scope = true;
  const auto rec = grad_stats_for_state(n, cfg, z0_readout(), psi);
  ASSERT_FALSE(rec.params.empty());
  EXPECT_LT(rec.params.size(), static_cast<std::size_t>(4 * n));
  const ParamCircuit adv = build_adversarial_circuit(n, 1);
  for (int l : rec.params) EXPECT_TRUE(detail::full_block_support(adv.effective_generator_at_zero(l), 2));
  EXPECT_NEAR(rec.variance, rec.block_exact, 3 * rec.variance_stderr);
  EXPECT_LE(rec.block_exact, rec.thm2_bound + 1e-12);
  EXPECT_GT(rec.c0, 0.0);
}

TEST(GradStats, PvqcEncoderAndExperimentDriver) {
  GradStatsConfig cfg = small_config(CodebookKind::Pvqc, 200);
  cfg.n_values = {2, 3};
  cfg.classifier = "random";
  cfg.classifier_layers = 2;
  const auto recs = grad_stats_experiment(cfg);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].input, "random");
  EXPECT_EQ(recs[1].input, "ground");
  EXPECT_EQ(recs[1].loss, "kl");
  for (const auto &r : recs) EXPECT_GT(r.variance, 0.0);
  const auto again = grad_stats_experiment(cfg);
  EXPECT_EQ(again[1].variance, recs[1].variance);
}

TEST(GradStats, ConfigValidation) {
  GradStatsConfig cfg;
  cfg.classifier = "trained";
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.encoder = CodebookKind::BlockHaar;
  cfg.n_values = {5};
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Log2Slope, RecoversExponent) {
  std::vector<double> x{4, 6, 8, 10}, y;
  for (double v : x) y.push_back(3.0 * std::pow(2.0, -0.8 * v));
  EXPECT_NEAR(log2_slope(x, y), -0.8, 1e-12);
}

TEST(ProductState, HammingDistance) {
  Rng rng(96);
  const auto a = sample_product_spec(4, rng);
  auto b = a;
  EXPECT_EQ(hamming_distance(a, b), 0.0);
  b.factors[0] *= cplx(0, 1);  // global phase only
  EXPECT_EQ(hamming_distance(a, b), 0.0);
  b.factors[1] = haar_su2(rng);
  b.factors[3] = haar_su2(rng);
  EXPECT_DOUBLE_EQ(hamming_distance(a, b), 0.5);
  EXPECT_DOUBLE_EQ(hamming_distance(a, sample_product_spec(4, rng)), 1.0);
  EXPECT_THROW(hamming_distance(a, sample_product_spec(3, rng)), std::invalid_argument);
  const Vec s = a.state();
  EXPECT_NEAR(s.norm(), 1.0, 1e-12);
  EXPECT_NEAR(std::norm(s[0]), std::norm(a.factors[0](0, 0) * a.factors[1](0, 0) * a.factors[2](0, 0) * a.factors[3](0, 0)),
              1e-12);
}

TEST(ProductState, StabilizerAlphabetPreparesPauliEigenstates) {
  const auto &al = stabilizer_alphabet();
  ASSERT_EQ(al.size(), 6u);
  const std::vector<PauliString> axes{PauliString::parse("Z"), PauliString::parse("-Z"), PauliString::parse("X"),
                                      PauliString::parse("-X"), PauliString::parse("Y"), PauliString::parse("-Y")};
  for (std::size_t i = 0; i < 6; ++i) {
    const Vec v = al[i].col(0);
    EXPECT_NEAR(v.dot(to_dense(axes[i]) * v).real(), 1.0, 1e-12) << i;
    EXPECT_LT(unitarity_deficit(Mat(al[i])), 1e-12);
  }
}

TEST(LocalAttack, RandomReplacesExactlyFloorTauN) {
  Rng rng(97);
  const auto m = make_classifier(4, 2, 3);
  const auto spec = sample_product_spec(4, rng);
  const auto out = local_unitary_attack(spec, loss_score(m, spec), 0.25, LocalStrategy::Random, rng);
  EXPECT_DOUBLE_EQ(hamming_distance(spec, out), 0.25);
  const auto out2 = local_unitary_attack(spec, loss_score(m, spec), 0.6, LocalStrategy::Random, rng);
  EXPECT_DOUBLE_EQ(hamming_distance(spec, out2), 0.5);
  EXPECT_NO_THROW(out2.validate());
  EXPECT_THROW(local_unitary_attack(spec, loss_score(m, spec), 0.2, LocalStrategy::Random, rng),
               std::invalid_argument);
  EXPECT_THROW(parse_local_strategy("pgd"), ConfigError);
}

TEST(LocalAttack, GreedyBeatsRandomOnAverage) {
  const auto m = make_classifier(6, 3, 8);
  const double tau = 2.0 / 6.0;
  double greedy = 0, random = 0;
  const int trials = 100;
  for (int t = 0; t < trials; ++t) {
    Rng rng = Rng(98).split(t);
    const auto spec = sample_product_spec(6, rng);
    const auto score = loss_score(m, spec);
    const double base = score(spec);
    const auto g = local_unitary_attack(spec, score, tau, LocalStrategy::Greedy, rng);
    const auto r = local_unitary_attack(spec, score, tau, LocalStrategy::Random, rng);
    EXPECT_LE(hamming_distance(spec, g), tau + 1e-12);
    EXPECT_GE(score(g), base);
    greedy += score(g) - base;
    random += score(r) - base;
  }
  EXPECT_GT(greedy, random);
}

TEST(AdversarialRisk, IdentityAttackIsZero) {
  const auto m = make_classifier(4, 2, 9);
  const auto risk = adversarial_risk_estimate(
      4, classifier_label(m), [](const ProductStateSpec &s, Rng &) { return s; }, 200, Rng(99));
  EXPECT_EQ(risk.value, 0.0);
  EXPECT_EQ(risk.lo, 0.0);
}

TEST(AdversarialRisk, ConstantClassifierIsZero) {
  const auto risk = adversarial_risk_estimate(
      4, [](const Vec &) { return 1; },
      [](const ProductStateSpec &s, Rng &r) { return sample_product_spec(s.n_qubits(), r); }, 200, Rng(100));
  EXPECT_EQ(risk.value, 0.0);
}

TEST(AdversarialRisk, FullReplacementMatchesIndependentDisagreement) {
  const auto m = make_classifier(4, 2, 11);
  const auto label = classifier_label(m);
  const long trials = 4000;
  const auto risk = adversarial_risk_estimate(
      4, label, [](const ProductStateSpec &s, Rng &r) { return sample_product_spec(s.n_qubits(), r); }, trials,
      Rng(101));
  long ones = 0;
  Rng rng(102);
  for (long i = 0; i < trials; ++i) ones += label(sample_product_spec(4, rng).state());
  const double q = static_cast<double>(ones) / trials, expected = 2 * q * (1 - q);
  EXPECT_GT(expected, 0.05);
  EXPECT_NEAR(risk.value, expected, 3 * std::hypot(risk.standard_error(), 2 * std::abs(1 - 2 * q) * std::sqrt(q * (1 - q) / trials)));
}

TEST(Wilson, KnownValues) {
  const auto p = wilson_interval(0, 10);
  EXPECT_NEAR(p.hi, 0.27754, 1e-5);
  EXPECT_EQ(p.lo, 0.0);
  const auto h = wilson_interval(50, 100);
  EXPECT_NEAR(h.lo, 0.40383, 1e-5);
  EXPECT_NEAR(h.hi, 0.59617, 1e-5);
}

TEST(Thm3Threshold, Examples) {
  EXPECT_NEAR(thm3_threshold(100, {0.5, 0.5}, 0.5), std::sqrt(std::log(32.0) / 100), 1e-15);
  EXPECT_NEAR(thm3_threshold(100, {0.5, 0.5}, 0.5), 0.1862, 1e-4);
  EXPECT_LT(thm3_threshold(200, {0.5, 0.5}, 0.5), thm3_threshold(100, {0.5, 0.5}, 0.5));
  EXPECT_GT(thm3_threshold(100, {0.5, 0.5}, 0.99), thm3_threshold(100, {0.5, 0.5}, 0.5));
  // K = 3: min over k = 2, 3 of ln(4k / (mu_k (1 - R))).
  const double t = thm3_threshold(10, {0.5, 0.3, 0.2}, 0.5);
  EXPECT_NEAR(t * t * 10, std::min(std::log(8 / 0.15), std::log(12 / 0.1)), 1e-12);
  EXPECT_THROW(thm3_threshold(10, {1.0, 0.0}, 0.5), std::invalid_argument);
  EXPECT_THROW(thm3_threshold(10, {0.3, 0.7}, 0.5), std::invalid_argument);
  EXPECT_THROW(thm3_threshold(10, {0.5, 0.5}, 1.0), std::invalid_argument);
}

TEST(Concentration, FirstQubitHalfSpace) {
  const auto rep = concentration_probe(6, first_qubit_predicate(), 1.0 / 6, 4000, Rng(103));
  EXPECT_NEAR(rep.set_measure.value, 0.5, 3 * rep.set_measure.standard_error());
  EXPECT_EQ(rep.extension_measure.value, 1.0);
  EXPECT_EQ(rep.replacements, 1);
}

TEST(Concentration, FullReplacementReachesEverything) {
  const auto rep = concentration_probe(5, mean_fidelity_predicate(), 1.0, 200, Rng(104));
  EXPECT_EQ(rep.extension_measure.value, 1.0);
}

TEST(Concentration, MeanFidelityExtensionAboveLevyBound) {
  const auto rep = concentration_probe(10, mean_fidelity_predicate(), 0.3, 2000, Rng(105));
  EXPECT_NEAR(rep.set_measure.value, 0.5, 3 * rep.set_measure.standard_error());
  EXPECT_GE(rep.extension_measure.value, rep.levy_bound - 3 * rep.extension_measure.standard_error());
  EXPECT_GE(rep.extension_measure.value, rep.lemma_bound);
}

TEST(Concentration, ExhaustiveOracle) {
  // n = 1: |0> and the four equatorial states have fidelity >= 1/2.
  const auto one = exhaustive_concentration(1, mean_fidelity_predicate(), 0.0);
  EXPECT_NEAR(one.set_measure, 5.0 / 6.0, 1e-15);
  EXPECT_EQ(one.extension_measure, one.set_measure);
  for (int n : {3, 4, 6}) {
    for (double tau : {1.0 / n, 2.0 / n}) {
      for (const auto &pred : {mean_fidelity_predicate(), first_qubit_predicate()}) {
        const auto ex = exhaustive_concentration(n, pred, tau);
        EXPECT_GE(ex.extension_measure, ex.set_measure);
        EXPECT_NEAR(greedy_discrete_extension(n, pred, tau), ex.extension_measure, 1e-12) << n << pred.name;
      }
    }
  }
  EXPECT_THROW(exhaustive_concentration(7, first_qubit_predicate(), 0.5), std::invalid_argument);
}

}  // namespace
