#include <gtest/gtest.h>

#include <random>

#include "decpf/particle_filter.hpp"
#include "oracles.hpp"

using namespace decpf;

namespace {

EnvModel model_from(const oracle::UpdateInstance& in) {
  AgentDynamics ag;
  ag.num_states = static_cast<int>(in.pi.size());
  for (const auto& K : in.kernels) ag.kernels.emplace_back(K);
  ag.initial = in.pi;
  return EnvModel({ag}, [](std::span<const int>, std::span<const int>) { return 0.0; });
}

ParticleSet with_particles(std::vector<int> p, int num_states, std::uint64_t seed = 1) {
  ParticleSet ps;
  ps.num_states = num_states;
  ps.particles = std::move(p);
  ps.rng.seed(seed);
  return ps;
}

double mean_tv(std::size_t K, int trials, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  double total = 0.0;
  for (int k = 0; k < trials; ++k) {
    const auto in = oracle::random_instance(gen, true);
    const auto model = model_from(in);
    const Prescription g{in.gamma};
    auto ps = init_particles(MarginalBelief(in.pi), K, 0, derive_seed(seed, {std::uint64_t(k)}));
    ps = pf_step(std::move(ps), g, in.a, BlackBox(model));
    const auto want = oracle::bayes_update(in.pi, in.gamma, in.a, in.kernels);
    total += tv_distance(estimate(ps).probs(), want);
  }
  return total / trials;
}

}  // namespace

TEST(InitParticles, PointMasses) {
  const auto a = init_particles(MarginalBelief({1.0, 0.0}), 100, 0, 1);
  EXPECT_EQ(a.particles, std::vector<int>(100, 0));
  const auto b = init_particles(MarginalBelief({0.0, 1.0}), 5, 0, 1);
  EXPECT_EQ(b.particles, std::vector<int>(5, 1));
}

TEST(InitParticles, LawOfLargeNumbers) {
  const auto ps = init_particles(MarginalBelief({0.5, 0.5}), 100000, 0, 9);
  EXPECT_NEAR(estimate(ps)[0], 0.5, 0.01);
}

TEST(InitParticles, RejectsZeroK) {
  EXPECT_THROW(init_particles(MarginalBelief({0.5, 0.5}), 0, 0, 1), std::invalid_argument);
}

TEST(WeightByAction, ConstantPrescriptionUniform) {
  const auto ps = with_particles({0, 1, 1, 0, 1}, 2);
  const auto w = weight_by_action(ps, Prescription{{2, 2}}, 2);
  EXPECT_FALSE(w.degenerate);
  for (double v : w.weights) EXPECT_DOUBLE_EQ(v, 0.2);
}

TEST(WeightByAction, IndicatorNormalization) {
  const auto ps = with_particles({0, 0, 1, 1}, 2);
  const auto w = weight_by_action(ps, Prescription{{1, 2}}, 2);
  EXPECT_FALSE(w.degenerate);
  EXPECT_EQ(w.weights, std::vector<double>({0.0, 0.0, 0.5, 0.5}));
}

TEST(WeightByAction, DegenerateFlag) {
  const auto ps = with_particles({0, 0, 0}, 2);
  const auto w = weight_by_action(ps, Prescription{{1, 2}}, 2);
  EXPECT_TRUE(w.degenerate);
  for (double v : w.weights) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(Resample, AllWeightOnOneParticle) {
  auto ps = with_particles({0, 1, 2, 0, 1}, 3);
  WeightVector w{{0, 0, 1, 0, 0}, false};
  ps = resample_multinomial(std::move(ps), w);
  EXPECT_EQ(ps.particles, std::vector<int>(5, 2));
}

TEST(Resample, ZeroWeightExcluded) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto ps = with_particles({0, 0, 1, 1}, 2, seed);
    ps = resample_multinomial(std::move(ps), WeightVector{{0, 0, 0.5, 0.5}, false});
    EXPECT_EQ(ps.particles, std::vector<int>(4, 1));
  }
}

TEST(Resample, ManyZeroWeightsExcluded) {
  std::vector<int> p(1000);
  std::vector<double> w(1000, 0.0);
  for (int k = 0; k < 1000; ++k) p[k] = k % 3;
  w[998] = 0.25;  // particle 998 is state 2
  w[13] = 0.75;   // particle 13 is state 1
  auto ps = resample_multinomial(with_particles(p, 3, 4), WeightVector{w, false});
  int ones = 0;
  for (int x : ps.particles) {
    EXPECT_NE(x, 0);
    ones += x == 1;
  }
  EXPECT_NEAR(ones / 1000.0, 0.75, 0.06);
}

TEST(Resample, UniformPreservesEstimate) {
  auto ps = init_particles(MarginalBelief({0.2, 0.3, 0.5}), 100000, 0, 21);
  const auto before = estimate(ps);
  WeightVector w{std::vector<double>(ps.size(), 1.0 / 100000.0), false};
  ps = resample_multinomial(std::move(ps), w);
  EXPECT_EQ(ps.size(), 100000u);
  // multinomial sd per cell <= 0.5/sqrt(K) ~ 0.0016
  EXPECT_LE(tv_distance(before.probs(), estimate(ps).probs()), 0.01);
}

TEST(Resample, MatchesWeightsStatistically) {
  const std::vector<double> w{0.1, 0.2, 0.3, 0.4};
  std::vector<int> counts(4, 0);
  const int reps = 25000;
  auto ps = with_particles({0, 1, 2, 3}, 4, 99);
  for (int r = 0; r < reps; ++r) {
    ps.particles = {0, 1, 2, 3};
    ps = resample_multinomial(std::move(ps), WeightVector{w, false});
    for (int x : ps.particles) ++counts[x];
  }
  double chi2 = 0.0;
  for (int k = 0; k < 4; ++k) {
    const double e = 4.0 * reps * w[k];
    chi2 += (counts[k] - e) * (counts[k] - e) / e;
  }
  EXPECT_LT(chi2, 16.3);  // 0.999 quantile, 3 degrees of freedom
}

TEST(Propagate, IdentityAndDeterministicKernels) {
  AgentDynamics ag{2, {StochasticMatrix::identity(2), StochasticMatrix({{0, 1}, {0, 1}})}, {0.5, 0.5}};
  EnvModel model({ag}, [](std::span<const int>, std::span<const int>) { return 0.0; });
  const BlackBox bb(model);
  auto ps = with_particles({0, 1, 1, 0}, 2);
  ps = propagate(std::move(ps), 0, bb);
  EXPECT_EQ(ps.particles, std::vector<int>({0, 1, 1, 0}));
  ps = propagate(std::move(ps), 1, bb);
  EXPECT_EQ(ps.particles, std::vector<int>(4, 1));
}

TEST(Propagate, FrequencyMatchesKernelRow) {
  AgentDynamics ag{2, {StochasticMatrix({{0.3, 0.7}, {0.3, 0.7}})}, {0.5, 0.5}};
  EnvModel model({ag}, [](std::span<const int>, std::span<const int>) { return 0.0; });
  auto ps = with_particles(std::vector<int>(100000, 0), 2, 6);
  ps = propagate(std::move(ps), 0, BlackBox(model));
  EXPECT_NEAR(estimate(ps)[1], 0.7, 0.01);
}

TEST(Estimate, Counting) {
  EXPECT_EQ(estimate(with_particles({0, 1, 1, 1}, 2)).probs()[1], 0.75);
  const auto pm = estimate(with_particles({2, 2, 2}, 3));
  EXPECT_EQ(pm[2], 1.0);
  EXPECT_EQ(pm[0], 0.0);
}

TEST(PfStep, DeterministicKernelsMatchExactPointMass) {
  SmartGridParams p;
  p.eps1 = p.eps2 = 0.0;
  const auto model = build_smartgrid(p);
  const Prescription g{{kActionZero, kActionOne}};
  auto ps = init_particles(MarginalBelief({0.5, 0.5}), 200, 0, 3);
  ps = pf_step(std::move(ps), g, kActionOne, BlackBox(model));
  const auto exact = exact_update(MarginalBelief({0.5, 0.5}), g, kActionOne, model, 0);
  EXPECT_EQ(estimate(ps).probs()[1], exact[1]);
  EXPECT_EQ(exact[1], 1.0);
}

TEST(PfStep, DegenerateWeightsPropagateOnly) {
  const auto model = build_smartgrid({});
  const Prescription g{{kActionZero, kActionOne}};
  auto a = with_particles(std::vector<int>(50, 0), 2, 8);
  auto b = a;
  a = pf_step(std::move(a), g, kActionOne, BlackBox(model));
  b = propagate(std::move(b), kActionOne, BlackBox(model));
  EXPECT_EQ(a.particles, b.particles);
}

TEST(PfStep, ResampledParticlesAreConsistent) {
  std::mt19937_64 gen(4);
  for (int k = 0; k < 100; ++k) {
    const auto in = oracle::random_instance(gen, true);
    auto ps = init_particles(MarginalBelief(in.pi), 300, 0, k);
    const Prescription g{in.gamma};
    const auto w = weight_by_action(ps, g, in.a);
    if (w.degenerate) continue;
    ps = resample_multinomial(std::move(ps), w);
    for (int x : ps.particles) EXPECT_EQ(g(x), in.a);
    EXPECT_EQ(ps.size(), 300u);
  }
}

TEST(PfStep, TvErrorShrinksWithK) {
  const double e2 = mean_tv(100, 200, 31);
  const double e3 = mean_tv(1000, 200, 31);
  const double e4 = mean_tv(10000, 200, 31);
  EXPECT_LT(e3, e2);
  EXPECT_LT(e4, e3);
  EXPECT_LE(e4, 0.02);
  // Roughly 1/sqrt(K): a tenfold K cuts the error by about sqrt(10).
  EXPECT_GT(e2 / e4, 5.0);
  EXPECT_LT(e2 / e4, 20.0);
}

TEST(PfStep, BitReproducible) {
  const auto model = build_smartgrid({});
  const Prescription g{{kActionZero, kActionOne}};
  auto run = [&] {
    auto ps = init_particles(MarginalBelief({0.5, 0.5}), 500, 0, 77);
    for (int t = 0; t < 10; ++t) ps = pf_step(std::move(ps), g, t % 2 ? kActionOne : kActionZero, BlackBox(model));
    return ps.particles;
  };
  EXPECT_EQ(run(), run());
}

TEST(BankUpdate, SingleAgentMatchesPfStep) {
  SmartGridParams p;
  p.num_agents = 1;
  const auto model = build_smartgrid(p);
  const BlackBox bb(model);
  const Prescription g{{kActionZero, kActionOne}};
  auto a = init_particles(MarginalBelief({0.5, 0.5}), 100, 0, 5);
  std::vector<ParticleSet> bank{a};
  a = pf_step(std::move(a), g, kActionOne, bb);
  const JointPrescription gbar{{g}, 0};
  const std::vector<int> act{kActionOne};
  bank = bank_update(std::move(bank), gbar, act, bb);
  EXPECT_EQ(bank[0].particles, a.particles);
}

TEST(BankUpdate, AgentsIndependent) {
  const auto model = build_smartgrid({});
  const BlackBox bb(model);
  const Prescription g0{{kActionZero, kActionOne}}, g1{{kNullAction, kActionZero}};
  auto s0 = init_particles(MarginalBelief({0.5, 0.5}), 100, 0, 5);
  auto s1 = init_particles(MarginalBelief({0.3, 0.7}), 100, 1, 6);
  std::vector<ParticleSet> bank{s0, s1};
  const JointPrescription gbar{{g0, g1}, 0};
  const std::vector<int> act{kActionOne, kNullAction};
  bank = bank_update(std::move(bank), gbar, act, bb);
  s0 = pf_step(std::move(s0), g0, kActionOne, bb);
  s1 = pf_step(std::move(s1), g1, kNullAction, bb);
  EXPECT_EQ(bank[0].particles, s0.particles);
  EXPECT_EQ(bank[1].particles, s1.particles);
  const auto est = estimate(bank);
  ASSERT_EQ(est.size(), 2u);
}

TEST(BankUpdate, DimensionMismatch) {
  const auto model = build_smartgrid({});
  std::vector<ParticleSet> bank{init_particles(MarginalBelief({0.5, 0.5}), 10, 0, 1)};
  const JointPrescription gbar{{Prescription{{0, 0}}}, 0};
  const std::vector<int> act{0};
  EXPECT_THROW(bank_update(bank, gbar, act, BlackBox(model)), std::invalid_argument);
}
