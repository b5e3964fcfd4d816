#include <gtest/gtest.h>

#include <random>

#include "decpf/belief.hpp"
#include "oracles.hpp"

using namespace decpf;

namespace {

std::vector<std::vector<double>> rows_of(const StochasticMatrix& m) {
  std::vector<std::vector<double>> out;
  for (int x = 0; x < m.size(); ++x) out.emplace_back(m.row(x).begin(), m.row(x).end());
  return out;
}

MarginalBelief update_with(const oracle::UpdateInstance& in) {
  return exact_update(MarginalBelief(in.pi), Prescription{in.gamma}, in.a,
                      [&](int x, int a) { return std::span<const double>(in.kernels[a][x]); });
}

SmartGridParams exact_params() {
  SmartGridParams p;
  p.eps1 = 0.0;
  p.eps2 = 0.0;
  return p;
}

}  // namespace

TEST(MarginalBelief, Validation) {
  EXPECT_THROW(MarginalBelief({0.5, 0.6}), std::invalid_argument);
  EXPECT_THROW(MarginalBelief({1.5, -0.5}), std::invalid_argument);
  EXPECT_THROW(MarginalBelief(std::vector<double>{}), std::invalid_argument);
  EXPECT_NO_THROW(MarginalBelief({0.5, 0.5 + 5e-10}));
  EXPECT_EQ(MarginalBelief::point_mass(3, 2).probs()[2], 1.0);
  EXPECT_DOUBLE_EQ(MarginalBelief::uniform(4)[1], 0.25);
}

TEST(ExactUpdate, InformativeObservation) {
  const auto model = build_smartgrid(exact_params());
  const Prescription g{{kActionZero, kActionOne}};
  const auto out = exact_update(MarginalBelief({0.5, 0.5}), g, kActionOne, model, 0);
  EXPECT_DOUBLE_EQ(out[0], 0.0);
  EXPECT_DOUBLE_EQ(out[1], 1.0);
}

TEST(ExactUpdate, ConstantPrescriptionIdentityKernel) {
  const std::vector<std::vector<double>> I{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  const MarginalBelief pi({0.2, 0.3, 0.5});
  const auto out = exact_update(pi, Prescription{{1, 1, 1}}, 1,
                                [&](int x, int) { return std::span<const double>(I[x]); });
  for (int x = 0; x < 3; ++x) EXPECT_DOUBLE_EQ(out[x], pi[x]);
}

TEST(ExactUpdate, DegenerateBranchPropagates) {
  const auto model = build_smartgrid({});
  const Prescription g{{kActionZero, kActionOne}};
  const auto out = exact_update(MarginalBelief({1.0, 0.0}), g, kActionOne, model, 0);
  const auto row = model.kernel_row(0, 0, kActionOne);
  EXPECT_DOUBLE_EQ(out[0], row[0]);
  EXPECT_DOUBLE_EQ(out[1], row[1]);
}

TEST(ExactUpdate, DustMassCountsAsDegenerate) {
  const auto model = build_smartgrid({});
  const Prescription g{{kActionZero, kActionOne}};
  const auto out = exact_update(MarginalBelief({1.0 - 1e-13, 1e-13}), g, kActionOne, model, 0);
  const double p0 = 1.0 - 1e-13;
  const auto r0 = model.kernel_row(0, 0, kActionOne), r1 = model.kernel_row(0, 1, kActionOne);
  EXPECT_NEAR(out[1], p0 * r0[1] + 1e-13 * r1[1], 1e-15);
}

TEST(ExactUpdate, MatchesBruteForceOnRandomInstances) {
  std::mt19937_64 gen(20181);
  double worst = 0.0;
  for (int k = 0; k < 2000; ++k) {
    const auto in = oracle::random_instance(gen, k % 2 == 0);
    const auto want = oracle::bayes_update(in.pi, in.gamma, in.a, in.kernels);
    const auto got = update_with(in);
    double s = 0.0;
    for (std::size_t y = 0; y < want.size(); ++y) {
      worst = std::max(worst, std::abs(got[y] - want[y]));
      EXPECT_GE(got[y], 0.0);
      s += got[y];
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(ExactUpdate, ConsistentWithRejectionSampling) {
  std::mt19937_64 gen(77);
  const auto in = [&] {
    for (;;) {
      auto c = oracle::random_instance(gen, true);
      if (c.pi.size() == 3) return c;
    }
  }();
  const auto want = update_with(in);
  Rng rng(13);
  std::vector<double> hist(in.pi.size(), 0.0);
  std::size_t accepted = 0;
  std::discrete_distribution<int> prior(in.pi.begin(), in.pi.end());
  std::mt19937_64 g2(5);
  while (accepted < 100000) {
    const int x = prior(g2);
    if (in.gamma[x] != in.a) continue;
    const auto& row = in.kernels[in.a][x];
    std::discrete_distribution<int> next(row.begin(), row.end());
    hist[next(g2)] += 1.0;
    ++accepted;
  }
  for (auto& h : hist) h /= static_cast<double>(accepted);
  EXPECT_LE(tv_distance(hist, want.probs()), 0.02);
}

TEST(JointUpdate, Componentwise) {
  const auto model = build_smartgrid(exact_params());
  const JointBelief pi(2, MarginalBelief({0.5, 0.5}));
  const Prescription g{{kActionZero, kActionOne}};
  const JointPrescription gbar{{g, g}, 0};
  const std::vector<int> a{kActionOne, kActionOne};
  const auto out = joint_update(pi, gbar, a, model);
  for (const auto& m : out) {
    EXPECT_DOUBLE_EQ(m[0], 0.0);
    EXPECT_DOUBLE_EQ(m[1], 1.0);
  }
}

TEST(JointUpdate, IdentityKernelsConstantPrescriptions) {
  AgentDynamics ag{2, {StochasticMatrix::identity(2), StochasticMatrix::identity(2)}, {0.5, 0.5}};
  EnvModel model({ag, ag}, [](std::span<const int>, std::span<const int>) { return 0.0; });
  const JointBelief pi{MarginalBelief({0.3, 0.7}), MarginalBelief({0.9, 0.1})};
  const JointPrescription gbar{{Prescription{{1, 1}}, Prescription{{0, 0}}}, 0};
  const std::vector<int> a{1, 0};
  const auto out = joint_update(pi, gbar, a, model);
  for (int i = 0; i < 2; ++i)
    for (int x = 0; x < 2; ++x) EXPECT_DOUBLE_EQ(out[i][x], pi[i][x]);
}

TEST(JointUpdate, MixedBranchesIndependent) {
  const auto model = build_smartgrid({});
  const JointBelief pi{MarginalBelief({0.4, 0.6}), MarginalBelief({1.0, 0.0})};
  const Prescription g{{kActionZero, kActionOne}};
  const JointPrescription gbar{{g, g}, 0};
  const std::vector<int> a{kActionOne, kActionOne};  // agent 1 inconsistent
  const auto out = joint_update(pi, gbar, a, model);
  const auto kernels = std::vector<oracle::Matrix>{rows_of(model.kernel(0, 0)),
                                                   rows_of(model.kernel(0, 1)),
                                                   rows_of(model.kernel(0, 2))};
  const auto w0 = oracle::bayes_update({0.4, 0.6}, g.actions, kActionOne, kernels);
  const auto w1 = oracle::bayes_update({1.0, 0.0}, g.actions, kActionOne, kernels);
  for (int x = 0; x < 2; ++x) {
    EXPECT_NEAR(out[0][x], w0[x], 1e-15);
    EXPECT_NEAR(out[1][x], w1[x], 1e-15);
  }
  EXPECT_NEAR(out[1][1], model.kernel_row(1, 0, kActionOne)[1], 1e-15);
}

TEST(JointUpdate, DimensionMismatch) {
  const auto model = build_smartgrid({});
  const JointBelief pi(2, MarginalBelief({0.5, 0.5}));
  const JointPrescription gbar{{Prescription{{0, 0}}}, 0};
  const std::vector<int> a{0, 0};
  EXPECT_THROW(joint_update(pi, gbar, a, model), std::invalid_argument);
}

TEST(JointProb, Products) {
  const JointBelief a{MarginalBelief({1.0, 0.0}), MarginalBelief({1.0, 0.0})};
  EXPECT_DOUBLE_EQ(joint_prob(a, SystemState{{0, 0}}), 1.0);
  const JointBelief u(2, MarginalBelief({0.5, 0.5}));
  for (int s = 0; s < 4; ++s) EXPECT_DOUBLE_EQ(joint_prob(u, SystemState{{s & 1, s >> 1}}), 0.25);
  const JointBelief b{MarginalBelief({0.3, 0.7}), MarginalBelief({0.2, 0.8})};
  EXPECT_NEAR(joint_prob(b, SystemState{{1, 0}}), 0.14, 1e-15);
}

TEST(BeliefGrid, OnGridPoint) {
  const BeliefGrid grid(11, std::vector<int>{2});
  const auto cell = grid.snap({MarginalBelief({0.5, 0.5})});
  EXPECT_DOUBLE_EQ(grid.point(cell)[0][0], 0.5);
}

TEST(BeliefGrid, NearestPoint) {
  const BeliefGrid grid(11, std::vector<int>{2});
  const auto cell = grid.snap({MarginalBelief({0.52, 0.48})});
  EXPECT_DOUBLE_EQ(grid.point(cell)[0][0], 0.5);
  const auto c2 = grid.snap({MarginalBelief({0.96, 0.04})});
  EXPECT_DOUBLE_EQ(grid.point(c2)[0][0], 1.0);
}

TEST(BeliefGrid, TieBreakTowardLowerIndex) {
  const BeliefGrid grid(2, std::vector<int>{2});
  const auto cell = grid.snap({MarginalBelief({0.5, 0.5})});
  EXPECT_EQ(cell, 0u);
  EXPECT_DOUBLE_EQ(grid.point(cell)[0][0], 1.0);  // mass on state 0
}

TEST(BeliefGrid, CellCountsAndJointIndex) {
  const BeliefGrid g2(11, std::vector<int>{2, 2});
  EXPECT_EQ(g2.num_cells(), 121u);
  const BeliefGrid g3(5, std::vector<int>{3});
  EXPECT_EQ(g3.num_cells(), 15u);  // C(4 + 2, 2)
  const BeliefGrid g4(4, std::vector<int>{4, 2});
  EXPECT_EQ(g4.num_cells(), 20u * 4u);
  for (std::size_t c = 0; c < g4.num_cells(); ++c) {
    const auto parts = g4.split_cell(c);
    EXPECT_EQ(g4.joint_cell(parts), c);
  }
  // agent 0 most significant
  const std::vector<std::size_t> parts{3, 7};
  EXPECT_EQ(g2.joint_cell(parts), 3u * 11u + 7u);
}

TEST(BeliefGrid, SnapIsIdempotentAndPointsAreValid) {
  for (int n : {2, 3, 4}) {
    const BeliefGrid grid(6, std::vector<int>{n});
    for (std::size_t c = 0; c < grid.num_cells(); ++c) {
      const auto p = grid.point(c);
      EXPECT_EQ(grid.snap(p), c);
      double s = 0.0;
      for (double v : p[0].probs()) s += v;
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(BeliefGrid, SnapIsNearestInL1) {
  std::mt19937_64 gen(3);
  for (int n : {2, 3, 4}) {
    const BeliefGrid grid(7, std::vector<int>{n});
    for (int rep = 0; rep < 500; ++rep) {
      const auto pi = oracle::dirichlet(n, gen);
      const JointBelief b{MarginalBelief(pi)};
      const auto c = grid.snap(b);
      EXPECT_EQ(grid.snap(grid.point(c)), c);
      double best = 1e9;
      for (std::size_t k = 0; k < grid.num_cells(); ++k)
        best = std::min(best, 2.0 * tv_distance(pi, grid.point(k)[0].probs()));
      EXPECT_LE(2.0 * tv_distance(pi, grid.point(c)[0].probs()), best + 1e-12);
    }
  }
}

TEST(BeliefGrid, RejectsCoarseResolution) {
  EXPECT_THROW(BeliefGrid(1, std::vector<int>{2}), std::invalid_argument);
}

TEST(TvDistance, Basic) {
  const std::vector<double> p{1.0, 0.0}, q{0.0, 1.0}, r{0.25, 0.75};
  EXPECT_DOUBLE_EQ(tv_distance(p, q), 1.0);
  EXPECT_DOUBLE_EQ(tv_distance(p, p), 0.0);
  EXPECT_DOUBLE_EQ(tv_distance(p, r), 0.75);
}
