#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "decpf/env_core.hpp"
#include "decpf/prescriptions.hpp"

namespace decpf {

/// pi^i: distribution over one agent's private states.
class MarginalBelief {
 public:
  MarginalBelief() = default;
  /// Throws std::invalid_argument on negative entries or a sum off 1 by
  /// more than 1e-9.
  explicit MarginalBelief(std::vector<double> probs);

  static MarginalBelief point_mass(int num_states, int x);
  static MarginalBelief uniform(int num_states);

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t x) const { return probs_[x]; }
  std::span<const double> probs() const { return probs_; }

 private:
  std::vector<double> probs_;
};

/// π̄: one marginal per agent. The joint is their product.
using JointBelief = std::vector<MarginalBelief>;

/// Denominator D below which the observation is treated as impossible under
/// the prior and the update falls back to unconditioned propagation.
inline constexpr double kDegenerateMass = 1e-12;

/// Bayes update of one marginal after observing action `a` under pure
/// prescription `gamma`:
///   pi'(x') = sum_x pi(x) 1{gamma(x)=a} tau(x'|x,a) / D,  D = sum_x pi(x) 1{gamma(x)=a}
/// and, when D < kDegenerateMass, pi'(x') = sum_x pi(x) tau(x'|x,a).
///
/// `kernel_row(x, a)` returns tau(.|x, a) as a span.
template <class KernelRowFn>
MarginalBelief exact_update(const MarginalBelief& pi, const Prescription& gamma, int a,
                            KernelRowFn&& kernel_row) {
  const std::size_t n = pi.size();
  std::vector<double> next(n, 0.0);
  double d = 0.0;
  for (std::size_t x = 0; x < n; ++x)
    if (gamma(static_cast<int>(x)) == a) d += pi[x];
  const bool conditioned = d >= kDegenerateMass;
  for (std::size_t x = 0; x < n; ++x) {
    if (conditioned && gamma(static_cast<int>(x)) != a) continue;
    const double w = pi[x];
    if (w == 0.0) continue;
    const auto row = kernel_row(static_cast<int>(x), a);
    for (std::size_t y = 0; y < n; ++y) next[y] += w * row[y];
  }
  double total = 0.0;
  for (double v : next) total += v;
  for (double& v : next) v /= total;
  return MarginalBelief(std::move(next));
}

/// exact_update against agent `agent`'s kernels in `model`.
MarginalBelief exact_update(const MarginalBelief& pi, const Prescription& gamma, int a,
                            const EnvModel& model, int agent);

/// F̄(π̄, γ̄, ā): exact_update applied agent by agent.
JointBelief joint_update(const JointBelief& pibar, const JointPrescription& gbar,
                         std::span<const int> abar, const EnvModel& model);

/// ∏_i pi^i(x^i).
double joint_prob(const JointBelief& pibar, std::span<const int> xbar);
inline double joint_prob(const JointBelief& pibar, const SystemState& xbar) {
  return joint_prob(pibar, std::span<const int>(xbar.states));
}

/// Uniform lattice over each agent's belief simplex with `resolution` points
/// per axis: every coordinate is a multiple of 1/(resolution - 1). For a
/// two-state marginal, cell k is the belief (1 - k/(G-1), k/(G-1)). The joint
/// cell is the mixed-radix tuple of per-agent cells, agent 0 most
/// significant.
class BeliefGrid {
 public:
  /// Throws std::invalid_argument unless resolution >= 2.
  BeliefGrid(int resolution, std::vector<int> num_states);
  BeliefGrid(int resolution, const EnvModel& model);

  int resolution() const { return resolution_; }
  int num_agents() const { return static_cast<int>(num_states_.size()); }
  std::size_t num_cells() const { return num_cells_; }
  std::size_t num_marginal_cells(int agent) const { return marginal_points_[agent].size(); }

  /// Nearest lattice point under L1 distance (largest-remainder rounding);
  /// ties resolve toward the lower state index, which for two states is the
  /// lower cell index.
  std::size_t snap_marginal(int agent, std::span<const double> probs) const;
  std::size_t snap(const JointBelief& pibar) const;

  std::size_t joint_cell(std::span<const std::size_t> marginal_cells) const;
  std::vector<std::size_t> split_cell(std::size_t cell) const;

  const MarginalBelief& marginal_point(int agent, std::size_t cell) const {
    return marginal_points_[agent][cell];
  }
  JointBelief point(std::size_t cell) const;

 private:
  std::size_t rank(int agent, std::span<const int> units) const;

  int resolution_;
  std::vector<int> num_states_;
  std::vector<std::vector<MarginalBelief>> marginal_points_;
  std::size_t num_cells_ = 1;
};

inline std::size_t snap(const JointBelief& pibar, const BeliefGrid& grid) {
  return grid.snap(pibar);
}

/// Total-variation distance 0.5 * sum |p - q|.
double tv_distance(std::span<const double> p, std::span<const double> q);

}  // namespace decpf
