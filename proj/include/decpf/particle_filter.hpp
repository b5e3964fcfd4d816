#pragma once

#include <cstdint>
#include <vector>

#include "decpf/belief.hpp"
#include "decpf/env_core.hpp"
#include "decpf/prescriptions.hpp"
#include "decpf/random.hpp"

namespace decpf {

/// K sampled private states approximating one agent's marginal belief. The
/// set owns its random stream so a bank of filters never shares state.
struct ParticleSet {
  int agent = 0;
  int num_states = 0;
  std::vector<int> particles;
  Rng rng;

  std::size_t size() const { return particles.size(); }
};

struct WeightVector {
  std::vector<double> weights;
  /// No particle was consistent with the observation; weights are uniform.
  bool degenerate = false;
};

/// K iid draws from pi0. Throws std::invalid_argument when K == 0.
ParticleSet init_particles(const MarginalBelief& pi0, std::size_t K, int agent,
                           std::uint64_t seed);
/// Redraws K particles from pi0 using the set's own stream.
void reinit_particles(ParticleSet& ps, const MarginalBelief& pi0, std::size_t K);

/// w_k ∝ 1{gamma(x_k) = a}. All-zero indicators yield uniform weights with
/// the degenerate flag set.
WeightVector weight_by_action(const ParticleSet& ps, const Prescription& gamma, int a);

/// K iid draws with replacement from the weighted population (Walker/Vose
/// alias table, O(K) build and O(1) per draw).
ParticleSet resample_multinomial(ParticleSet ps, const WeightVector& w);

/// Each particle replaced by one draw x' ~ tau(.|x, a) through the black box.
ParticleSet propagate(ParticleSet ps, int a, const BlackBox& sampler);

/// Empirical marginal: count of each state over K.
MarginalBelief estimate(const ParticleSet& ps);

/// weight_by_action -> resample_multinomial -> propagate. A degenerate
/// weight vector skips resampling (propagate-only).
ParticleSet pf_step(ParticleSet ps, const Prescription& gamma, int a, const BlackBox& sampler);

/// pf_step per agent; filters never exchange particles. Throws
/// std::invalid_argument on a dimension mismatch.
std::vector<ParticleSet> bank_update(std::vector<ParticleSet> sets, const JointPrescription& gbar,
                                     std::span<const int> abar, const BlackBox& sampler);

JointBelief estimate(const std::vector<ParticleSet>& sets);

}  // namespace decpf
