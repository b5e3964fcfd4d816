#include "decpf/particle_filter.hpp"

#include <algorithm>
#include <stdexcept>

namespace decpf {

namespace {

int draw_from(std::span<const double> p, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  int last = -1;
  for (int x = 0; x < static_cast<int>(p.size()); ++x) {
    if (p[x] <= 0.0) continue;
    last = x;
    acc += p[x];
    if (u < acc) return x;
  }
  return last;
}

}  // namespace

ParticleSet init_particles(const MarginalBelief& pi0, std::size_t K, int agent,
                           std::uint64_t seed) {
  ParticleSet ps;
  ps.agent = agent;
  ps.num_states = static_cast<int>(pi0.size());
  ps.rng.seed(seed);
  reinit_particles(ps, pi0, K);
  return ps;
}

void reinit_particles(ParticleSet& ps, const MarginalBelief& pi0, std::size_t K) {
  if (K == 0) throw std::invalid_argument("init_particles: K must be at least 1");
  ps.num_states = static_cast<int>(pi0.size());
  ps.particles.resize(K);
  for (auto& x : ps.particles) x = draw_from(pi0.probs(), ps.rng);
}

WeightVector weight_by_action(const ParticleSet& ps, const Prescription& gamma, int a) {
  WeightVector w;
  const std::size_t K = ps.size();
  w.weights.resize(K);
  std::size_t hits = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const bool match = gamma(ps.particles[k]) == a;
    w.weights[k] = match ? 1.0 : 0.0;
    hits += match;
  }
  if (hits == 0) {
    w.degenerate = true;
    std::fill(w.weights.begin(), w.weights.end(), 1.0 / static_cast<double>(K));
    return w;
  }
  const double inv = 1.0 / static_cast<double>(hits);
  for (double& v : w.weights) v *= inv;
  return w;
}

ParticleSet resample_multinomial(ParticleSet ps, const WeightVector& w) {
  const std::size_t K = ps.size();
  if (w.weights.size() != K)
    throw std::invalid_argument("resample_multinomial: weight count differs from particle count");
  double total = 0.0;
  for (double v : w.weights) total += v;
  if (!(total > 0.0)) throw std::invalid_argument("resample_multinomial: weights sum to zero");

  // Vose alias construction over scaled weights K * w_k / total.
  std::vector<double> prob(K);
  std::uint32_t fallback = 0;
  while (!(w.weights[fallback] > 0.0)) ++fallback;
  std::vector<std::uint32_t> alias(K, fallback);
  std::vector<std::uint32_t> small, large;
  small.reserve(K);
  large.reserve(K);
  const double scale = static_cast<double>(K) / total;
  for (std::size_t k = 0; k < K; ++k) {
    prob[k] = w.weights[k] * scale;
    (prob[k] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(k));
  }
  while (!small.empty() && !large.empty()) {
    const auto s = small.back();
    small.pop_back();
    const auto l = large.back();
    alias[s] = l;
    prob[l] -= 1.0 - prob[s];
    if (prob[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  for (auto k : large) prob[k] = 1.0;
  // Leftovers in `small` are rounding residue of weight ~1.
  for (auto k : small) prob[k] = w.weights[k] > 0.0 ? 1.0 : 0.0;

  std::vector<int> out(K);
  for (std::size_t k = 0; k < K; ++k) {
    const auto j = uniform_index(ps.rng, K);
    const bool keep = uniform01(ps.rng) < prob[j];
    out[k] = ps.particles[keep ? j : alias[j]];
  }
  ps.particles = std::move(out);
  return ps;
}

ParticleSet propagate(ParticleSet ps, int a, const BlackBox& sampler) {
  for (auto& x : ps.particles) x = sampler.sample_transition(ps.agent, x, a, ps.rng);
  return ps;
}

MarginalBelief estimate(const ParticleSet& ps) {
  std::vector<double> counts(ps.num_states, 0.0);
  for (int x : ps.particles) counts[x] += 1.0;
  const double inv = 1.0 / static_cast<double>(ps.size());
  for (double& c : counts) c *= inv;
  return MarginalBelief(std::move(counts));
}

ParticleSet pf_step(ParticleSet ps, const Prescription& gamma, int a, const BlackBox& sampler) {
  const auto w = weight_by_action(ps, gamma, a);
  if (!w.degenerate) ps = resample_multinomial(std::move(ps), w);
  return propagate(std::move(ps), a, sampler);
}

std::vector<ParticleSet> bank_update(std::vector<ParticleSet> sets, const JointPrescription& gbar,
                                     std::span<const int> abar, const BlackBox& sampler) {
  if (sets.size() != gbar.size() || sets.size() != abar.size() ||
      static_cast<int>(sets.size()) != sampler.num_agents())
    throw std::invalid_argument("bank_update: dimension mismatch");
  for (std::size_t i = 0; i < sets.size(); ++i)
    sets[i] = pf_step(std::move(sets[i]), gbar[i], abar[i], sampler);
  return sets;
}

JointBelief estimate(const std::vector<ParticleSet>& sets) {
  JointBelief b;
  b.reserve(sets.size());
  for (const auto& s : sets) b.push_back(estimate(s));
  return b;
}

}  // namespace decpf
