#include "decpf/prescriptions.hpp"

#include <stdexcept>
#include <string>

namespace decpf {

PrescriptionSpace::PrescriptionSpace(std::vector<int> num_states, std::vector<int> num_actions)
    : num_states_(std::move(num_states)), num_actions_(std::move(num_actions)) {
  if (num_states_.empty() || num_states_.size() != num_actions_.size())
    throw std::invalid_argument("PrescriptionSpace: agent dimensions disagree");
  offsets_.resize(num_states_.size());
  for (std::size_t i = 0; i < num_states_.size(); ++i) {
    if (num_states_[i] <= 0 || num_actions_[i] <= 0)
      throw std::invalid_argument("PrescriptionSpace: empty state or action space");
    offsets_[i] = digits_;
    digits_ += static_cast<std::size_t>(num_states_[i]);
    for (int x = 0; x < num_states_[i]; ++x) {
      if (size_ > kMaxSize / static_cast<std::size_t>(num_actions_[i]))
        throw std::length_error("PrescriptionSpace: more than " + std::to_string(kMaxSize) +
                                " joint prescriptions");
      size_ *= static_cast<std::size_t>(num_actions_[i]);
    }
  }

  std::vector<int> radix;
  radix.reserve(digits_);
  for (std::size_t i = 0; i < num_states_.size(); ++i)
    for (int x = 0; x < num_states_[i]; ++x) radix.push_back(num_actions_[i]);

  table_.assign(size_ * digits_, 0);
  std::vector<int> digit(digits_, 0);
  for (std::size_t idx = 0; idx < size_; ++idx) {
    std::copy(digit.begin(), digit.end(), table_.begin() + idx * digits_);
    for (std::size_t d = digits_; d-- > 0;) {
      if (++digit[d] < radix[d]) break;
      digit[d] = 0;
    }
  }
}

PrescriptionSpace::PrescriptionSpace(const EnvModel& model)
    : PrescriptionSpace(
          [&] {
            std::vector<int> v(model.num_agents());
            for (int i = 0; i < model.num_agents(); ++i) v[i] = model.num_states(i);
            return v;
          }(),
          [&] {
            std::vector<int> v(model.num_agents());
            for (int i = 0; i < model.num_agents(); ++i) v[i] = model.num_actions(i);
            return v;
          }()) {}

JointPrescription PrescriptionSpace::decode(std::size_t index) const {
  if (index >= size_) throw std::out_of_range("PrescriptionSpace::decode: index out of range");
  JointPrescription g;
  g.index = index;
  g.per_agent.resize(num_states_.size());
  for (std::size_t i = 0; i < num_states_.size(); ++i) {
    auto& p = g.per_agent[i].actions;
    p.resize(num_states_[i]);
    for (int x = 0; x < num_states_[i]; ++x) p[x] = action(index, static_cast<int>(i), x);
  }
  return g;
}

std::size_t PrescriptionSpace::encode(const JointPrescription& gbar) const {
  if (gbar.size() != num_states_.size())
    throw std::invalid_argument("PrescriptionSpace::encode: wrong number of agents");
  std::size_t idx = 0;
  for (std::size_t i = 0; i < num_states_.size(); ++i) {
    const auto& p = gbar.per_agent[i].actions;
    if (static_cast<int>(p.size()) != num_states_[i])
      throw std::invalid_argument("PrescriptionSpace::encode: wrong prescription length");
    for (int a : p) {
      if (a < 0 || a >= num_actions_[i])
        throw std::invalid_argument("PrescriptionSpace::encode: invalid action");
      idx = idx * static_cast<std::size_t>(num_actions_[i]) + static_cast<std::size_t>(a);
    }
  }
  return idx;
}

std::vector<JointPrescription> PrescriptionSpace::enumerate() const {
  std::vector<JointPrescription> out;
  out.reserve(size_);
  for (std::size_t i = 0; i < size_; ++i) out.push_back(decode(i));
  return out;
}

std::vector<JointPrescription> enumerate_joint(int num_agents, int num_states,
                                               int num_actions) {
  if (num_agents <= 0) throw std::invalid_argument("enumerate_joint: need at least one agent");
  return PrescriptionSpace(std::vector<int>(num_agents, num_states),
                           std::vector<int>(num_agents, num_actions))
      .enumerate();
}

std::vector<int> act(const JointPrescription& gbar, const SystemState& xbar) {
  if (gbar.size() != xbar.size()) throw std::invalid_argument("act: dimension mismatch");
  std::vector<int> a(xbar.size());
  for (std::size_t i = 0; i < xbar.size(); ++i) a[i] = gbar[i](xbar[i]);
  return a;
}

std::size_t greedy_index(std::span<const double> qrow) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < qrow.size(); ++k)
    if (qrow[k] > qrow[best]) best = k;
  return best;
}

EpsilonGreedyChoice epsilon_greedy(std::span<const double> qrow, double epsilon, Rng& rng) {
  if (qrow.empty()) throw std::invalid_argument("epsilon_greedy: empty Q row");
  EpsilonGreedyChoice c;
  c.greedy = greedy_index(qrow);
  c.explore = c.greedy;
  if (uniform01(rng) < epsilon) c.explore = uniform_index(rng, qrow.size());
  return c;
}

}  // namespace decpf
