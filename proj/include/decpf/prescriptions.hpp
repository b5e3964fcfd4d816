#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "decpf/env_core.hpp"
#include "decpf/random.hpp"

namespace decpf {

/// Pure prescription gamma^i: X^i -> A^i, stored as one action per state.
struct Prescription {
  std::vector<int> actions;

  int operator()(int x) const { return actions[x]; }
  std::size_t num_states() const { return actions.size(); }
  bool operator==(const Prescription&) const = default;
};

struct JointPrescription {
  std::vector<Prescription> per_agent;
  std::size_t index = 0;

  const Prescription& operator[](std::size_t i) const { return per_agent[i]; }
  std::size_t size() const { return per_agent.size(); }
};

/// The space of joint pure prescriptions under a mixed-radix encoding.
///
/// Digits are ordered (agent 0, state 0), (agent 0, state 1), ...,
/// (agent N-1, state |X|-1); the last digit is least significant and each
/// digit is an action index. Index 0 maps every state of every agent to
/// action 0.
class PrescriptionSpace {
 public:
  static constexpr std::size_t kMaxSize = 1'000'000;

  /// Throws std::length_error when the space exceeds kMaxSize.
  PrescriptionSpace(std::vector<int> num_states, std::vector<int> num_actions);
  explicit PrescriptionSpace(const EnvModel& model);

  std::size_t size() const { return size_; }
  int num_agents() const { return static_cast<int>(num_states_.size()); }

  /// gamma^i(x) for joint prescription `index`.
  int action(std::size_t index, int agent, int x) const {
    return table_[index * digits_ + offsets_[agent] + x];
  }
  /// a^i = gamma^i(x^i) for every agent.
  void act(std::size_t index, std::span<const int> states, std::span<int> out) const {
    for (std::size_t i = 0; i < num_states_.size(); ++i)
      out[i] = action(index, static_cast<int>(i), states[i]);
  }

  JointPrescription decode(std::size_t index) const;
  std::size_t encode(const JointPrescription& gbar) const;
  std::vector<JointPrescription> enumerate() const;

 private:
  std::vector<int> num_states_;
  std::vector<int> num_actions_;
  std::vector<std::size_t> offsets_;
  std::size_t digits_ = 0;
  std::size_t size_ = 1;
  std::vector<int> table_;
};

/// Every joint prescription for N identical agents, in index order.
std::vector<JointPrescription> enumerate_joint(int num_agents, int num_states,
                                               int num_actions);

/// a^i = gamma^i(x^i).
std::vector<int> act(const JointPrescription& gbar, const SystemState& xbar);

/// Lowest index attaining the maximum.
std::size_t greedy_index(std::span<const double> qrow);

struct EpsilonGreedyChoice {
  std::size_t explore = 0;
  std::size_t greedy = 0;
};

/// greedy = argmax (lowest index on ties); explore = greedy with probability
/// 1 - epsilon, otherwise uniform over the whole row. Always consumes one
/// uniform draw, plus one index draw when exploring.
EpsilonGreedyChoice epsilon_greedy(std::span<const double> qrow, double epsilon, Rng& rng);

}  // namespace decpf
