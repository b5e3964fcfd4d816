#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "decpf/random.hpp"

namespace decpf {

/// Row-stochastic square matrix tau(x'|x) for one (agent, action) pair.
class StochasticMatrix {
 public:
  StochasticMatrix() = default;
  /// Rows given as nested vectors; throws std::invalid_argument unless every
  /// row is nonnegative and sums to 1 within 1e-12.
  explicit StochasticMatrix(const std::vector<std::vector<double>>& rows);

  static StochasticMatrix identity(int n);

  int size() const { return n_; }
  std::span<const double> row(int x) const {
    return {data_.data() + static_cast<std::size_t>(x) * n_,
            static_cast<std::size_t>(n_)};
  }
  double operator()(int x, int next) const {
    return data_[static_cast<std::size_t>(x) * n_ + next];
  }
  /// Inverse-CDF draw from row x.
  int sample(int x, Rng& rng) const;

 private:
  int n_ = 0;
  std::vector<double> data_;
  std::vector<double> cdf_;
};

/// Dynamics of one agent: a kernel per action over its private state space.
struct AgentDynamics {
  int num_states = 0;
  std::vector<StochasticMatrix> kernels;  // indexed by action
  std::vector<double> initial;            // p(.) over the private states

  int num_actions() const { return static_cast<int>(kernels.size()); }
};

/// x̄_t: one private state per agent.
struct SystemState {
  std::vector<int> states;

  std::size_t size() const { return states.size(); }
  int operator[](std::size_t i) const { return states[i]; }
  bool operator==(const SystemState&) const = default;
};

using RewardFn =
    std::function<double(std::span<const int> states, std::span<const int> actions)>;

/// Multi-agent environment with conditionally independent per-agent kernels
/// tau^i(x'|x^i, a^i) and a stationary joint reward R(x̄, ā). Immutable after
/// construction.
class EnvModel {
 public:
  EnvModel(std::vector<AgentDynamics> agents, RewardFn reward);

  int num_agents() const { return static_cast<int>(agents_.size()); }
  int num_states(int agent) const { return agents_[agent].num_states; }
  int num_actions(int agent) const { return agents_[agent].num_actions(); }
  const AgentDynamics& agent(int i) const { return agents_[i]; }
  const StochasticMatrix& kernel(int agent, int action) const {
    return agents_[agent].kernels[action];
  }
  std::span<const double> kernel_row(int agent, int x, int action) const {
    return kernel(agent, action).row(x);
  }

  double reward(std::span<const int> states, std::span<const int> actions) const;
  double reward(const SystemState& s, std::span<const int> actions) const {
    return reward(std::span<const int>(s.states), actions);
  }

  /// Smallest and largest reward over every (x̄, ā); the span Δ_R is
  /// max - min.
  std::pair<double, double> reward_range() const;

  /// One draw from tau^i(.|x, a).
  int sample_transition(int agent, int x, int action, Rng& rng) const {
    return agents_[agent].kernels[action].sample(x, rng);
  }

 private:
  std::size_t joint_state_code(std::span<const int> states) const;
  std::size_t joint_action_code(std::span<const int> actions) const;

  std::vector<AgentDynamics> agents_;
  RewardFn reward_;
  // Dense R(x̄, ā) cache, filled when the joint spaces are small.
  std::vector<double> reward_table_;
  std::size_t joint_actions_ = 0;
};

struct StepResult {
  SystemState next;
  double reward = 0.0;
};

/// r = R(x̄, ā); each agent's next state drawn independently, agent 0 first.
StepResult step(const EnvModel& model, const SystemState& state,
                std::span<const int> actions, Rng& rng);

inline int sample_transition(const EnvModel& model, int agent, int x, int action,
                             Rng& rng) {
  return model.sample_transition(agent, x, action, rng);
}

/// Independent per-agent draws from the initial marginals.
SystemState sample_initial(const EnvModel& model, Rng& rng);

/// Sampling-only view of an EnvModel. Learners and particle filters that
/// are meant to be model-free receive this instead of the model itself.
class BlackBox {
 public:
  explicit BlackBox(const EnvModel& model) : model_(&model) {}

  int num_agents() const { return model_->num_agents(); }
  int num_states(int agent) const { return model_->num_states(agent); }
  int num_actions(int agent) const { return model_->num_actions(agent); }

  StepResult step(const SystemState& s, std::span<const int> actions, Rng& rng) const {
    return decpf::step(*model_, s, actions, rng);
  }
  int sample_transition(int agent, int x, int action, Rng& rng) const {
    return model_->sample_transition(agent, x, action, rng);
  }
  SystemState sample_initial(Rng& rng) const { return decpf::sample_initial(*model_, rng); }

 private:
  const EnvModel* model_;
};

// ---------------------------------------------------------------------------
// Smartgrid demand-response instance. X = {0, 1}, A = {null, "0", "1"}.

inline constexpr int kNullAction = 0;
inline constexpr int kActionZero = 1;
inline constexpr int kActionOne = 2;

struct SmartGridParams {
  int num_agents = 2;
  double eps1 = 0.1;
  double eps2 = 0.1;
  std::vector<std::vector<double>> mixing_matrix{{0.7, 0.3}, {0.3, 0.7}};
  double c0 = 0.2;
  double c1 = 0.2;
  std::vector<double> target_dist{0.5, 0.5};
  std::vector<double> initial_dist{0.5, 0.5};
};

/// Throws std::invalid_argument on a non-stochastic mixing matrix, a target
/// with a zero entry, or eps outside [0, 1].
void validate(const SmartGridParams& params);

/// -[(1/N) sum_i cost(a^i) + KL(z || zeta)] where z is the population
/// distribution of the current states. Natural log, 0 log 0 = 0.
double smartgrid_reward(const SmartGridParams& params, std::span<const int> states,
                        std::span<const int> actions);

/// Kernels per agent: null -> M, "0" -> (1-eps1)[[1,0],[1,0]] + eps1 M,
/// "1" -> (1-eps2)[[0,1],[0,1]] + eps2 M.
EnvModel build_smartgrid(const SmartGridParams& params);

/// Kullback-Leibler divergence KL(p || q), natural log.
double kl_divergence(std::span<const double> p, std::span<const double> q);

}  // namespace decpf
