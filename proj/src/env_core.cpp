#include "decpf/env_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace decpf {

namespace {

constexpr double kRowTol = 1e-12;
constexpr std::size_t kRewardCacheLimit = std::size_t{1} << 20;

void check_distribution(std::span<const double> p, double tol, const std::string& what) {
  if (p.empty()) throw std::invalid_argument(what + ": empty distribution");
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw std::invalid_argument(what + ": negative or NaN entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > tol)
    throw std::invalid_argument(what + ": entries sum to " + std::to_string(sum));
}

}  // namespace

StochasticMatrix::StochasticMatrix(const std::vector<std::vector<double>>& rows)
    : n_(static_cast<int>(rows.size())) {
  if (n_ == 0) throw std::invalid_argument("StochasticMatrix: no rows");
  data_.reserve(static_cast<std::size_t>(n_) * n_);
  cdf_.reserve(static_cast<std::size_t>(n_) * n_);
  for (int x = 0; x < n_; ++x) {
    if (static_cast<int>(rows[x].size()) != n_)
      throw std::invalid_argument("StochasticMatrix: matrix is not square");
    check_distribution(rows[x], kRowTol, "StochasticMatrix row " + std::to_string(x));
    double acc = 0.0;
    for (double v : rows[x]) {
      data_.push_back(v);
      acc += v;
      cdf_.push_back(acc);
    }
  }
}

StochasticMatrix StochasticMatrix::identity(int n) {
  std::vector<std::vector<double>> rows(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) rows[i][i] = 1.0;
  return StochasticMatrix(rows);
}

int StochasticMatrix::sample(int x, Rng& rng) const {
  const double u = uniform01(rng);
  const double* c = cdf_.data() + static_cast<std::size_t>(x) * n_;
  const double* p = data_.data() + static_cast<std::size_t>(x) * n_;
  int last = -1;
  for (int k = 0; k < n_; ++k) {
    if (p[k] > 0.0) {
      last = k;
      if (u < c[k]) return k;
    }
  }
  // u landed in the rounding gap above the final cumulative sum.
  return last;
}

EnvModel::EnvModel(std::vector<AgentDynamics> agents, RewardFn reward)
    : agents_(std::move(agents)), reward_(std::move(reward)) {
  if (agents_.empty()) throw std::invalid_argument("EnvModel: need at least one agent");
  if (!reward_) throw std::invalid_argument("EnvModel: reward function missing");
  std::size_t joint_states = 1;
  joint_actions_ = 1;
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    const auto& a = agents_[i];
    const std::string tag = "EnvModel agent " + std::to_string(i);
    if (a.num_states <= 0) throw std::invalid_argument(tag + ": empty state space");
    if (a.kernels.empty()) throw std::invalid_argument(tag + ": empty action space");
    for (const auto& k : a.kernels)
      if (k.size() != a.num_states)
        throw std::invalid_argument(tag + ": kernel size does not match state space");
    if (static_cast<int>(a.initial.size()) != a.num_states)
      throw std::invalid_argument(tag + ": initial distribution has wrong size");
    check_distribution(a.initial, 1e-9, tag + " initial distribution");
    joint_states *= static_cast<std::size_t>(a.num_states);
    joint_actions_ *= static_cast<std::size_t>(a.num_actions());
    if (joint_states * joint_actions_ > kRewardCacheLimit) {
      joint_actions_ = 0;
      break;
    }
  }
  if (joint_actions_ == 0) return;

  reward_table_.assign(joint_states * joint_actions_, 0.0);
  const std::size_t n = agents_.size();
  std::vector<int> xs(n, 0), as(n, 0);
  for (std::size_t sc = 0; sc < joint_states; ++sc) {
    std::size_t rem = sc;
    for (std::size_t i = n; i-- > 0;) {
      xs[i] = static_cast<int>(rem % agents_[i].num_states);
      rem /= agents_[i].num_states;
    }
    for (std::size_t ac = 0; ac < joint_actions_; ++ac) {
      std::size_t r = ac;
      for (std::size_t i = n; i-- > 0;) {
        as[i] = static_cast<int>(r % agents_[i].num_actions());
        r /= agents_[i].num_actions();
      }
      reward_table_[sc * joint_actions_ + ac] = reward_(xs, as);
    }
  }
}

std::size_t EnvModel::joint_state_code(std::span<const int> states) const {
  std::size_t code = 0;
  for (std::size_t i = 0; i < agents_.size(); ++i)
    code = code * agents_[i].num_states + static_cast<std::size_t>(states[i]);
  return code;
}

std::size_t EnvModel::joint_action_code(std::span<const int> actions) const {
  std::size_t code = 0;
  for (std::size_t i = 0; i < agents_.size(); ++i)
    code = code * agents_[i].num_actions() + static_cast<std::size_t>(actions[i]);
  return code;
}

double EnvModel::reward(std::span<const int> states, std::span<const int> actions) const {
  if (!reward_table_.empty())
    return reward_table_[joint_state_code(states) * joint_actions_ +
                         joint_action_code(actions)];
  return reward_(states, actions);
}

std::pair<double, double> EnvModel::reward_range() const {
  if (!reward_table_.empty()) {
    auto [lo, hi] = std::minmax_element(reward_table_.begin(), reward_table_.end());
    return {*lo, *hi};
  }
  // Large joint spaces: enumerate on the fly.
  const std::size_t n = agents_.size();
  std::vector<int> xs(n, 0), as(n, 0);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  auto next = [](std::vector<int>& v, auto&& radix) {
    for (std::size_t i = v.size(); i-- > 0;) {
      if (++v[i] < radix(i)) return true;
      v[i] = 0;
    }
    return false;
  };
  do {
    std::fill(as.begin(), as.end(), 0);
    do {
      const double r = reward_(xs, as);
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    } while (next(as, [&](std::size_t i) { return agents_[i].num_actions(); }));
  } while (next(xs, [&](std::size_t i) { return agents_[i].num_states; }));
  return {lo, hi};
}

StepResult step(const EnvModel& model, const SystemState& state,
                std::span<const int> actions, Rng& rng) {
  StepResult out;
  out.reward = model.reward(state, actions);
  out.next.states.resize(state.size());
  for (std::size_t i = 0; i < state.size(); ++i)
    out.next.states[i] = model.sample_transition(static_cast<int>(i), state.states[i],
                                                 actions[i], rng);
  return out;
}

SystemState sample_initial(const EnvModel& model, Rng& rng) {
  SystemState s;
  s.states.resize(model.num_agents());
  for (int i = 0; i < model.num_agents(); ++i) {
    const auto& p = model.agent(i).initial;
    const double u = uniform01(rng);
    double acc = 0.0;
    int pick = -1;
    for (int x = 0; x < static_cast<int>(p.size()); ++x) {
      if (p[x] <= 0.0) continue;
      pick = x;
      acc += p[x];
      if (u < acc) break;
    }
    s.states[i] = pick;
  }
  return s;
}

// ---------------------------------------------------------------------------

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  double kl = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k)
    if (p[k] > 0.0) kl += p[k] * std::log(p[k] / q[k]);
  return kl;
}

void validate(const SmartGridParams& params) {
  if (params.num_agents <= 0)
    throw std::invalid_argument("smartgrid: num_agents must be positive");
  if (!(params.eps1 >= 0.0 && params.eps1 <= 1.0))
    throw std::invalid_argument("smartgrid: eps1 outside [0, 1]");
  if (!(params.eps2 >= 0.0 && params.eps2 <= 1.0))
    throw std::invalid_argument("smartgrid: eps2 outside [0, 1]");
  const auto& m = params.mixing_matrix;
  if (m.size() != 2 || m[0].size() != 2 || m[1].size() != 2)
    throw std::invalid_argument("smartgrid: mixing_matrix must be 2x2");
  for (const auto& row : m) check_distribution(row, kRowTol, "smartgrid: mixing_matrix row");
  if (params.target_dist.size() != 2)
    throw std::invalid_argument("smartgrid: target_dist must have 2 entries");
  check_distribution(params.target_dist, 1e-9, "smartgrid: target_dist");
  for (double z : params.target_dist)
    if (!(z > 0.0)) throw std::invalid_argument("smartgrid: target_dist needs strictly positive entries");
  if (params.initial_dist.size() != 2)
    throw std::invalid_argument("smartgrid: initial_dist must have 2 entries");
  check_distribution(params.initial_dist, 1e-9, "smartgrid: initial_dist");
}

double smartgrid_reward(const SmartGridParams& params, std::span<const int> states,
                        std::span<const int> actions) {
  const double n = static_cast<double>(states.size());
  double cost = 0.0;
  for (int a : actions) {
    if (a == kActionZero) cost += params.c0;
    else if (a == kActionOne) cost += params.c1;
  }
  double ones = 0.0;
  for (int x : states) ones += (x == 1) ? 1.0 : 0.0;
  const double z[2] = {(n - ones) / n, ones / n};
  return -(cost / n + kl_divergence(z, params.target_dist));
}

EnvModel build_smartgrid(const SmartGridParams& params) {
  validate(params);
  const auto& m = params.mixing_matrix;
  auto mix = [&](double eps, int target) {
    std::vector<std::vector<double>> rows(2, std::vector<double>(2));
    for (int x = 0; x < 2; ++x)
      for (int y = 0; y < 2; ++y)
        rows[x][y] = (1.0 - eps) * (y == target ? 1.0 : 0.0) + eps * m[x][y];
    return StochasticMatrix(rows);
  };
  AgentDynamics dyn;
  dyn.num_states = 2;
  dyn.kernels = {StochasticMatrix(m), mix(params.eps1, 0), mix(params.eps2, 1)};
  dyn.initial = params.initial_dist;
  std::vector<AgentDynamics> agents(params.num_agents, dyn);
  return EnvModel(std::move(agents), [params](std::span<const int> s, std::span<const int> a) {
    return smartgrid_reward(params, s, a);
  });
}

}  // namespace decpf
