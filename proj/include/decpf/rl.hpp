#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "decpf/belief.hpp"
#include "decpf/dp_solver.hpp"
#include "decpf/env_core.hpp"

namespace decpf {

/// How the learner tracks the common belief between steps.
struct BeliefUpdaterSpec {
  enum class Kind { exact, particle };
  Kind kind = Kind::exact;
  std::size_t particles = 500;  // K, used by Kind::particle

  static BeliefUpdaterSpec exact() { return {Kind::exact, 0}; }
  static BeliefUpdaterSpec particle(std::size_t K) { return {Kind::particle, K}; }

  /// "exact" or "pf_K<K>".
  std::string label() const;
  bool operator==(const BeliefUpdaterSpec&) const = default;
};

struct LearnerConfig {
  int horizon = 10;  // T, finite-horizon learner
  bool infinite = false;
  std::int64_t trajectory_length = 100000;  // infinite-horizon learner
  int episodes = 5000;                      // E
  double delta = 0.9;
  double alpha = 0.95;
  double epsilon = 0.2;
  /// Multiplicative epsilon decay per episode (finite) or per window
  /// (infinite). 1 disables decay.
  double epsilon_decay = 1.0;
  double epsilon_min = 0.0;
  BeliefUpdaterSpec updater;
  int grid_resolution = 11;
  std::uint64_t seed = 0;
  /// Finite learner: evaluate after every `eval_interval` episodes.
  int eval_interval = 50;
  /// Infinite learner: evaluate after every `window` steps.
  std::int64_t window = 1000;
};

/// Throws std::invalid_argument naming the offending field.
void validate(const LearnerConfig& config);

/// Stable hash of every field in the config.
std::uint64_t config_hash(const LearnerConfig& config);

struct LearnTrace {
  /// Episode (finite) or step (infinite) count at which each point was taken.
  std::vector<std::int64_t> points;
  std::vector<double> returns;
  std::vector<double> elapsed_seconds;
  std::uint64_t config_hash = 0;

  std::size_t size() const { return points.size(); }
};

struct LearnResult {
  QFunction q;
  ValueTable v;        // V as recorded along visited cells
  PolicyTable policy;  // greedy policy of the final q
  std::vector<std::uint64_t> visits;  // per (stage, cell)
  LearnTrace trace;
};

/// Scores a Q table at trace point `point`. Supplied by the caller so that
/// learning itself never needs the model's kernels.
using TraceEvaluator = std::function<double(const QFunction& q, std::int64_t point)>;

/// Finite-horizon off-policy SARSA over discretized beliefs. Per episode
/// the belief starts at pi0 and x̄_0 ~ pi0; each step picks (explore,
/// greedy) epsilon-greedily from Q_t at the snapped belief, records
/// V_t = Q_t(., greedy), acts with the exploring prescription, updates the
/// belief, and moves Q_t(., explore) toward R + delta V_{t+1}(next) with
/// V_T = 0.
///
/// The exact updater reads the model's kernels (the "model" variant); the
/// particle updater only samples through a BlackBox.
LearnResult run_finite(const LearnerConfig& config, const EnvModel& model, const JointBelief& pi0,
                       const TraceEvaluator& evaluate = {});

/// Continuing-trajectory variant with time-stationary Q and V, evaluated
/// every `window` steps.
LearnResult run_infinite(const LearnerConfig& config, const EnvModel& model, const JointBelief& pi0,
                         const TraceEvaluator& evaluate = {});

/// Mean discounted T-step return of the greedy policy of q, tracking beliefs
/// with the exact update regardless of how q was learned.
double evaluate_greedy(const QFunction& q, const EnvModel& model, const BeliefGrid& grid,
                       const JointBelief& pi0, int T, double delta, std::size_t rollouts, Rng& rng);

/// evaluate_greedy with a fresh stream per trace point, seeded from
/// (seed, point).
TraceEvaluator make_greedy_evaluator(const EnvModel& model, int grid_resolution,
                                     const JointBelief& pi0, int T, double delta,
                                     std::size_t rollouts, std::uint64_t seed);

}  // namespace decpf
