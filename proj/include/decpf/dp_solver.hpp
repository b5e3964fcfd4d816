#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "decpf/belief.hpp"
#include "decpf/env_core.hpp"
#include "decpf/prescriptions.hpp"
#include "decpf/random.hpp"

namespace decpf {

/// Q(t, cell, joint prescription). A stationary table has one stage.
struct QFunction {
  std::size_t stages = 0;
  std::size_t cells = 0;
  std::size_t prescriptions = 0;
  std::vector<double> values;

  QFunction() = default;
  QFunction(std::size_t stages, std::size_t cells, std::size_t prescriptions, double init = 0.0)
      : stages(stages), cells(cells), prescriptions(prescriptions),
        values(stages * cells * prescriptions, init) {}

  double& operator()(std::size_t t, std::size_t cell, std::size_t g) {
    return values[(t * cells + cell) * prescriptions + g];
  }
  double operator()(std::size_t t, std::size_t cell, std::size_t g) const {
    return values[(t * cells + cell) * prescriptions + g];
  }
  std::span<double> row(std::size_t t, std::size_t cell) {
    return {values.data() + (t * cells + cell) * prescriptions, prescriptions};
  }
  std::span<const double> row(std::size_t t, std::size_t cell) const {
    return {values.data() + (t * cells + cell) * prescriptions, prescriptions};
  }
};

/// V(t, cell). A finite-horizon table carries T + 1 stages with the last
/// stage identically zero.
struct ValueTable {
  std::size_t stages = 0;
  std::size_t cells = 0;
  std::vector<double> values;

  ValueTable() = default;
  ValueTable(std::size_t stages, std::size_t cells, double init = 0.0)
      : stages(stages), cells(cells), values(stages * cells, init) {}

  double& operator()(std::size_t t, std::size_t cell) { return values[t * cells + cell]; }
  double operator()(std::size_t t, std::size_t cell) const { return values[t * cells + cell]; }
  std::span<const double> stage(std::size_t t) const {
    return {values.data() + t * cells, cells};
  }
};

/// Joint prescription index per (t, cell); one stage when stationary.
struct PolicyTable {
  std::size_t stages = 0;
  std::size_t cells = 0;
  std::vector<std::size_t> values;

  PolicyTable() = default;
  PolicyTable(std::size_t stages, std::size_t cells)
      : stages(stages), cells(cells), values(stages * cells, 0) {}

  bool stationary() const { return stages == 1; }
  std::size_t& operator()(std::size_t t, std::size_t cell) { return values[t * cells + cell]; }
  /// Stage t, or the single stage of a stationary policy.
  std::size_t operator()(std::size_t t, std::size_t cell) const {
    return values[(stationary() ? 0 : t) * cells + cell];
  }
};

/// Greedy (lowest-index argmax) policy of every row of q.
PolicyTable greedy_policy(const QFunction& q);

/// Expected one-step consequences of playing joint prescription g from grid
/// cell c: one entry per joint state x̄ with positive probability.
struct BeliefOutcome {
  double prob = 0.0;
  double reward = 0.0;
  std::size_t next_cell = 0;
};

/// The common agent's decision problem restricted to a belief grid: for
/// each (cell, joint prescription) the exact distribution over (reward,
/// snapped next cell), enumerated once and reused by every backup.
class GridBeliefModel {
 public:
  GridBeliefModel(const EnvModel& model, BeliefGrid grid);

  const EnvModel& model() const { return *model_; }
  const BeliefGrid& grid() const { return grid_; }
  const PrescriptionSpace& space() const { return space_; }
  std::size_t num_cells() const { return grid_.num_cells(); }
  std::size_t num_prescriptions() const { return space_.size(); }

  std::span<const BeliefOutcome> outcomes(std::size_t cell, std::size_t g) const {
    const std::size_t k = cell * space_.size() + g;
    return {outcomes_.data() + offsets_[k], offsets_[k + 1] - offsets_[k]};
  }

  /// sum over outcomes of prob * (reward + delta * v_next[next_cell]).
  double backup(std::size_t cell, std::size_t g, std::span<const double> v_next,
                double delta) const;

 private:
  const EnvModel* model_;
  BeliefGrid grid_;
  PrescriptionSpace space_;
  std::vector<BeliefOutcome> outcomes_;
  std::vector<std::size_t> offsets_;
};

/// Q(π̄, γ̄) = E[R(x̄, γ̄(x̄)) + delta * v_next(snap(F̄(π̄, γ̄, γ̄(x̄))))] with
/// the expectation taken exactly over x̄ ~ ∏ π^i. `v_next` is indexed by
/// grid cell.
double q_backup(const EnvModel& model, const BeliefGrid& grid, const JointBelief& pibar,
                const JointPrescription& gbar, std::span<const double> v_next, double delta);

struct DpSolution {
  QFunction q;
  ValueTable v;
  PolicyTable policy;
  /// Max-norm change of V per sweep (value iteration only).
  std::vector<double> residuals;
};

/// Finite-horizon backward recursion over stages T-1..0 (stage 0 is the
/// first decision) with V_T = 0. Throws std::invalid_argument on T < 1 or
/// delta outside [0, 1].
DpSolution backward_recursion(const GridBeliefModel& bm, int T, double delta);
DpSolution backward_recursion(const EnvModel& model, const BeliefGrid& grid, int T, double delta);

/// Stationary value iteration from V = 0 until the max-norm change drops
/// below tol. Throws std::runtime_error after max_iterations sweeps.
DpSolution value_iteration(const GridBeliefModel& bm, double delta, double tol = 1e-6,
                           int max_iterations = 100000);
DpSolution value_iteration(const EnvModel& model, const BeliefGrid& grid, double delta,
                           double tol = 1e-6, int max_iterations = 100000);

/// Sweep bound ceil(log(tol (1 - delta) / span) / log delta) for a reward
/// span `reward_span`.
int value_iteration_sweep_bound(double delta, double tol, double reward_span);

struct ReturnEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Monte-Carlo J: x̄_0 ~ π̄_0, play policy(t, snap(π̄_t)), propagate the
/// belief with the exact (unsnapped) update, accumulate sum_t delta^t R_t
/// over T steps.
ReturnEstimate evaluate_policy_return(const EnvModel& model, const BeliefGrid& grid,
                                      const PolicyTable& policy, const JointBelief& pi0, int T,
                                      double delta, std::size_t num_rollouts, Rng& rng);

/// Mean and standard error (sample sd / sqrt(n); 0 when n < 2).
ReturnEstimate mean_and_stderr(std::span<const double> xs);

// Table dumps: a text file whose first line is `<kind>,<stages>,<cells>,<width>`
// followed by stages * cells comma-separated rows of `width` values in
// row-major order. Doubles use the shortest round-trip decimal form.
void write_table(const std::filesystem::path& path, const QFunction& q);
void write_table(const std::filesystem::path& path, const ValueTable& v);
void write_table(const std::filesystem::path& path, const PolicyTable& p);
QFunction read_q_table(const std::filesystem::path& path);
ValueTable read_value_table(const std::filesystem::path& path);

}  // namespace decpf
