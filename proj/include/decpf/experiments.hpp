#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "decpf/dp_solver.hpp"
#include "decpf/env_core.hpp"
#include "decpf/rl.hpp"

namespace decpf {

struct BoundParams {
  std::size_t K = 500;
  double epsilon = 0.1;  // estimation tolerance of the bound, not exploration
  double delta_R = 1.0;
  double delta = 0.9;
  int T = 10;
  int t = 0;
  double beta = 0.0;
  double lipschitz = 1.0;  // m; reported only
};

/// Throws std::invalid_argument on K < 1, delta_R < 0, delta outside [0, 1),
/// negative epsilon or beta, or t outside [0, T).
void validate(const BoundParams& bp);

struct HoeffdingBound {
  double zeta = 1.0;        // exp(-2 K eps^2 / delta_R^2)
  double confidence = 0.0;  // 1 - zeta
};

/// Throws std::invalid_argument on K < 1, negative epsilon or delta_R.
/// delta_R == 0 gives confidence 1.
HoeffdingBound hoeffding(std::size_t K, double epsilon, double delta_R);
double hoeffding_confidence(std::size_t K, double epsilon, double delta_R);

/// eta = (1 - zeta) eps + zeta delta_R.
double eta_error(const BoundParams& bp);

/// E = eta + delta (1 - delta^(T-t-1)) / (1 - delta) (eta + beta).
double accumulated_error(const BoundParams& bp);

struct BoundSettings {
  double epsilon = 0.1;
  double beta = 0.0;
  double lipschitz = 1.0;
  int t = 0;
  std::optional<double> delta_R;  // defaults to the model's reward range
  std::vector<std::size_t> particle_counts;  // defaults to the particle variants
};

struct ExperimentConfig {
  SmartGridParams environment;
  LearnerConfig learner;
  std::vector<BeliefUpdaterSpec> variants{
      BeliefUpdaterSpec::exact(), BeliefUpdaterSpec::particle(50),
      BeliefUpdaterSpec::particle(500), BeliefUpdaterSpec::particle(5000)};
  int runs = 10;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string output = "out";
  std::size_t eval_rollouts = 200;
  /// Evaluation horizon of the infinite-horizon learner; the finite one
  /// always evaluates over its own horizon.
  int eval_horizon = 100;
  BoundSettings bounds;
};

/// Throws std::invalid_argument naming the offending field.
void validate(const ExperimentConfig& config);

/// Parses a JSON document whose keys mirror ExperimentConfig. Missing keys
/// keep their defaults; unknown keys are rejected.
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string dump_config(const ExperimentConfig& config);

using EnvLookup = std::function<std::optional<std::string>(const std::string& name)>;
inline constexpr const char* kEnvPrefix = "DECPF_";

/// Applies DECPF_SEED, DECPF_WORKERS, DECPF_OUT, DECPF_RUNS, DECPF_EPISODES
/// and DECPF_GRID when set. `lookup` defaults to std::getenv.
void apply_env_overrides(ExperimentConfig& config, const EnvLookup& lookup = {});

JointBelief initial_belief(const ExperimentConfig& config);

/// Child seed of run `run` of variant `variant`.
std::uint64_t run_seed(std::uint64_t master, std::size_t variant, std::size_t run);

struct Baseline {
  DpSolution solution;
  std::size_t cell = 0;
  double value = 0.0;  // V_0 at the snapped initial belief
};

Baseline solve_baseline(const ExperimentConfig& config, const EnvModel& model);

struct VariantTraces {
  BeliefUpdaterSpec variant;
  std::vector<LearnTrace> runs;
};

/// Runs every variant x run job on `config.workers` threads. The result is
/// independent of the worker count. A failing job aborts the sweep by
/// rethrowing its exception after all workers stop.
std::vector<VariantTraces> run_sweep(const ExperimentConfig& config, const EnvModel& model);

struct ReturnRow {
  std::int64_t episode = 0;
  std::string variant;
  double mean_return = 0.0;
  double stderr_return = 0.0;
  double baseline = 0.0;
};

/// Per variant and trace point: mean and standard error across runs.
/// Throws std::invalid_argument on empty input or runs whose trace points
/// disagree.
std::vector<ReturnRow> aggregate(const std::vector<VariantTraces>& traces, double baseline);

inline constexpr const char* kReturnsHeader = "episode,variant,mean_return,stderr,baseline";

std::string format_returns_csv(const std::vector<ReturnRow>& rows);
void emit_csv(const std::vector<VariantTraces>& traces, double baseline,
              const std::filesystem::path& path);

struct BoundRow {
  BoundParams params;
  HoeffdingBound hoeffding;
  double eta = 0.0;
  double accumulated = 0.0;
};

std::vector<BoundRow> bound_table(const ExperimentConfig& config, const EnvModel& model);
std::string format_bounds_csv(const std::vector<BoundRow>& rows);

enum class Stage { solve, train, bounds, full };

/// Writes the artifacts of `stage` into config.output:
///   solve  -> baseline.txt, q_table.csv, v_table.csv, policy.csv
///   train  -> baseline.txt, returns.csv
///   bounds -> bounds.csv
///   full   -> all of the above
/// and config.resolved.json for every stage.
void run_experiment(const ExperimentConfig& config, Stage stage = Stage::full);

/// Writes `text` to `path`, throwing std::runtime_error with the path on failure.
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace decpf
