#include "decpf/rl.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <memory>
#include <stdexcept>

#include "decpf/particle_filter.hpp"

namespace decpf {

std::string BeliefUpdaterSpec::label() const {
  return kind == Kind::exact ? std::string("exact") : "pf_K" + std::to_string(particles);
}

void validate(const LearnerConfig& c) {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("learner." + field + ": " + why);
  };
  if (!(c.delta >= 0.0 && c.delta < 1.0)) fail("delta", "must lie in [0, 1)");
  if (!(c.alpha >= 0.0 && c.alpha <= 1.0)) fail("alpha", "must lie in [0, 1]");
  if (!(c.epsilon >= 0.0 && c.epsilon <= 1.0)) fail("epsilon", "must lie in [0, 1]");
  if (!(c.epsilon_decay > 0.0 && c.epsilon_decay <= 1.0)) fail("epsilon_decay", "must lie in (0, 1]");
  if (!(c.epsilon_min >= 0.0 && c.epsilon_min <= 1.0)) fail("epsilon_min", "must lie in [0, 1]");
  if (c.horizon < 1) fail("horizon", "must be at least 1");
  if (c.episodes < 0) fail("episodes", "must be nonnegative");
  if (c.trajectory_length < 0) fail("trajectory_length", "must be nonnegative");
  if (c.grid_resolution < 2) fail("grid_resolution", "must be at least 2");
  if (c.eval_interval < 1) fail("eval_interval", "must be at least 1");
  if (c.window < 1) fail("window", "must be at least 1");
  if (c.updater.kind == BeliefUpdaterSpec::Kind::particle && c.updater.particles < 1)
    fail("updater", "particle count K must be at least 1");
}

std::uint64_t config_hash(const LearnerConfig& c) {
  auto bits = [](double d) {
    std::uint64_t u;
    std::memcpy(&u, &d, sizeof u);
    return u;
  };
  return derive_seed(0x6465637066ULL,
                     {static_cast<std::uint64_t>(c.horizon), c.infinite ? 1ULL : 0ULL,
                      static_cast<std::uint64_t>(c.trajectory_length),
                      static_cast<std::uint64_t>(c.episodes), bits(c.delta), bits(c.alpha),
                      bits(c.epsilon), bits(c.epsilon_decay), bits(c.epsilon_min),
                      static_cast<std::uint64_t>(c.updater.kind), c.updater.particles,
                      static_cast<std::uint64_t>(c.grid_resolution), c.seed,
                      static_cast<std::uint64_t>(c.eval_interval),
                      static_cast<std::uint64_t>(c.window)});
}

namespace {

class BeliefTracker {
 public:
  virtual ~BeliefTracker() = default;
  virtual void reset(const JointBelief& pi0) = 0;
  virtual void update(const JointPrescription& gbar, std::span<const int> abar) = 0;
  virtual const JointBelief& belief() const = 0;
};

class ExactTracker final : public BeliefTracker {
 public:
  explicit ExactTracker(const EnvModel& model) : model_(model) {}
  void reset(const JointBelief& pi0) override { belief_ = pi0; }
  void update(const JointPrescription& gbar, std::span<const int> abar) override {
    belief_ = joint_update(belief_, gbar, abar, model_);
  }
  const JointBelief& belief() const override { return belief_; }

 private:
  const EnvModel& model_;
  JointBelief belief_;
};

// Beliefs live as particle sets between steps; the empirical estimate is
// only used for table lookup.
class ParticleTracker final : public BeliefTracker {
 public:
  ParticleTracker(BlackBox sampler, std::size_t K, std::uint64_t seed, int num_agents)
      : sampler_(sampler), K_(K) {
    sets_.resize(num_agents);
    for (int i = 0; i < num_agents; ++i) {
      sets_[i].agent = i;
      sets_[i].rng.seed(derive_seed(seed, {static_cast<std::uint64_t>(i)}));
    }
  }
  void reset(const JointBelief& pi0) override {
    for (std::size_t i = 0; i < sets_.size(); ++i) reinit_particles(sets_[i], pi0[i], K_);
    belief_ = estimate(sets_);
  }
  void update(const JointPrescription& gbar, std::span<const int> abar) override {
    sets_ = bank_update(std::move(sets_), gbar, abar, sampler_);
    belief_ = estimate(sets_);
  }
  const JointBelief& belief() const override { return belief_; }

 private:
  BlackBox sampler_;
  std::size_t K_;
  std::vector<ParticleSet> sets_;
  JointBelief belief_;
};

std::unique_ptr<BeliefTracker> make_tracker(const LearnerConfig& c, const EnvModel& model) {
  if (c.updater.kind == BeliefUpdaterSpec::Kind::exact) return std::make_unique<ExactTracker>(model);
  return std::make_unique<ParticleTracker>(BlackBox(model), c.updater.particles,
                                           derive_seed(c.seed, {1}), model.num_agents());
}

SystemState sample_from(const JointBelief& pibar, Rng& rng) {
  SystemState s;
  s.states.resize(pibar.size());
  for (std::size_t i = 0; i < pibar.size(); ++i) {
    const double u = uniform01(rng);
    double acc = 0.0;
    int pick = -1;
    for (int x = 0; x < static_cast<int>(pibar[i].size()); ++x) {
      if (pibar[i][x] <= 0.0) continue;
      pick = x;
      acc += pibar[i][x];
      if (u < acc) break;
    }
    s.states[i] = pick;
  }
  return s;
}

void check_inputs(const LearnerConfig& config, const EnvModel& model, const JointBelief& pi0) {
  validate(config);
  if (static_cast<int>(pi0.size()) != model.num_agents())
    throw std::invalid_argument("initial belief has the wrong number of agents");
  for (int i = 0; i < model.num_agents(); ++i)
    if (static_cast<int>(pi0[i].size()) != model.num_states(i))
      throw std::invalid_argument("initial belief has the wrong state-space size");
}

class TraceRecorder {
 public:
  TraceRecorder(const TraceEvaluator& eval, std::uint64_t hash)
      : eval_(eval), start_(std::chrono::steady_clock::now()) {
    trace_.config_hash = hash;
  }
  void record(const QFunction& q, std::int64_t point) {
    if (!eval_) return;
    trace_.points.push_back(point);
    trace_.returns.push_back(eval_(q, point));
    trace_.elapsed_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count());
  }
  LearnTrace take() { return std::move(trace_); }

 private:
  const TraceEvaluator& eval_;
  std::chrono::steady_clock::time_point start_;
  LearnTrace trace_;
};

}  // namespace

LearnResult run_finite(const LearnerConfig& config, const EnvModel& model, const JointBelief& pi0,
                       const TraceEvaluator& evaluate) {
  check_inputs(config, model, pi0);
  const BeliefGrid grid(config.grid_resolution, model);
  const PrescriptionSpace space(model);
  const BlackBox env(model);
  const auto T = static_cast<std::size_t>(config.horizon);
  const std::size_t cells = grid.num_cells();

  LearnResult out;
  out.q = QFunction(T, cells, space.size(), 0.0);
  out.v = ValueTable(T + 1, cells, 0.0);
  out.visits.assign(T * cells, 0);
  TraceRecorder recorder(evaluate, config_hash(config));

  Rng rng(derive_seed(config.seed, {0}));
  auto tracker = make_tracker(config, model);
  std::vector<int> actions(model.num_agents());
  double eps = config.epsilon;

  for (int e = 1; e <= config.episodes; ++e) {
    tracker->reset(pi0);
    SystemState x = sample_from(pi0, rng);
    std::size_t cell = grid.snap(tracker->belief());
    for (std::size_t t = 0; t < T; ++t) {
      const auto choice = epsilon_greedy(out.q.row(t, cell), eps, rng);
      out.v(t, cell) = out.q(t, cell, choice.greedy);
      ++out.visits[t * cells + cell];

      space.act(choice.explore, x.states, actions);
      auto res = env.step(x, actions, rng);
      tracker->update(space.decode(choice.explore), actions);
      const std::size_t next_cell = grid.snap(tracker->belief());

      const double target = res.reward + config.delta * out.v(t + 1, next_cell);
      double& q = out.q(t, cell, choice.explore);
      q += config.alpha * (target - q);

      x = std::move(res.next);
      cell = next_cell;
    }
    eps = std::max(config.epsilon_min, eps * config.epsilon_decay);
    if (e % config.eval_interval == 0 || e == config.episodes) recorder.record(out.q, e);
  }

  out.policy = greedy_policy(out.q);
  out.trace = recorder.take();
  return out;
}

LearnResult run_infinite(const LearnerConfig& config, const EnvModel& model,
                         const JointBelief& pi0, const TraceEvaluator& evaluate) {
  check_inputs(config, model, pi0);
  const BeliefGrid grid(config.grid_resolution, model);
  const PrescriptionSpace space(model);
  const BlackBox env(model);
  const std::size_t cells = grid.num_cells();

  LearnResult out;
  out.q = QFunction(1, cells, space.size(), 0.0);
  out.v = ValueTable(1, cells, 0.0);
  out.visits.assign(cells, 0);
  TraceRecorder recorder(evaluate, config_hash(config));

  Rng rng(derive_seed(config.seed, {0}));
  auto tracker = make_tracker(config, model);
  std::vector<int> actions(model.num_agents());
  double eps = config.epsilon;

  tracker->reset(pi0);
  SystemState x = sample_from(pi0, rng);
  std::size_t cell = grid.snap(tracker->belief());
  for (std::int64_t s = 1; s <= config.trajectory_length; ++s) {
    const auto choice = epsilon_greedy(out.q.row(0, cell), eps, rng);
    out.v(0, cell) = out.q(0, cell, choice.greedy);
    ++out.visits[cell];

    space.act(choice.explore, x.states, actions);
    auto res = env.step(x, actions, rng);
    tracker->update(space.decode(choice.explore), actions);
    const std::size_t next_cell = grid.snap(tracker->belief());

    const double target = res.reward + config.delta * out.v(0, next_cell);
    double& q = out.q(0, cell, choice.explore);
    q += config.alpha * (target - q);

    x = std::move(res.next);
    cell = next_cell;
    if (s % config.window == 0 || s == config.trajectory_length) {
      eps = std::max(config.epsilon_min, eps * config.epsilon_decay);
      recorder.record(out.q, s);
    }
  }

  out.policy = greedy_policy(out.q);
  out.trace = recorder.take();
  return out;
}

double evaluate_greedy(const QFunction& q, const EnvModel& model, const BeliefGrid& grid,
                       const JointBelief& pi0, int T, double delta, std::size_t rollouts,
                       Rng& rng) {
  return evaluate_policy_return(model, grid, greedy_policy(q), pi0, T, delta, rollouts, rng).mean;
}

TraceEvaluator make_greedy_evaluator(const EnvModel& model, int grid_resolution,
                                     const JointBelief& pi0, int T, double delta,
                                     std::size_t rollouts, std::uint64_t seed) {
  auto grid = std::make_shared<const BeliefGrid>(grid_resolution, model);
  return [&model, grid, pi0, T, delta, rollouts, seed](const QFunction& q, std::int64_t point) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(point)}));
    return evaluate_greedy(q, model, *grid, pi0, T, delta, rollouts, rng);
  };
}

}  // namespace decpf
