#include "decpf/dp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>

#include "decpf/format.hpp"

namespace decpf {

namespace {

// Advances a mixed-radix joint state; false after the last one.
bool next_joint_state(std::vector<int>& xs, const EnvModel& model) {
  for (std::size_t i = xs.size(); i-- > 0;) {
    if (++xs[i] < model.num_states(static_cast<int>(i))) return true;
    xs[i] = 0;
  }
  return false;
}

void check_discount(double delta, bool allow_one) {
  const bool ok = delta >= 0.0 && (allow_one ? delta <= 1.0 : delta < 1.0);
  if (!ok) throw std::invalid_argument("discount factor outside the admissible range");
}

std::vector<int> sample_joint(const JointBelief& pibar, Rng& rng) {
  std::vector<int> xs(pibar.size());
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
    xs[i] = pick;
  }
  return xs;
}

}  // namespace

PolicyTable greedy_policy(const QFunction& q) {
  PolicyTable p(q.stages, q.cells);
  for (std::size_t t = 0; t < q.stages; ++t)
    for (std::size_t c = 0; c < q.cells; ++c) p(t, c) = greedy_index(q.row(t, c));
  return p;
}

GridBeliefModel::GridBeliefModel(const EnvModel& model, BeliefGrid grid)
    : model_(&model), grid_(std::move(grid)), space_(model) {
  if (grid_.num_agents() != model.num_agents())
    throw std::invalid_argument("GridBeliefModel: grid and model disagree on agent count");
  const std::size_t cells = grid_.num_cells();
  const std::size_t gs = space_.size();
  offsets_.reserve(cells * gs + 1);
  offsets_.push_back(0);
  const std::size_t n = static_cast<std::size_t>(model.num_agents());
  std::vector<int> xs(n), as(n);
  for (std::size_t c = 0; c < cells; ++c) {
    const JointBelief point = grid_.point(c);
    for (std::size_t g = 0; g < gs; ++g) {
      const JointPrescription gbar = space_.decode(g);
      std::fill(xs.begin(), xs.end(), 0);
      do {
        const double p = joint_prob(point, xs);
        if (p > 0.0) {
          space_.act(g, xs, as);
          BeliefOutcome o;
          o.prob = p;
          o.reward = model.reward(xs, as);
          o.next_cell = grid_.snap(joint_update(point, gbar, as, model));
          outcomes_.push_back(o);
        }
      } while (next_joint_state(xs, model));
      offsets_.push_back(outcomes_.size());
    }
  }
}

double GridBeliefModel::backup(std::size_t cell, std::size_t g, std::span<const double> v_next,
                               double delta) const {
  double q = 0.0;
  for (const auto& o : outcomes(cell, g)) q += o.prob * (o.reward + delta * v_next[o.next_cell]);
  return q;
}

double q_backup(const EnvModel& model, const BeliefGrid& grid, const JointBelief& pibar,
                const JointPrescription& gbar, std::span<const double> v_next, double delta) {
  check_discount(delta, true);
  if (static_cast<int>(pibar.size()) != model.num_agents() || gbar.size() != pibar.size())
    throw std::invalid_argument("q_backup: dimension mismatch");
  if (v_next.size() != grid.num_cells())
    throw std::invalid_argument("q_backup: continuation values do not cover the grid");
  std::vector<int> xs(pibar.size(), 0);
  std::vector<int> as(pibar.size());
  double q = 0.0;
  do {
    const double p = joint_prob(pibar, xs);
    if (p == 0.0) continue;
    for (std::size_t i = 0; i < xs.size(); ++i) as[i] = gbar[i](xs[i]);
    const double r = model.reward(xs, as);
    const double cont = delta == 0.0 ? 0.0 : v_next[grid.snap(joint_update(pibar, gbar, as, model))];
    q += p * (r + delta * cont);
  } while (next_joint_state(xs, model));
  return q;
}

DpSolution backward_recursion(const GridBeliefModel& bm, int T, double delta) {
  if (T < 1) throw std::invalid_argument("backward_recursion: horizon must be at least 1");
  check_discount(delta, true);
  const std::size_t cells = bm.num_cells();
  const std::size_t gs = bm.num_prescriptions();
  const auto stages = static_cast<std::size_t>(T);
  DpSolution sol{QFunction(stages, cells, gs), ValueTable(stages + 1, cells, 0.0),
                 PolicyTable(stages, cells), {}};
  for (std::size_t t = stages; t-- > 0;) {
    const auto v_next = sol.v.stage(t + 1);
    for (std::size_t c = 0; c < cells; ++c) {
      auto row = sol.q.row(t, c);
      for (std::size_t g = 0; g < gs; ++g) row[g] = bm.backup(c, g, v_next, delta);
      const std::size_t best = greedy_index(row);
      sol.policy(t, c) = best;
      sol.v(t, c) = row[best];
    }
  }
  return sol;
}

DpSolution backward_recursion(const EnvModel& model, const BeliefGrid& grid, int T, double delta) {
  return backward_recursion(GridBeliefModel(model, grid), T, delta);
}

DpSolution value_iteration(const GridBeliefModel& bm, double delta, double tol,
                           int max_iterations) {
  check_discount(delta, false);
  if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tolerance must be positive");
  const std::size_t cells = bm.num_cells();
  const std::size_t gs = bm.num_prescriptions();
  DpSolution sol{QFunction(1, cells, gs), ValueTable(1, cells, 0.0), PolicyTable(1, cells), {}};
  std::vector<double> v_old(cells, 0.0);
  for (int it = 0; it < max_iterations; ++it) {
    double change = 0.0;
    for (std::size_t c = 0; c < cells; ++c) {
      auto row = sol.q.row(0, c);
      for (std::size_t g = 0; g < gs; ++g) row[g] = bm.backup(c, g, v_old, delta);
      const std::size_t best = greedy_index(row);
      sol.policy(0, c) = best;
      sol.v(0, c) = row[best];
      change = std::max(change, std::abs(row[best] - v_old[c]));
    }
    sol.residuals.push_back(change);
    std::copy(sol.v.values.begin(), sol.v.values.end(), v_old.begin());
    if (change < tol) return sol;
  }
  throw std::runtime_error("value_iteration: no convergence after " +
                           std::to_string(max_iterations) + " sweeps");
}

DpSolution value_iteration(const EnvModel& model, const BeliefGrid& grid, double delta,
                           double tol, int max_iterations) {
  return value_iteration(GridBeliefModel(model, grid), delta, tol, max_iterations);
}

int value_iteration_sweep_bound(double delta, double tol, double reward_span) {
  if (delta == 0.0 || reward_span <= 0.0) return 1;
  const double k = std::log(tol * (1.0 - delta) / reward_span) / std::log(delta);
  return std::max(1, static_cast<int>(std::ceil(k)));
}

ReturnEstimate mean_and_stderr(std::span<const double> xs) {
  ReturnEstimate out;
  if (xs.empty()) return out;
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / static_cast<double>(xs.size());
  if (xs.size() < 2) return out;
  const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  if (*lo == *hi) {
    out.mean = *lo;
    return out;
  }
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  const double var = ss / static_cast<double>(xs.size() - 1);
  out.std_error = std::sqrt(var / static_cast<double>(xs.size()));
  return out;
}

ReturnEstimate evaluate_policy_return(const EnvModel& model, const BeliefGrid& grid,
                                      const PolicyTable& policy, const JointBelief& pi0, int T,
                                      double delta, std::size_t num_rollouts, Rng& rng) {
  if (policy.cells != grid.num_cells())
    throw std::invalid_argument("evaluate_policy_return: policy does not cover the grid");
  if (!policy.stationary() && policy.stages < static_cast<std::size_t>(T))
    throw std::invalid_argument("evaluate_policy_return: policy shorter than the horizon");
  const PrescriptionSpace space(model);
  std::vector<double> returns;
  returns.reserve(num_rollouts);
  std::vector<int> as(pi0.size());
  for (std::size_t r = 0; r < num_rollouts; ++r) {
    SystemState x{sample_joint(pi0, rng)};
    JointBelief belief = pi0;
    double total = 0.0;
    double discount = 1.0;
    for (int t = 0; t < T; ++t) {
      const std::size_t g = policy(static_cast<std::size_t>(t), grid.snap(belief));
      space.act(g, x.states, as);
      auto res = step(model, x, as, rng);
      total += discount * res.reward;
      discount *= delta;
      belief = joint_update(belief, space.decode(g), as, model);
      x = std::move(res.next);
    }
    returns.push_back(total);
  }
  return mean_and_stderr(returns);
}

// ---------------------------------------------------------------------------

namespace {

template <class Values>
void dump(const std::filesystem::path& path, const char* kind, std::size_t stages,
          std::size_t cells, std::size_t width, const Values& values) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << kind << ',' << stages << ',' << cells << ',' << width << '\n';
  for (std::size_t r = 0; r < stages * cells; ++r) {
    for (std::size_t k = 0; k < width; ++k) {
      if (k) os << ',';
      const auto v = values[r * width + k];
      if constexpr (std::is_floating_point_v<std::decay_t<decltype(v)>>) os << format_double(v);
      else os << v;
    }
    os << '\n';
  }
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

struct Dump {
  std::string kind;
  std::size_t stages = 0, cells = 0, width = 0;
  std::vector<double> values;
};

Dump load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  Dump d;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error(path.string() + ": empty table dump");
  std::stringstream hs(line);
  std::string field;
  std::vector<std::string> head;
  while (std::getline(hs, field, ',')) head.push_back(field);
  if (head.size() != 4) throw std::runtime_error(path.string() + ": malformed header");
  d.kind = head[0];
  d.stages = std::stoull(head[1]);
  d.cells = std::stoull(head[2]);
  d.width = std::stoull(head[3]);
  d.values.reserve(d.stages * d.cells * d.width);
  while (std::getline(is, line)) {
    std::stringstream ls(line);
    while (std::getline(ls, field, ',')) d.values.push_back(std::stod(field));
  }
  if (d.values.size() != d.stages * d.cells * d.width)
    throw std::runtime_error(path.string() + ": value count does not match header");
  return d;
}

}  // namespace

void write_table(const std::filesystem::path& path, const QFunction& q) {
  dump(path, "q", q.stages, q.cells, q.prescriptions, q.values);
}

void write_table(const std::filesystem::path& path, const ValueTable& v) {
  dump(path, "v", v.stages, v.cells, 1, v.values);
}

void write_table(const std::filesystem::path& path, const PolicyTable& p) {
  dump(path, "policy", p.stages, p.cells, 1, p.values);
}

QFunction read_q_table(const std::filesystem::path& path) {
  auto d = load(path);
  if (d.kind != "q") throw std::runtime_error(path.string() + ": not a q table");
  QFunction q(d.stages, d.cells, d.width);
  q.values = std::move(d.values);
  return q;
}

ValueTable read_value_table(const std::filesystem::path& path) {
  auto d = load(path);
  if (d.kind != "v" || d.width != 1) throw std::runtime_error(path.string() + ": not a value table");
  ValueTable v(d.stages, d.cells);
  v.values = std::move(d.values);
  return v;
}

}  // namespace decpf
