#include "decpf/belief.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace decpf {

MarginalBelief::MarginalBelief(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw std::invalid_argument("MarginalBelief: empty");
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0)) throw std::invalid_argument("MarginalBelief: negative or NaN entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("MarginalBelief: entries sum to " + std::to_string(sum));
}

MarginalBelief MarginalBelief::point_mass(int num_states, int x) {
  std::vector<double> p(num_states, 0.0);
  p.at(x) = 1.0;
  return MarginalBelief(std::move(p));
}

MarginalBelief MarginalBelief::uniform(int num_states) {
  return MarginalBelief(std::vector<double>(num_states, 1.0 / num_states));
}

MarginalBelief exact_update(const MarginalBelief& pi, const Prescription& gamma, int a,
                            const EnvModel& model, int agent) {
  return exact_update(pi, gamma, a, [&](int x, int action) {
    return model.kernel_row(agent, x, action);
  });
}

JointBelief joint_update(const JointBelief& pibar, const JointPrescription& gbar,
                         std::span<const int> abar, const EnvModel& model) {
  if (pibar.size() != gbar.size() || pibar.size() != abar.size() ||
      static_cast<int>(pibar.size()) != model.num_agents())
    throw std::invalid_argument("joint_update: dimension mismatch");
  JointBelief next;
  next.reserve(pibar.size());
  for (std::size_t i = 0; i < pibar.size(); ++i)
    next.push_back(exact_update(pibar[i], gbar[i], abar[i], model, static_cast<int>(i)));
  return next;
}

double joint_prob(const JointBelief& pibar, std::span<const int> xbar) {
  if (pibar.size() != xbar.size()) throw std::invalid_argument("joint_prob: dimension mismatch");
  double p = 1.0;
  for (std::size_t i = 0; i < pibar.size(); ++i) p *= pibar[i][xbar[i]];
  return p;
}

double tv_distance(std::span<const double> p, std::span<const double> q) {
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) s += std::abs(p[k] - q[k]);
  return 0.5 * s;
}

// ---------------------------------------------------------------------------

namespace {

// Number of k-tuples of nonnegative integers with sum <= r, i.e. C(r + k, k).
std::size_t bounded_tuples(int r, int k) {
  std::size_t c = 1;
  for (int i = 1; i <= k; ++i) c = c * static_cast<std::size_t>(r + i) / static_cast<std::size_t>(i);
  return c;
}

}  // namespace

BeliefGrid::BeliefGrid(int resolution, std::vector<int> num_states)
    : resolution_(resolution), num_states_(std::move(num_states)) {
  if (resolution_ < 2) throw std::invalid_argument("BeliefGrid: resolution must be >= 2");
  if (num_states_.empty()) throw std::invalid_argument("BeliefGrid: need at least one agent");
  const int m = resolution_ - 1;
  marginal_points_.resize(num_states_.size());
  for (std::size_t i = 0; i < num_states_.size(); ++i) {
    const int n = num_states_[i];
    if (n <= 0) throw std::invalid_argument("BeliefGrid: empty state space");
    auto& pts = marginal_points_[i];
    pts.reserve(bounded_tuples(m, n - 1));
    // Lexicographic over (u_1, ..., u_{n-1}) with u_0 = m - sum; this is
    // exactly the order rank() assigns.
    std::vector<int> u(n, 0);
    u[0] = m;
    while (true) {
      std::vector<double> p(n);
      for (int x = 0; x < n; ++x) p[x] = static_cast<double>(u[x]) / m;
      pts.emplace_back(std::move(p));
      int j = n - 1;
      while (j >= 1) {
        if (u[0] > 0) {
          ++u[j];
          --u[0];
          break;
        }
        u[0] += u[j];
        u[j] = 0;
        --j;
      }
      if (j < 1) break;
    }
    num_cells_ *= pts.size();
  }
}

BeliefGrid::BeliefGrid(int resolution, const EnvModel& model)
    : BeliefGrid(resolution, [&] {
        std::vector<int> v(model.num_agents());
        for (int i = 0; i < model.num_agents(); ++i) v[i] = model.num_states(i);
        return v;
      }()) {}

std::size_t BeliefGrid::rank(int agent, std::span<const int> units) const {
  const int n = num_states_[agent];
  if (n == 1) return 0;
  if (n == 2) return static_cast<std::size_t>(units[1]);
  std::size_t r = 0;
  int budget = resolution_ - 1;
  for (int j = 1; j < n; ++j) {
    for (int v = 0; v < units[j]; ++v) r += bounded_tuples(budget - v, n - 1 - j);
    budget -= units[j];
  }
  return r;
}

std::size_t BeliefGrid::snap_marginal(int agent, std::span<const double> probs) const {
  const int n = num_states_[agent];
  if (static_cast<int>(probs.size()) != n)
    throw std::invalid_argument("BeliefGrid::snap_marginal: wrong marginal size");
  const int m = resolution_ - 1;
  double total = 0.0;
  for (double p : probs) total += p;

  int floor_units[16];
  double frac[16];
  std::vector<int> big_units;
  std::vector<double> big_frac;
  int* units = floor_units;
  double* fr = frac;
  if (n > 16) {
    big_units.resize(n);
    big_frac.resize(n);
    units = big_units.data();
    fr = big_frac.data();
  }
  int assigned = 0;
  for (int x = 0; x < n; ++x) {
    const double scaled = probs[x] / total * m;
    const double f = std::floor(scaled);
    units[x] = static_cast<int>(f);
    fr[x] = scaled - f;
    assigned += units[x];
  }
  for (int remaining = m - assigned; remaining > 0; --remaining) {
    int best = 0;
    for (int x = 1; x < n; ++x)
      if (fr[x] > fr[best]) best = x;
    ++units[best];
    fr[best] = -1.0;
  }
  return rank(agent, std::span<const int>(units, static_cast<std::size_t>(n)));
}

std::size_t BeliefGrid::snap(const JointBelief& pibar) const {
  if (pibar.size() != num_states_.size())
    throw std::invalid_argument("BeliefGrid::snap: wrong number of agents");
  std::size_t cell = 0;
  for (std::size_t i = 0; i < pibar.size(); ++i)
    cell = cell * marginal_points_[i].size() + snap_marginal(static_cast<int>(i), pibar[i].probs());
  return cell;
}

std::size_t BeliefGrid::joint_cell(std::span<const std::size_t> marginal_cells) const {
  std::size_t cell = 0;
  for (std::size_t i = 0; i < marginal_points_.size(); ++i)
    cell = cell * marginal_points_[i].size() + marginal_cells[i];
  return cell;
}

std::vector<std::size_t> BeliefGrid::split_cell(std::size_t cell) const {
  std::vector<std::size_t> out(marginal_points_.size());
  for (std::size_t i = marginal_points_.size(); i-- > 0;) {
    out[i] = cell % marginal_points_[i].size();
    cell /= marginal_points_[i].size();
  }
  return out;
}

JointBelief BeliefGrid::point(std::size_t cell) const {
  const auto parts = split_cell(cell);
  JointBelief b;
  b.reserve(parts.size());
  for (std::size_t i = 0; i < parts.size(); ++i) b.push_back(marginal_points_[i][parts[i]]);
  return b;
}

}  // namespace decpf
