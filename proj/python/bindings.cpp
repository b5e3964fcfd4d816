#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <stdexcept>

#include "decpf/experiments.hpp"
#include "decpf/particle_filter.hpp"

namespace py = pybind11;
using namespace decpf;

namespace {

Stage parse_stage(const std::string& s) {
  if (s == "solve") return Stage::solve;
  if (s == "train") return Stage::train;
  if (s == "bounds") return Stage::bounds;
  if (s == "full") return Stage::full;
  throw std::invalid_argument("unknown stage '" + s + "'");
}

// Generic single-marginal update: kernels[a][x][y].
std::vector<double> update(const std::vector<double>& pi, const std::vector<int>& gamma, int a,
                           const std::vector<std::vector<std::vector<double>>>& kernels) {
  if (gamma.size() != pi.size()) throw std::invalid_argument("gamma and pi differ in length");
  if (a < 0 || static_cast<std::size_t>(a) >= kernels.size())
    throw std::invalid_argument("action out of range");
  std::vector<StochasticMatrix> mats;
  for (const auto& k : kernels) {
    if (k.size() != pi.size()) throw std::invalid_argument("kernel size differs from pi");
    mats.emplace_back(k);
  }
  const auto out = exact_update(MarginalBelief(pi), Prescription{gamma}, a,
                                [&](int x, int act) { return mats[act].row(x); });
  return {out.probs().begin(), out.probs().end()};
}

BoundParams make_bound(std::size_t K, double epsilon, double delta_R, double delta, int T, int t,
                       double beta, double lipschitz) {
  BoundParams bp{K, epsilon, delta_R, delta, T, t, beta, lipschitz};
  validate(bp);
  return bp;
}

ExperimentConfig config_from(const std::string& json) { return parse_config(json); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Decentralized particle-filter Q-learning core";

  py::register_exception<std::invalid_argument>(m, "InvalidArgument", PyExc_ValueError);

  m.attr("RETURNS_HEADER") = kReturnsHeader;

  m.def("run_seed", &run_seed, py::arg("master"), py::arg("variant"), py::arg("run"),
        "Seed of one (variant, run) learner in a sweep.");

  m.def("smartgrid_reward",
        [](const std::vector<int>& states, const std::vector<int>& actions) {
          SmartGridParams p;
          p.num_agents = static_cast<int>(states.size());
          if (actions.size() != states.size())
            throw std::invalid_argument("states and actions differ in length");
          return smartgrid_reward(p, states, actions);
        },
        py::arg("states"), py::arg("actions"),
        "Reward of the default smartgrid instance with N = len(states).");

  m.def("exact_update", &update, py::arg("pi"), py::arg("gamma"), py::arg("action"),
        py::arg("kernels"), "Bayes update of one marginal; kernels[a][x][y].");

  m.def("particle_update",
        [](const std::vector<double>& pi, const std::vector<int>& gamma, int a,
           const std::vector<std::vector<std::vector<double>>>& kernels, std::size_t K,
           std::uint64_t seed) {
          if (gamma.size() != pi.size()) throw std::invalid_argument("gamma and pi differ in length");
          AgentDynamics ag;
          ag.num_states = static_cast<int>(pi.size());
          for (const auto& k : kernels) ag.kernels.emplace_back(k);
          ag.initial = pi;
          const EnvModel model({ag}, [](std::span<const int>, std::span<const int>) { return 0.0; });
          auto ps = init_particles(MarginalBelief(pi), K, 0, seed);
          ps = pf_step(std::move(ps), Prescription{gamma}, a, BlackBox(model));
          const auto est = estimate(ps);
          return std::vector<double>(est.probs().begin(), est.probs().end());
        },
        py::arg("pi"), py::arg("gamma"), py::arg("action"), py::arg("kernels"), py::arg("K"),
        py::arg("seed"), "One particle-filter step from K particles drawn from pi.");

  m.def("hoeffding",
        [](std::size_t K, double epsilon, double delta_R) {
          const auto h = hoeffding(K, epsilon, delta_R);
          return py::make_tuple(h.zeta, h.confidence);
        },
        py::arg("K"), py::arg("epsilon"), py::arg("delta_R"),
        "(zeta, confidence) for K particles.");

  m.def("accumulated_error",
        [](std::size_t K, double epsilon, double delta_R, double delta, int T, int t, double beta,
           double lipschitz) {
          return accumulated_error(make_bound(K, epsilon, delta_R, delta, T, t, beta, lipschitz));
        },
        py::arg("K"), py::arg("epsilon"), py::arg("delta_R"), py::arg("delta"), py::arg("T"),
        py::arg("t") = 0, py::arg("beta") = 0.0, py::arg("lipschitz") = 1.0);

  m.def("eta_error",
        [](std::size_t K, double epsilon, double delta_R, double delta, int T, int t, double beta,
           double lipschitz) {
          return eta_error(make_bound(K, epsilon, delta_R, delta, T, t, beta, lipschitz));
        },
        py::arg("K"), py::arg("epsilon"), py::arg("delta_R"), py::arg("delta") = 0.9,
        py::arg("T") = 10, py::arg("t") = 0, py::arg("beta") = 0.0, py::arg("lipschitz") = 1.0);

  m.def("resolve_config", [](const std::string& json) { return dump_config(config_from(json)); },
        py::arg("json") = "{}", "Parse and validate a JSON config; return it with defaults filled.");

  m.def("solve_baseline",
        [](const std::string& json) {
          const auto c = config_from(json);
          const auto model = build_smartgrid(c.environment);
          Baseline b;
          {
            py::gil_scoped_release release;
            b = solve_baseline(c, model);
          }
          return py::make_tuple(b.value, b.cell);
        },
        py::arg("json") = "{}", "(V at the snapped initial belief, its grid cell).");

  m.def("returns_csv",
        [](const std::string& json) {
          const auto c = config_from(json);
          const auto model = build_smartgrid(c.environment);
          py::gil_scoped_release release;
          const auto b = solve_baseline(c, model);
          return format_returns_csv(aggregate(run_sweep(c, model), b.value));
        },
        py::arg("json") = "{}", "Run the training sweep and return returns.csv as text.");

  m.def("run_experiment",
        [](const std::string& json, const std::string& stage) {
          const auto c = config_from(json);
          const auto st = parse_stage(stage);
          py::gil_scoped_release release;
          run_experiment(c, st);
        },
        py::arg("json"), py::arg("stage") = "full",
        "Run a pipeline stage and write its artifacts to the config's output directory.");
}
