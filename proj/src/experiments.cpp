#include "decpf/experiments.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "decpf/format.hpp"

namespace decpf {

using nlohmann::json;

namespace {

void require(bool ok, const std::string& field, const std::string& why) {
  if (!ok) throw std::invalid_argument(field + ": " + why);
}

}  // namespace

// ---------------------------------------------------------------------------
// Analytic bounds

void validate(const BoundParams& bp) {
  require(bp.K >= 1, "bounds.K", "must be at least 1");
  require(bp.delta_R >= 0.0, "bounds.delta_R", "must be nonnegative");
  require(bp.delta >= 0.0 && bp.delta < 1.0, "bounds.delta", "must lie in [0, 1)");
  require(bp.epsilon >= 0.0, "bounds.epsilon", "must be nonnegative");
  require(bp.beta >= 0.0, "bounds.beta", "must be nonnegative");
  require(bp.T >= 1, "bounds.T", "must be at least 1");
  require(bp.t >= 0 && bp.t < bp.T, "bounds.t", "must lie in [0, T)");
}

HoeffdingBound hoeffding(std::size_t K, double epsilon, double delta_R) {
  require(K >= 1, "K", "must be at least 1");
  require(epsilon >= 0.0, "epsilon", "must be nonnegative");
  require(delta_R >= 0.0, "delta_R", "must be nonnegative");
  if (delta_R == 0.0) return {0.0, 1.0};
  const double zeta =
      std::exp(-2.0 * static_cast<double>(K) * epsilon * epsilon / (delta_R * delta_R));
  return {zeta, 1.0 - zeta};
}

double hoeffding_confidence(std::size_t K, double epsilon, double delta_R) {
  return hoeffding(K, epsilon, delta_R).confidence;
}

double eta_error(const BoundParams& bp) {
  validate(bp);
  const double zeta = hoeffding(bp.K, bp.epsilon, bp.delta_R).zeta;
  return (1.0 - zeta) * bp.epsilon + zeta * bp.delta_R;
}

double accumulated_error(const BoundParams& bp) {
  const double eta = eta_error(bp);
  const int tail = bp.T - bp.t - 1;
  const double geometric = bp.delta * (1.0 - std::pow(bp.delta, tail)) / (1.0 - bp.delta);
  return eta + geometric * (eta + bp.beta);
}

// ---------------------------------------------------------------------------
// Configuration

void validate(const ExperimentConfig& c) {
  validate(c.environment);
  validate(c.learner);
  require(c.runs >= 1, "runs", "must be at least 1");
  require(!c.variants.empty(), "variants", "must name at least one belief updater");
  for (const auto& v : c.variants)
    require(v.kind == BeliefUpdaterSpec::Kind::exact || v.particles >= 1, "variants",
            "particle count K must be at least 1");
  std::set<std::string> labels;
  for (const auto& v : c.variants)
    require(labels.insert(v.label()).second, "variants", "duplicate variant " + v.label());
  require(c.workers >= 1, "workers", "must be at least 1");
  require(!c.output.empty(), "output", "must be a directory path");
  require(c.eval_rollouts >= 1, "evaluation.rollouts", "must be at least 1");
  require(c.eval_horizon >= 1, "evaluation.horizon", "must be at least 1");
  require(c.bounds.epsilon >= 0.0, "bounds.epsilon", "must be nonnegative");
  require(c.bounds.beta >= 0.0, "bounds.beta", "must be nonnegative");
  require(!c.bounds.delta_R || *c.bounds.delta_R >= 0.0, "bounds.delta_R",
          "must be nonnegative");
  for (auto K : c.bounds.particle_counts) require(K >= 1, "bounds.particle_counts", "K >= 1");
  require(c.bounds.t >= 0, "bounds.t", "must be nonnegative");
  if (!c.learner.infinite)
    require(c.bounds.t < c.learner.horizon, "bounds.t", "must be below learner.horizon");
}

namespace {

BeliefUpdaterSpec parse_variant(const json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "exact") return BeliefUpdaterSpec::exact();
    std::string_view digits;
    if (s.rfind("particle:", 0) == 0) digits = std::string_view(s).substr(9);
    else if (s.rfind("pf_K", 0) == 0) digits = std::string_view(s).substr(4);
    std::size_t K = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), K);
    if (digits.empty() || ec != std::errc() || ptr != digits.data() + digits.size())
      throw std::invalid_argument("variants: unrecognized variant \"" + s +
                                  "\" (expected exact, particle:<K> or pf_K<K>)");
    return BeliefUpdaterSpec::particle(K);
  }
  if (j.is_object()) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "exact") return BeliefUpdaterSpec::exact();
    if (kind == "particle") return BeliefUpdaterSpec::particle(j.at("particles").get<std::size_t>());
    throw std::invalid_argument("variants: unknown kind \"" + kind + "\"");
  }
  throw std::invalid_argument("variants: each entry must be a string or an object");
}

json variant_json(const BeliefUpdaterSpec& v) {
  if (v.kind == BeliefUpdaterSpec::Kind::exact) return {{"kind", "exact"}};
  return {{"kind", "particle"}, {"particles", v.particles}};
}

// Reads `obj[key]` into `out` when present, noting the key as consumed.
class Reader {
 public:
  Reader(const json& obj, std::string scope) : obj_(obj), scope_(std::move(scope)) {
    if (!obj_.is_object()) throw std::invalid_argument(name_of("") + "must be a JSON object");
  }
  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      throw std::invalid_argument(name_of(key) + "has the wrong type (" + e.what() + ")");
    }
  }
  const json* child(const char* key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }
  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!seen_.count(it.key())) throw std::invalid_argument(name_of(it.key()) + "unknown key");
  }

 private:
  std::string name_of(const std::string& key) const {
    std::string n = scope_;
    if (!key.empty()) n += (n.empty() ? "" : ".") + key;
    return (n.empty() ? std::string("config") : n) + ": ";
  }
  const json& obj_;
  std::string scope_;
  std::set<std::string> seen_;
};

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  ExperimentConfig c;
  Reader top(doc, "");
  if (const json* env = top.child("environment")) {
    Reader r(*env, "environment");
    auto& e = c.environment;
    r.get("num_agents", e.num_agents);
    r.get("eps1", e.eps1);
    r.get("eps2", e.eps2);
    r.get("mixing_matrix", e.mixing_matrix);
    r.get("c0", e.c0);
    r.get("c1", e.c1);
    r.get("target_dist", e.target_dist);
    r.get("initial_dist", e.initial_dist);
    r.finish();
  }
  if (const json* lj = top.child("learner")) {
    Reader r(*lj, "learner");
    auto& l = c.learner;
    r.get("horizon", l.horizon);
    r.get("infinite", l.infinite);
    r.get("trajectory_length", l.trajectory_length);
    r.get("episodes", l.episodes);
    r.get("delta", l.delta);
    r.get("alpha", l.alpha);
    r.get("epsilon", l.epsilon);
    r.get("epsilon_decay", l.epsilon_decay);
    r.get("epsilon_min", l.epsilon_min);
    r.get("grid_resolution", l.grid_resolution);
    r.get("eval_interval", l.eval_interval);
    r.get("window", l.window);
    r.finish();
  }
  if (const json* ej = top.child("evaluation")) {
    Reader r(*ej, "evaluation");
    r.get("rollouts", c.eval_rollouts);
    r.get("horizon", c.eval_horizon);
    r.finish();
  }
  if (const json* vj = top.child("variants")) {
    if (!vj->is_array()) throw std::invalid_argument("variants: must be an array");
    c.variants.clear();
    for (const auto& v : *vj) c.variants.push_back(parse_variant(v));
  }
  top.get("runs", c.runs);
  top.get("seed", c.seed);
  top.get("workers", c.workers);
  top.get("output", c.output);
  if (const json* bj = top.child("bounds")) {
    Reader r(*bj, "bounds");
    auto& b = c.bounds;
    r.get("epsilon", b.epsilon);
    r.get("beta", b.beta);
    r.get("lipschitz", b.lipschitz);
    r.get("t", b.t);
    if (const json* d = r.child("delta_R"); d && !d->is_null()) {
      if (!d->is_number()) throw std::invalid_argument("bounds.delta_R: must be a number");
      b.delta_R = d->get<double>();
    }
    r.get("particle_counts", b.particle_counts);
    r.finish();
  }
  top.finish();
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

std::string dump_config(const ExperimentConfig& c) {
  const auto& e = c.environment;
  const auto& l = c.learner;
  json variants = json::array();
  for (const auto& v : c.variants) variants.push_back(variant_json(v));
  json bounds = {{"epsilon", c.bounds.epsilon},
                 {"beta", c.bounds.beta},
                 {"lipschitz", c.bounds.lipschitz},
                 {"t", c.bounds.t},
                 {"particle_counts", c.bounds.particle_counts}};
  bounds["delta_R"] = c.bounds.delta_R ? json(*c.bounds.delta_R) : json(nullptr);
  json doc = {
      {"environment",
       {{"num_agents", e.num_agents},
        {"eps1", e.eps1},
        {"eps2", e.eps2},
        {"mixing_matrix", e.mixing_matrix},
        {"c0", e.c0},
        {"c1", e.c1},
        {"target_dist", e.target_dist},
        {"initial_dist", e.initial_dist}}},
      {"learner",
       {{"horizon", l.horizon},
        {"infinite", l.infinite},
        {"trajectory_length", l.trajectory_length},
        {"episodes", l.episodes},
        {"delta", l.delta},
        {"alpha", l.alpha},
        {"epsilon", l.epsilon},
        {"epsilon_decay", l.epsilon_decay},
        {"epsilon_min", l.epsilon_min},
        {"grid_resolution", l.grid_resolution},
        {"eval_interval", l.eval_interval},
        {"window", l.window}}},
      {"evaluation", {{"rollouts", c.eval_rollouts}, {"horizon", c.eval_horizon}}},
      {"variants", variants},
      {"runs", c.runs},
      {"seed", c.seed},
      {"workers", c.workers},
      {"output", c.output},
      {"bounds", bounds}};
  return doc.dump(2) + "\n";
}

namespace {

template <class T>
T parse_number(const std::string& name, const std::string& text) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
    throw std::invalid_argument(name + ": expected an integer, got \"" + text + "\"");
  return value;
}

}  // namespace

void apply_env_overrides(ExperimentConfig& c, const EnvLookup& lookup) {
  auto get = [&](const char* suffix) -> std::optional<std::string> {
    const std::string name = std::string(kEnvPrefix) + suffix;
    if (lookup) return lookup(name);
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
  const std::string p = kEnvPrefix;
  if (auto v = get("SEED")) c.seed = parse_number<std::uint64_t>(p + "SEED", *v);
  if (auto v = get("WORKERS")) c.workers = parse_number<int>(p + "WORKERS", *v);
  if (auto v = get("OUT")) c.output = *v;
  if (auto v = get("RUNS")) c.runs = parse_number<int>(p + "RUNS", *v);
  if (auto v = get("EPISODES")) c.learner.episodes = parse_number<int>(p + "EPISODES", *v);
  if (auto v = get("GRID")) c.learner.grid_resolution = parse_number<int>(p + "GRID", *v);
  validate(c);
}

JointBelief initial_belief(const ExperimentConfig& c) {
  return JointBelief(static_cast<std::size_t>(c.environment.num_agents),
                     MarginalBelief(c.environment.initial_dist));
}

std::uint64_t run_seed(std::uint64_t master, std::size_t variant, std::size_t run) {
  return derive_seed(master, {variant, run});
}

// ---------------------------------------------------------------------------
// Baseline and sweep

Baseline solve_baseline(const ExperimentConfig& c, const EnvModel& model) {
  const GridBeliefModel bm(model, BeliefGrid(c.learner.grid_resolution, model));
  Baseline b;
  b.solution = c.learner.infinite ? value_iteration(bm, c.learner.delta)
                                  : backward_recursion(bm, c.learner.horizon, c.learner.delta);
  b.cell = bm.grid().snap(initial_belief(c));
  b.value = b.solution.v(0, b.cell);
  return b;
}

std::vector<VariantTraces> run_sweep(const ExperimentConfig& c, const EnvModel& model) {
  validate(c);
  const JointBelief pi0 = initial_belief(c);
  const std::size_t runs = static_cast<std::size_t>(c.runs);
  const std::size_t jobs = c.variants.size() * runs;
  const int eval_T = c.learner.infinite ? c.eval_horizon : c.learner.horizon;

  std::vector<LearnTrace> results(jobs);
  std::vector<std::exception_ptr> errors(jobs);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};

  auto work = [&] {
    for (std::size_t j = next++; j < jobs && !failed; j = next++) {
      const std::size_t v = j / runs, r = j % runs;
      try {
        LearnerConfig lc = c.learner;
        lc.updater = c.variants[v];
        lc.seed = run_seed(c.seed, v, r);
        // Evaluation streams depend on the run only, so variants of the
        // same run are scored on common random numbers.
        const auto eval = make_greedy_evaluator(model, lc.grid_resolution, pi0, eval_T, lc.delta,
                                                c.eval_rollouts, derive_seed(c.seed, {0xE7A1ULL, r}));
        LearnResult res = lc.infinite ? run_infinite(lc, model, pi0, eval)
                                      : run_finite(lc, model, pi0, eval);
        if (res.trace.size() == 0) {
          res.trace.points.push_back(0);
          res.trace.returns.push_back(eval(res.q, 0));
          res.trace.elapsed_seconds.push_back(0.0);
        }
        results[j] = std::move(res.trace);
      } catch (...) {
        errors[j] = std::current_exception();
        failed = true;
      }
    }
  };

  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(c.workers), jobs);
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t k = 0; k < threads; ++k) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<VariantTraces> out(c.variants.size());
  for (std::size_t v = 0; v < c.variants.size(); ++v) {
    out[v].variant = c.variants[v];
    for (std::size_t r = 0; r < runs; ++r) out[v].runs.push_back(std::move(results[v * runs + r]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV artifacts

std::vector<ReturnRow> aggregate(const std::vector<VariantTraces>& traces, double baseline) {
  if (traces.empty()) throw std::invalid_argument("aggregate: no traces");
  std::vector<ReturnRow> rows;
  for (const auto& vt : traces) {
    if (vt.runs.empty()) throw std::invalid_argument("aggregate: variant without runs");
    const auto& points = vt.runs.front().points;
    for (const auto& run : vt.runs)
      if (run.points != points || run.returns.size() != points.size())
        throw std::invalid_argument("aggregate: runs of " + vt.variant.label() +
                                    " have different trace points");
    std::vector<double> column(vt.runs.size());
    for (std::size_t k = 0; k < points.size(); ++k) {
      for (std::size_t r = 0; r < vt.runs.size(); ++r) column[r] = vt.runs[r].returns[k];
      const auto est = mean_and_stderr(column);
      rows.push_back({points[k], vt.variant.label(), est.mean, est.std_error, baseline});
    }
  }
  return rows;
}

std::string format_returns_csv(const std::vector<ReturnRow>& rows) {
  std::string out = std::string(kReturnsHeader) + "\n";
  for (const auto& r : rows) {
    out += std::to_string(r.episode) + "," + r.variant + "," + format_double(r.mean_return) + "," +
           format_double(r.stderr_return) + "," + format_double(r.baseline) + "\n";
  }
  return out;
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.close();
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void emit_csv(const std::vector<VariantTraces>& traces, double baseline,
              const std::filesystem::path& path) {
  write_text(path, format_returns_csv(aggregate(traces, baseline)));
}

std::vector<BoundRow> bound_table(const ExperimentConfig& c, const EnvModel& model) {
  std::vector<std::size_t> Ks = c.bounds.particle_counts;
  if (Ks.empty())
    for (const auto& v : c.variants)
      if (v.kind == BeliefUpdaterSpec::Kind::particle) Ks.push_back(v.particles);
  if (Ks.empty()) Ks = {50, 500, 5000};
  const auto [rmin, rmax] = model.reward_range();

  std::vector<BoundRow> rows;
  for (auto K : Ks) {
    BoundRow row;
    auto& bp = row.params;
    bp.K = K;
    bp.epsilon = c.bounds.epsilon;
    bp.delta_R = c.bounds.delta_R.value_or(rmax - rmin);
    bp.delta = c.learner.delta;
    bp.T = c.learner.infinite ? c.eval_horizon : c.learner.horizon;
    bp.t = c.bounds.t;
    bp.beta = c.bounds.beta;
    bp.lipschitz = c.bounds.lipschitz;
    row.hoeffding = hoeffding(bp.K, bp.epsilon, bp.delta_R);
    row.eta = eta_error(bp);
    row.accumulated = accumulated_error(bp);
    rows.push_back(row);
  }
  return rows;
}

std::string format_bounds_csv(const std::vector<BoundRow>& rows) {
  std::string out =
      "K,epsilon,delta_R,delta,T,t,beta,lipschitz,zeta,confidence,eta,accumulated_error\n";
  for (const auto& r : rows) {
    const auto& p = r.params;
    out += std::to_string(p.K) + "," + format_double(p.epsilon) + "," + format_double(p.delta_R) +
           "," + format_double(p.delta) + "," + std::to_string(p.T) + "," + std::to_string(p.t) +
           "," + format_double(p.beta) + "," + format_double(p.lipschitz) + "," +
           format_double(r.hoeffding.zeta) + "," + format_double(r.hoeffding.confidence) + "," +
           format_double(r.eta) + "," + format_double(r.accumulated) + "\n";
  }
  return out;
}

void run_experiment(const ExperimentConfig& c, Stage stage) {
  validate(c);
  const std::filesystem::path dir(c.output);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " +
                                   ec.message());
  write_text(dir / "config.resolved.json", dump_config(c));

  const EnvModel model = build_smartgrid(c.environment);
  const bool solve = stage == Stage::solve || stage == Stage::full;
  const bool train = stage == Stage::train || stage == Stage::full;
  const bool bounds = stage == Stage::bounds || stage == Stage::full;

  if (solve || train) {
    const Baseline b = solve_baseline(c, model);
    write_text(dir / "baseline.txt", format_double(b.value) + "\n");
    if (solve) {
      write_table(dir / "q_table.csv", b.solution.q);
      write_table(dir / "v_table.csv", b.solution.v);
      write_table(dir / "policy.csv", b.solution.policy);
    }
    if (train) emit_csv(run_sweep(c, model), b.value, dir / "returns.csv");
  }
  if (bounds) write_text(dir / "bounds.csv", format_bounds_csv(bound_table(c, model)));
}

}  // namespace decpf
