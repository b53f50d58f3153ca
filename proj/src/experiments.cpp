#include "sglab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "sglab/attention.hpp"
#include "sglab/ctmc.hpp"
#include "sglab/graph.hpp"
#include "sglab/io.hpp"
#include "sglab/metrics.hpp"
#include "sglab/nonlinear.hpp"
#include "sglab/rng.hpp"
#include "sglab/semigroup.hpp"

namespace sglab::experiments {

namespace {

// ---------------------------------------------------------------------------
// Strict config access

class Section {
 public:
  Section(const json& node, std::string path, std::initializer_list<const char*> allowed)
      : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail("", "expected an object");
    std::set<std::string_view> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : node_.items()) {
      if (!ok.count(key)) fail(key, "unknown key");
    }
  }

  bool has(const char* key) const { return node_.contains(key) && !node_.at(key).is_null(); }
  const json& raw(const char* key) const { return node_.at(key); }

  Section sub(const char* key, std::initializer_list<const char*> allowed) const {
    if (!has(key)) fail(key, "missing required section");
    return Section(node_.at(key), join(key), allowed);
  }

  double real(const char* key, std::optional<double> def = std::nullopt,
              double lo = -std::numeric_limits<double>::infinity(),
              double hi = std::numeric_limits<double>::infinity()) const {
    if (!has(key)) {
      if (!def) fail(key, "missing required number");
      return *def;
    }
    const auto& v = node_.at(key);
    if (!v.is_number()) fail(key, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x) || x < lo || x > hi) fail(key, "value " + std::to_string(x) + " outside [" + fmt(lo) + ", " + fmt(hi) + "]");
    return x;
  }

  std::size_t count(const char* key, std::optional<std::size_t> def = std::nullopt, std::size_t lo = 0,
                    std::size_t hi = std::numeric_limits<std::size_t>::max()) const {
    if (!has(key)) {
      if (!def) fail(key, "missing required integer");
      return *def;
    }
    const auto& v = node_.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) fail(key, "expected a nonnegative integer");
    const auto x = v.get<std::size_t>();
    if (x < lo || x > hi) fail(key, "value " + std::to_string(x) + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return x;
  }

  std::string str(const char* key, std::optional<std::string> def = std::nullopt) const {
    if (!has(key)) {
      if (!def) fail(key, "missing required string");
      return *def;
    }
    if (!node_.at(key).is_string()) fail(key, "expected a string");
    return node_.at(key).get<std::string>();
  }

  bool flag(const char* key, bool def) const {
    if (!has(key)) return def;
    if (!node_.at(key).is_boolean()) fail(key, "expected true or false");
    return node_.at(key).get<bool>();
  }

  std::vector<double> reals(const char* key) const {
    if (!has(key) || !node_.at(key).is_array()) fail(key, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& v : node_.at(key)) {
      if (!v.is_number() || !std::isfinite(v.get<double>())) fail(key, "expected an array of finite numbers");
      out.push_back(v.get<double>());
    }
    return out;
  }

  [[noreturn]] void fail(std::string_view key, const std::string& what) const {
    throw ConfigError(join(key) + ": " + what);
  }

  std::string join(std::string_view key) const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
  }

 private:
  static std::string fmt(double x) {
    std::ostringstream s;
    s << x;
    return s.str();
  }

  const json& node_;
  std::string path_;
};

// Wraps a library precondition failure with the config path that caused it.
template <typename Fn>
auto at_path(const std::string& path, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ": " + e.what());
  } catch (const ParseError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

constexpr std::initializer_list<const char*> kRootKeys = {
    "graph", "features", "attention", "dynamics", "breaking", "killing", "times", "t_end", "points",
    "method", "steps", "seed", "ctmc", "sweep", "spectrum", "plots", "energy_normalization"};

// ---------------------------------------------------------------------------
// Problem setup

struct Problem {
  Graph graph;
  std::optional<NodeLabels> labels;
  FeatureField raw_features;
  FeatureField initial;  // what diffuses (centered when requested)
  AttentionKernel kernel;
  StochasticMatrix attention;
  Generator base;
  Generator dynamics;
  std::string dynamics_name;
  std::optional<double> kappa;  // constant killing magnitude, when used
};

HomophilyGraph make_graph(const Section& root) {
  const auto seed = root.count("seed", 0);
  const auto g = root.sub("graph", {"generate", "file", "ring", "complete"});
  if (g.has("generate")) {
    const auto gen = g.sub("generate", {"n", "k", "p_in", "p_out", "homophily", "avg_degree", "seed"});
    const auto n = gen.count("n", std::nullopt, 1);
    const auto k = gen.count("k", 2, 1, n);
    double p_in = 0.0, p_out = 0.0;
    if (gen.has("homophily")) {
      if (gen.has("p_in") || gen.has("p_out")) gen.fail("homophily", "give either homophily+avg_degree or p_in+p_out");
      const double h = gen.real("homophily", std::nullopt, 0.0, 1.0);
      const double deg = gen.real("avg_degree", std::nullopt, 0.0);
      const double per_class = static_cast<double>(n) / static_cast<double>(k);
      const double others = static_cast<double>(n) * static_cast<double>(k - 1) / static_cast<double>(k);
      p_in = per_class > 1.0 ? std::min(1.0, h * deg / (per_class - 1.0)) : 0.0;
      p_out = others > 0.0 ? std::min(1.0, (1.0 - h) * deg / others) : 0.0;
    } else {
      p_in = gen.real("p_in", std::nullopt, 0.0, 1.0);
      p_out = gen.real("p_out", std::nullopt, 0.0, 1.0);
    }
    return at_path(g.join("generate"),
                   [&] { return generate_homophily_graph(n, k, p_in, p_out, gen.count("seed", seed)); });
  }
  if (g.has("file")) {
    const auto file = g.sub("file", {"path", "directed", "num_nodes", "self_loops"});
    EdgeListOptions opts;
    if (file.has("directed")) opts.directedness = file.flag("directed", false) ? Directedness::directed : Directedness::undirected;
    if (file.has("num_nodes")) opts.num_nodes = file.count("num_nodes", std::nullopt, 1);
    auto graph = at_path(g.join("file"), [&] { return load_graph(file.str("path"), opts); });
    if (file.flag("self_loops", false)) graph = graph.with_self_loops();
    return {std::move(graph), NodeLabels{}};
  }
  if (g.has("ring")) {
    const auto ring = g.sub("ring", {"n", "reach", "self_loops"});
    const auto n = ring.count("n", std::nullopt, 3);
    const auto reach = ring.count("reach", 1, 1, n / 2);
    std::vector<Edge> edges;
    for (std::size_t u = 0; u < n; ++u) {
      if (ring.flag("self_loops", true)) edges.emplace_back(u, u);
      for (std::size_t r = 1; r <= reach; ++r) edges.emplace_back(u, (u + r) % n);
    }
    return {Graph(n, std::move(edges)), NodeLabels{}};
  }
  if (g.has("complete")) {
    const auto c = g.sub("complete", {"n", "self_loops"});
    const auto n = c.count("n", std::nullopt, 1);
    std::vector<Edge> edges;
    for (std::size_t u = 0; u < n; ++u) {
      for (std::size_t v = u; v < n; ++v) {
        if (u != v || c.flag("self_loops", true)) edges.emplace_back(u, v);
      }
    }
    return {Graph(n, std::move(edges)), NodeLabels{}};
  }
  g.fail("", "one of generate, file, ring, complete is required");
}

FeatureField make_features(const Section& root, std::size_t n) {
  const auto seed = root.count("seed", 0);
  if (!root.has("features")) {
    return FeatureField(RowMatrix::Zero(static_cast<Eigen::Index>(n), 1) );
  }
  const auto f = root.sub("features", {"random", "file", "center"});
  if (f.has("file")) {
    auto ff = at_path(f.join("file"), [&] { return load_features(f.str("file")); });
    if (ff.num_nodes() != n) f.fail("file", "has " + std::to_string(ff.num_nodes()) + " rows, graph has " + std::to_string(n) + " nodes");
    return ff;
  }
  const auto r = f.sub("random", {"dim", "seed", "scale"});
  const auto dim = r.count("dim", 1, 1);
  const double scale = r.real("scale", 1.0, 0.0);
  StreamRng rng(r.count("seed", seed), 0x66656174ULL);
  RowMatrix m(n, dim);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * (2.0 * rng.uniform() - 1.0);
  return FeatureField(std::move(m));
}

EnergyNormalization energy_normalization(const Section& root) {
  const auto s = root.str("energy_normalization", "node_count");
  if (s == "node_count") return EnergyNormalization::node_count;
  if (s == "edge_count") return EnergyNormalization::edge_count;
  root.fail("energy_normalization", "expected node_count or edge_count");
}

Vector killing_vector(const Section& root, std::size_t n, std::optional<double>* kappa_out) {
  const auto k = root.sub("killing", {"kappa", "rates"});
  if (k.has("kappa") == k.has("rates")) k.fail("", "give exactly one of kappa or rates");
  if (k.has("kappa")) {
    const double kappa = k.real("kappa", std::nullopt, 0.0);
    if (kappa_out) *kappa_out = kappa;
    return Vector::Constant(static_cast<Eigen::Index>(n), -kappa);
  }
  const auto rates = k.reals("rates");
  if (rates.size() != n) k.fail("rates", "length must equal the node count");
  Vector c(n);
  for (std::size_t v = 0; v < n; ++v) {
    if (rates[v] < 0.0) k.fail("rates", "killing rates must be >= 0");
    c(v) = -rates[v];
  }
  return c;
}

Problem make_problem(const Section& root) {
  auto [graph, labels] = make_graph(root);
  auto raw = make_features(root, graph.num_nodes());
  const auto kernel = at_path("attention", [&] { return make_kernel(root.str("attention", "dot")); });
  auto attention = at_path("graph", [&] { return build_attention(graph, raw, kernel); });
  auto base = generator_from_attention(attention);

  FeatureField initial = raw;
  if (root.has("features") && root.sub("features", {"random", "file", "center"}).flag("center", false)) {
    const Vector mu = at_path("features.center", [&] { return invariant_measure(attention); });
    const Vector b = oversmoothing_fixed_point(raw, mu);
    initial = FeatureField(RowMatrix(raw.values().rowwise() - b.transpose()));
  }

  const auto name = root.str("dynamics", "linear");
  Generator dyn = base;
  std::optional<double> kappa;
  if (name == "broken") {
    const auto b = root.sub("breaking", {"kind", "order", "scale", "include_identity", "diagonal_values",
                                         "diagonal_constant", "diagonal_random"});
    BreakingSpec spec;
    spec.kind = at_path("breaking.kind", [&] { return parse_breaking_kind(b.str("kind", "exp")); });
    spec.order = static_cast<int>(b.count("order", 1, 1, 64));
    spec.scale = b.real("scale", 1.0);
    spec.include_identity = b.flag("include_identity", false);
    if (spec.kind == BreakingKind::diagonal) {
      if (b.has("diagonal_random")) {
        const auto r = b.sub("diagonal_random", {"low", "high", "seed"});
        const double lo = r.real("low"), hi = r.real("high", std::nullopt, lo);
        StreamRng rng(r.count("seed", root.count("seed", 0)), 0x64696167ULL);
        spec.diagonal_values.resize(static_cast<Eigen::Index>(graph.num_nodes()));
        for (auto& x : spec.diagonal_values) x = lo + (hi - lo) * rng.uniform();
      } else if (b.has("diagonal_values")) {
        const auto vals = b.reals("diagonal_values");
        spec.diagonal_values = Eigen::Map<const Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
      } else {
        spec.diagonal_values = Vector::Constant(static_cast<Eigen::Index>(graph.num_nodes()), b.real("diagonal_constant", 1.0));
      }
    }
    // A zero-scale term leaves the linear dynamics untouched.
    if (spec.scale != 0.0) dyn = modified_generator(base, at_path("breaking", [&] { return breaking_term(spec, attention); }));
  } else if (name == "killed") {
    dyn = killed_generator(base, killing_vector(root, graph.num_nodes(), &kappa));
  } else if (name != "linear" && name != "nonlinear") {
    root.fail("dynamics", "expected linear, broken, killed or nonlinear");
  }
  return Problem{std::move(graph), labels.labels.empty() ? std::nullopt : std::optional<NodeLabels>(labels),
                 std::move(raw),   std::move(initial), kernel, std::move(attention), std::move(base), std::move(dyn),
                 name,             kappa};
}

std::vector<double> make_times(const Section& root, const Problem& p) {
  if (root.has("times")) {
    auto t = root.reals("times");
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i] < 0.0 || (i && t[i] < t[i - 1])) root.fail("times", "must be nonnegative and sorted");
    }
    if (t.empty()) root.fail("times", "must not be empty");
    return t;
  }
  const auto points = root.count("points", 21, 2);
  double t_end = 0.0;
  if (root.has("t_end") && root.raw("t_end").is_string()) {
    if (root.str("t_end") != "auto") root.fail("t_end", "expected a number or \"auto\"");
    const double gap = spectral_report(p.base).spectral_gap;
    if (!(gap > 0.0)) root.fail("t_end", "auto horizon needs a positive spectral gap");
    t_end = 40.0 / gap;
  } else {
    t_end = root.real("t_end", 10.0, 0.0);
  }
  std::vector<double> t(points);
  for (std::size_t i = 0; i < points; ++i) t[i] = t_end * static_cast<double>(i) / static_cast<double>(points - 1);
  return t;
}

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

void write_json(const json& j, const std::filesystem::path& path) {
  auto out = io::open_output(path);
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// diffuse

struct DiffuseOutcome {
  json summary;
  EnergyTrace trace;
};

DiffuseOutcome diffuse(const json& config, const std::filesystem::path& out_dir) {
  const Section root(config, "", kRootKeys);
  const auto p = make_problem(root);
  const auto degrees = p.graph.degrees();
  const auto norm = energy_normalization(root);
  const bool plots = root.flag("plots", false);
  json summary{{"command", "diffuse"},
               {"dynamics", p.dynamics_name},
               {"n", p.graph.num_nodes()},
               {"dim", p.initial.dim()}};

  if (p.dynamics_name == "nonlinear") {
    const auto steps = root.count("steps", 50, 1);
    const auto rollout = nonlinear_rollout(p.graph, p.initial, p.kernel, steps);
    SemigroupSolution sol;
    EnergyTrace trace;
    for (std::size_t t = 0; t <= steps; ++t) {
      sol.times.push_back(static_cast<double>(t));
      sol.states.push_back(rollout.features[t]);
      const auto a = build_attention(p.graph, rollout.features[t], p.kernel);
      const double e = dirichlet_energy(rollout.features[t], a, degrees, norm);
      trace.times.push_back(static_cast<double>(t));
      trace.energy.push_back(e);
      trace.log_energy.push_back(e > 0.0 ? std::optional<double>(std::log(e)) : std::nullopt);
      trace.spread.push_back(feature_spread(rollout.features[t]));
    }
    write_solution_csv(sol, out_dir / "solution.csv");
    write_energy_csv(trace, out_dir / "energy.csv");
    write_trace_csv(rollout, out_dir / "trace.csv");
    const auto tv = weak_ergodicity_trace(rollout);
    bool bound_holds = true;
    for (std::size_t t = 0; t < tv.size(); ++t) {
      bound_holds = bound_holds && tv[t] <= std::pow(1.0 - rollout.products[t].epsilon, static_cast<double>(t)) + 1e-12;
    }
    summary["steps"] = steps;
    summary["epsilon"] = rollout.products.back().epsilon;
    summary["final_max_pair_tv"] = tv.back();
    summary["doeblin_bound_holds"] = bound_holds;
    summary["selfloop_floor_holds"] = rollout.self_loops ? json(selfloop_floor_check(rollout)) : json(nullptr);
    summary["max_row_drift"] = rollout.max_row_drift;
    summary["final_spread"] = trace.spread.back();
    summary["initial_energy"] = trace.energy.front();
    summary["final_energy"] = trace.energy.back();
    write_json(summary, out_dir / "summary.json");
    return {summary, trace};
  }

  const auto times = make_times(root, p);
  const auto method = at_path("method", [&] { return parse_solve_method(root.str("method", "expm")); });
  const auto sol = solve_cauchy(p.dynamics, p.initial, times, method);
  const auto trace = energy_trace(sol, p.attention, degrees, norm);
  write_solution_csv(sol, out_dir / "solution.csv");
  write_energy_csv(trace, out_dir / "energy.csv");

  const auto base_report = spectral_report(p.base);
  const auto dyn_report = p.dynamics.is_markov() ? base_report : spectral_report(p.dynamics);
  summary["method"] = std::string(to_string(method));
  summary["spectral_gap"] = base_report.spectral_gap;
  summary["is_ergodic"] = dyn_report.is_ergodic;
  summary["final_time"] = times.back();
  summary["final_spread"] = trace.spread.back();
  summary["initial_energy"] = trace.energy.front();
  summary["final_energy"] = trace.energy.back();
  summary["fixed_point"] = nullptr;
  summary["fitted_rate"] = nullptr;
  if (base_report.invariant_measure) {
    const Vector b = oversmoothing_fixed_point(p.initial, *base_report.invariant_measure);
    summary["fixed_point"] = vec_json(b);
    if (p.dynamics.is_markov() && times.size() >= 5) {
      try {
        summary["fitted_rate"] = convergence_rate_fit(sol, b);
      } catch (const NumericalError&) {
      }
    }
  }

  if (p.kappa) {
    const auto base_sol = solve_cauchy(p.base, p.initial, times, method);
    const auto base_trace = energy_trace(base_sol, p.attention, degrees, norm);
    const auto predicted = constant_killing_energy_law(base_trace, *p.kappa);
    json measured = json::array(), expected = json::array();
    double worst = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
      const bool finite = trace.log_energy[k] && base_trace.log_energy[k];
      const double shift = finite ? *trace.log_energy[k] - *base_trace.log_energy[k] : 0.0;
      measured.push_back(finite ? json(shift) : json(nullptr));
      expected.push_back(-2.0 * *p.kappa * times[k]);
      if (finite) worst = std::max(worst, std::abs(*trace.log_energy[k] - *predicted.log_energy[k]));
    }
    summary["kappa"] = *p.kappa;
    summary["log_energy_shift"] = measured;
    summary["expected_log_energy_shift"] = expected;
    summary["killing_law_max_error"] = worst;
  }

  if (plots) {
    std::vector<double> logs;
    std::vector<double> ts;
    for (std::size_t k = 0; k < trace.times.size(); ++k) {
      if (trace.log_energy[k]) {
        ts.push_back(trace.times[k]);
        logs.push_back(*trace.log_energy[k]);
      }
    }
    write_line_plot_svg(out_dir / "energy.svg", "Dirichlet energy", "t", "log energy", {{p.dynamics_name, ts, logs}});
  }
  write_json(summary, out_dir / "summary.json");
  return {summary, trace};
}

std::string format_value(const json& v) {
  if (v.is_number_float()) {
    std::ostringstream s;
    s << v.get<double>();
    return s.str();
  }
  return v.is_string() ? v.get<std::string>() : v.dump();
}

json* find_path(json& j, std::string_view dotted, bool create) {
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const std::string key(dotted.substr(start, dot == std::string_view::npos ? dot : dot - start));
    if (key.empty()) return nullptr;
    if (!node->is_object()) {
      if (!create || !node->is_null()) return nullptr;
      *node = json::object();
    }
    if (!node->contains(key) && !create) return nullptr;
    node = &(*node)[key];
    if (dot == std::string_view::npos) return node;
    start = dot + 1;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Public entry points

json apply_override(json config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + std::string(assignment) + "'");
  const auto key = assignment.substr(0, eq);
  const std::string value(assignment.substr(eq + 1));
  json* slot = find_path(config, key, true);
  if (!slot) throw ConfigError(std::string(key) + ": cannot assign through a non-object value");
  json parsed = json::parse(value, nullptr, false);
  *slot = parsed.is_discarded() ? json(value) : parsed;
  return config;
}

std::string config_hash(const json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::filesystem::path run_directory(std::string_view command, const json& config, const std::filesystem::path& root) {
  std::filesystem::path base = root;
  if (base.empty()) {
    const char* env = std::getenv("SGLAB_OUTPUT_ROOT");
    base = env && *env ? env : "runs";
  }
  return base / (std::string(command) + "-" + config_hash(config));
}

json cmd_diffuse(const json& config, const std::filesystem::path& out_dir) {
  return diffuse(config, out_dir).summary;
}

json cmd_spectrum(const json& config, const std::filesystem::path& out_dir) {
  const Section root(config, "", kRootKeys);
  const auto p = make_problem(root);
  bool require_mu = false;
  if (root.has("spectrum")) require_mu = root.sub("spectrum", {"require_invariant_measure"}).flag("require_invariant_measure", false);
  if (require_mu && !p.graph.connected()) {
    throw ConfigError("spectrum.require_invariant_measure: graph is disconnected; the invariant measure is not unique");
  }
  const auto report = spectral_report(p.dynamics);
  write_json(to_json(report), out_dir / "spectrum.json");
  io::write_matrix_csv(p.attention.matrix(), out_dir / "attention.csv");
  io::write_matrix_csv(p.dynamics.q, out_dir / "generator.csv");
  json summary{{"command", "spectrum"},
               {"dynamics", p.dynamics_name},
               {"n", p.graph.num_nodes()},
               {"is_ergodic", report.is_ergodic},
               {"kernel_dim", report.kernel_dim},
               {"spectral_gap", report.spectral_gap},
               {"symmetrizable", report.symmetrizable},
               {"bipartite_warning", report.bipartite_warning}};
  write_json(summary, out_dir / "summary.json");
  return summary;
}

json cmd_ctmc(const json& config, const std::filesystem::path& out_dir) {
  const Section root(config, "", kRootKeys);
  const auto p = make_problem(root);
  const auto c = root.sub("ctmc", {"start", "t", "n_samples", "mode", "trajectories", "threads"});
  const auto start = c.count("start", 0);
  if (start >= p.graph.num_nodes()) c.fail("start", "node out of range");
  const double t = c.real("t", 1.0, 0.0);
  const auto n_samples = c.count("n_samples", 100000);
  if (n_samples == 0) c.fail("n_samples", "empty sample: must be positive");
  const auto mode = c.str("mode", "plain");
  const SamplingOptions opts{root.count("seed", 0), static_cast<unsigned>(c.count("threads", 0))};

  McEstimate est;
  Generator reference_gen = p.base;
  std::optional<Vector> killing;
  if (mode == "plain") {
    est = feynman_kac_estimate(p.attention, p.initial, start, t, n_samples, opts);
  } else {
    const auto kill_mode = at_path(c.join("mode"), [&] { return parse_killing_mode(mode); });
    killing = killing_vector(root, p.graph.num_nodes(), nullptr);
    reference_gen = killed_generator(p.base, *killing);
    est = killed_feature_estimate(p.attention, *killing, p.initial, start, t, n_samples, kill_mode, opts);
  }
  const Vector reference = (matrix_exponential(reference_gen, t) * Matrix(p.initial.values())).row(start).transpose();
  double sigma = 0.0;
  for (Eigen::Index j = 0; j < reference.size(); ++j) {
    const double diff = std::abs(est.mean(j) - reference(j));
    if (est.std_error(j) > 0.0) {
      sigma = std::max(sigma, diff / est.std_error(j));
    } else if (diff > 1e-12) {
      sigma = std::numeric_limits<double>::infinity();
    }
  }
  write_json(to_json(est), out_dir / "estimate.json");

  const auto n_traj = c.count("trajectories", 0, 0, 10000);
  const CtmcSampler sampler(p.attention);
  for (std::size_t i = 0; i < n_traj; ++i) {
    StreamRng rng(opts.seed, i);
    const auto tr = sampler.sample(start, t, rng, killing ? &*killing : nullptr);
    write_trajectory_csv(tr, out_dir / "trajectories" / ("trajectory_" + std::to_string(i) + ".csv"));
  }

  json summary{{"command", "ctmc"},
               {"mode", mode},
               {"start", start},
               {"t", t},
               {"estimate", to_json(est)},
               {"reference", vec_json(reference)},
               {"sigma_distance", std::isfinite(sigma) ? json(sigma) : json("inf")}};
  write_json(summary, out_dir / "summary.json");
  return summary;
}

json cmd_sweep(const json& config, const std::filesystem::path& out_dir) {
  const Section root(config, "", kRootKeys);
  const auto s = root.sub("sweep", {"variable", "values", "dynamics", "max_cells", "plots"});
  const auto variable = s.str("variable");
  if (!s.has("values") || !s.raw("values").is_array() || s.raw("values").empty()) s.fail("values", "expected a nonempty array");
  const json values = s.raw("values");
  std::vector<std::string> dynamics;
  if (s.has("dynamics")) {
    for (const auto& d : s.raw("dynamics")) {
      if (!d.is_string()) s.fail("dynamics", "expected an array of strings");
      dynamics.push_back(d.get<std::string>());
    }
  } else {
    dynamics.push_back(root.str("dynamics", "linear"));
  }
  const auto max_cells = s.count("max_cells", 100000, 1);
  const std::size_t n_times = root.has("times") ? root.reals("times").size() : root.count("points", 21, 2);
  const std::size_t cells = values.size() * dynamics.size() * n_times;
  if (cells > max_cells) {
    s.fail("max_cells", "grid has " + std::to_string(cells) + " cells, budget is " + std::to_string(max_cells));
  }

  json base = config;
  base.erase("sweep");
  const auto column = variable.substr(variable.rfind('.') + 1);

  auto long_csv = io::open_output(out_dir / "sweep.csv");
  long_csv << column << ",dynamics,t,energy,log_energy,spread\n";
  auto table = io::open_output(out_dir / "table.csv");
  std::map<std::string, std::vector<PlotSeries>> plots;
  json cell_summaries = json::array();
  bool header_written = false;

  for (const auto& value : values) {
    for (const auto& dyn : dynamics) {
      json cell = base;
      json* slot = find_path(cell, variable, true);
      if (!slot) s.fail("variable", "cannot assign through a non-object value");
      *slot = value;
      cell["dynamics"] = dyn;
      const auto label = column + "=" + format_value(value);
      const auto cell_dir = out_dir / "cells" / (dynamics.size() > 1 ? std::filesystem::path(label) / dyn : std::filesystem::path(label));
      const auto outcome = diffuse(cell, cell_dir);
      const auto& tr = outcome.trace;

      if (!header_written) {
        table << column << ",dynamics";
        for (double t : tr.times) table << ",t=" << format_value(json(t));
        table << '\n';
        header_written = true;
      }
      table << format_value(value) << ',' << dyn;
      PlotSeries series{label, {}, {}};
      for (std::size_t k = 0; k < tr.times.size(); ++k) {
        const auto log_e = tr.log_energy[k] ? io::format_real(*tr.log_energy[k]) : std::string("NA");
        long_csv << format_value(value) << ',' << dyn << ',' << io::format_real(tr.times[k]) << ','
                 << io::format_real(tr.energy[k]) << ',' << log_e << ',' << io::format_real(tr.spread[k]) << '\n';
        table << ',' << log_e;
        if (tr.log_energy[k]) {
          series.x.push_back(tr.times[k]);
          series.y.push_back(*tr.log_energy[k]);
        }
      }
      table << '\n';
      plots[dyn].push_back(std::move(series));
      json entry = outcome.summary;
      entry[column] = value;
      cell_summaries.push_back(entry);
    }
  }
  if (s.flag("plots", true)) {
    for (const auto& [dyn, series] : plots) {
      write_line_plot_svg(out_dir / ("sweep_" + column + "_" + dyn + ".svg"), "Dirichlet energy vs depth (" + dyn + ")",
                          "t", "log energy", series);
    }
  }
  json summary{{"command", "sweep"}, {"variable", variable}, {"cells", cells}, {"results", cell_summaries}};
  write_json(summary, out_dir / "summary.json");
  return summary;
}

json cmd_gen_graph(const json& config, const std::filesystem::path& out_dir) {
  const Section root(config, "", kRootKeys);
  auto [graph, labels] = make_graph(root);
  save_graph(graph, out_dir / "graph.csv");
  json summary{{"command", "gen-graph"},
               {"n", graph.num_nodes()},
               {"directed_edges", graph.num_edges()},
               {"self_loops", graph.self_loops()},
               {"connected", graph.connected()},
               {"homophily", nullptr}};
  if (!labels.labels.empty()) {
    save_labels(labels, out_dir / "labels.csv");
    summary["homophily"] = homophily_ratio(graph, labels);
  }
  if (root.has("features")) save_features(make_features(root, graph.num_nodes()), out_dir / "features.csv");
  write_json(summary, out_dir / "summary.json");
  return summary;
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"diffuse", "spectrum", "ctmc", "sweep", "gen-graph"};
  return names;
}

json run_command(std::string_view command, const json& config, const std::filesystem::path& out_dir) {
  json (*fn)(const json&, const std::filesystem::path&) = nullptr;
  if (command == "diffuse") fn = cmd_diffuse;
  if (command == "spectrum") fn = cmd_spectrum;
  if (command == "ctmc") fn = cmd_ctmc;
  if (command == "sweep") fn = cmd_sweep;
  if (command == "gen-graph") fn = cmd_gen_graph;
  if (!fn) throw ConfigError("unknown command '" + std::string(command) + "'");
  std::filesystem::create_directories(out_dir);
  auto summary = fn(config, out_dir);
  write_json(config, out_dir / "config.json");
  return summary;
}

// ---------------------------------------------------------------------------
// SVG

void write_line_plot_svg(const std::filesystem::path& path, std::string_view title, std::string_view x_label,
                         std::string_view y_label, const std::vector<PlotSeries>& series) {
  constexpr double W = 640, H = 420, L = 70, R = 150, T = 40, B = 50;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  static constexpr const char* colours[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                            "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

  auto out = io::open_output(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    out << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << format_value(json(xv)) << "</text>\n";
    out << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << format_value(json(yv)) << "</text>\n";
  }
  out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">" << x_label << "</text>\n";
  out << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << (T + H - B) / 2
      << ")\">" << y_label << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto* colour = colours[i % std::size(colours)];
    out << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < series[i].x.size(); ++k) out << px(series[i].x[k]) << ',' << py(series[i].y[k]) << ' ';
    out << "\"/>\n";
    out << "<text x=\"" << W - R + 10 << "\" y=\"" << T + 16 * (i + 1) << "\" fill=\"" << colour << "\">" << series[i].label << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace sglab::experiments
