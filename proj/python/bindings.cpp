#include <optional>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "sglab/attention.hpp"
#include "sglab/ctmc.hpp"
#include "sglab/experiments.hpp"
#include "sglab/expm.hpp"
#include "sglab/graph.hpp"
#include "sglab/metrics.hpp"
#include "sglab/nonlinear.hpp"
#include "sglab/semigroup.hpp"

namespace py = pybind11;
using namespace sglab;

namespace {

Generator make_generator(const Matrix& attention, const std::optional<Matrix>& breaking,
                         const std::optional<Vector>& killing) {
  Generator g = generator_from_attention(StochasticMatrix(attention, 1e-10));
  if (breaking) g = modified_generator(g, *breaking);
  if (killing) g = killed_generator(g, *killing);
  return g;
}

FeatureField as_field(const Matrix& f) { return FeatureField(RowMatrix(f)); }

std::vector<Matrix> states_of(const std::vector<FeatureField>& fields) {
  std::vector<Matrix> out;
  out.reserve(fields.size());
  for (const auto& f : fields) out.emplace_back(f.values());
  return out;
}

}  // namespace

PYBIND11_MODULE(_sglab, m) {
  m.doc() = "Attention diffusion on graphs as Markov semigroups.";

  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

  py::class_<Graph>(m, "Graph")
      .def(py::init([](std::size_t n, std::vector<Edge> edges, bool directed) {
             return Graph(n, std::move(edges), directed ? Directedness::directed : Directedness::undirected);
           }),
           py::arg("n"), py::arg("edges"), py::arg("directed") = false)
      .def_property_readonly("num_nodes", &Graph::num_nodes)
      .def_property_readonly("num_edges", &Graph::num_edges)
      .def_property_readonly("edges", &Graph::edges)
      .def_property_readonly("directed", &Graph::directed)
      .def_property_readonly("self_loops", &Graph::self_loops)
      .def("degrees", &Graph::degrees)
      .def("connected", &Graph::connected)
      .def("bipartite", &Graph::bipartite)
      .def("with_self_loops", &Graph::with_self_loops)
      .def("__repr__", [](const Graph& g) {
        return "<Graph n=" + std::to_string(g.num_nodes()) + " edges=" + std::to_string(g.num_edges()) + ">";
      });

  m.def("load_graph", [](const std::filesystem::path& path) { return load_graph(path); });

  m.def(
      "generate_homophily_graph",
      [](std::size_t n, std::size_t k, double p_in, double p_out, std::uint64_t seed) {
        auto h = generate_homophily_graph(n, k, p_in, p_out, seed);
        return py::make_tuple(std::move(h.graph), h.labels.labels);
      },
      py::arg("n"), py::arg("k"), py::arg("p_in"), py::arg("p_out"), py::arg("seed") = 0,
      "Block model with k even classes and self-loops. Returns (graph, labels).");

  m.def(
      "homophily_ratio",
      [](const Graph& g, std::vector<std::size_t> labels) {
        NodeLabels nl{std::move(labels), 0};
        for (auto l : nl.labels) nl.num_classes = std::max(nl.num_classes, l + 1);
        return homophily_ratio(g, nl);
      },
      py::arg("graph"), py::arg("labels"));

  m.def(
      "attention_matrix",
      [](const Graph& g, const Matrix& features, const std::string& kernel) {
        return build_attention(g, as_field(features), make_kernel(kernel)).matrix();
      },
      py::arg("graph"), py::arg("features"), py::arg("kernel") = "dot",
      "Row-stochastic softmax attention over each node's neighbors.");

  m.def(
      "breaking_term",
      [](const Matrix& attention, const std::string& kind, int order, double scale, bool include_identity,
         std::optional<Vector> diagonal) {
        BreakingSpec spec{parse_breaking_kind(kind), order, scale, include_identity, diagonal.value_or(Vector{})};
        return breaking_term(spec, StochasticMatrix(attention, 1e-10));
      },
      py::arg("attention"), py::arg("kind") = "exp", py::arg("order") = 1, py::arg("scale") = 1.0,
      py::arg("include_identity") = false, py::arg("diagonal") = py::none());

  m.def("expm", &expm, py::arg("m"), "Matrix exponential (scaling and squaring, Pade).");

  m.def(
      "propagator",
      [](const Matrix& attention, double t, std::optional<Matrix> breaking, std::optional<Vector> killing) {
        return matrix_exponential(make_generator(attention, breaking, killing), t);
      },
      py::arg("attention"), py::arg("t"), py::arg("breaking") = py::none(), py::arg("killing") = py::none(),
      "exp(t (A - I + C + diag(c))).");

  m.def(
      "solve",
      [](const Matrix& attention, const Matrix& features, std::vector<double> times, const std::string& method,
         std::optional<Matrix> breaking, std::optional<Vector> killing) {
        const auto sol = solve_cauchy(make_generator(attention, breaking, killing), as_field(features), times,
                                      parse_solve_method(method));
        return states_of(sol.states);
      },
      py::arg("attention"), py::arg("features"), py::arg("times"), py::arg("method") = "expm",
      py::arg("breaking") = py::none(), py::arg("killing") = py::none(),
      "States H(t) for each requested time; method is expm, rk4 or adaptive.");

  m.def(
      "invariant_measure", [](const Matrix& attention) { return invariant_measure(StochasticMatrix(attention, 1e-10)); },
      py::arg("attention"));

  m.def(
      "_spectral_report_json",
      [](const Matrix& attention, std::optional<Matrix> breaking, std::optional<Vector> killing) {
        return to_json(spectral_report(make_generator(attention, breaking, killing))).dump();
      },
      py::arg("attention"), py::arg("breaking") = py::none(), py::arg("killing") = py::none());

  m.def(
      "nonlinear_rollout",
      [](const Graph& g, const Matrix& features, const std::string& kernel, std::size_t steps) {
        const auto r = nonlinear_rollout(g, as_field(features), make_kernel(kernel), steps);
        std::vector<double> eps;
        for (const auto& p : r.products) eps.push_back(p.epsilon);
        py::dict out;
        out["features"] = states_of(r.features);
        out["max_pair_tv"] = weak_ergodicity_trace(r);
        out["epsilon"] = eps;
        out["selfloop_floor_holds"] = r.self_loops ? py::cast(selfloop_floor_check(r)) : py::none();
        return out;
      },
      py::arg("graph"), py::arg("features"), py::arg("kernel") = "dot", py::arg("steps") = 50);

  m.def(
      "feynman_kac",
      [](const Matrix& attention, const Matrix& features, std::size_t start, double t, std::size_t n_samples,
         std::uint64_t seed, unsigned threads, std::optional<Vector> killing, const std::string& mode) {
        const StochasticMatrix a(attention, 1e-10);
        const SamplingOptions opts{seed, threads};
        py::gil_scoped_release release;
        const auto est = killing ? killed_feature_estimate(a, *killing, as_field(features), start, t, n_samples,
                                                           parse_killing_mode(mode), opts)
                                 : feynman_kac_estimate(a, as_field(features), start, t, n_samples, opts);
        return std::make_pair(est.mean, est.std_error);
      },
      py::arg("attention"), py::arg("features"), py::arg("start"), py::arg("t"), py::arg("n_samples"),
      py::arg("seed") = 0, py::arg("threads") = 0, py::arg("killing") = py::none(), py::arg("mode") = "exp-weight",
      "Monte Carlo estimate of row `start` of the (killed) semigroup applied to features. Returns (mean, std_error).");

  m.def(
      "transition_function",
      [](const Matrix& attention, double t, std::size_t n_per_start, std::uint64_t seed, unsigned threads) {
        const StochasticMatrix a(attention, 1e-10);
        py::gil_scoped_release release;
        return estimate_transition_function(a, t, n_per_start, {seed, threads});
      },
      py::arg("attention"), py::arg("t"), py::arg("n_per_start"), py::arg("seed") = 0, py::arg("threads") = 0);

  m.def(
      "dirichlet_energy",
      [](const Matrix& h, const Matrix& attention, const Vector& degrees, const std::string& normalization) {
        const auto norm = normalization == "edge_count" ? EnergyNormalization::edge_count : EnergyNormalization::node_count;
        return dirichlet_energy(as_field(h), StochasticMatrix(attention, 1e-10), degrees, norm);
      },
      py::arg("h"), py::arg("attention"), py::arg("degrees"), py::arg("normalization") = "node_count");

  m.def(
      "_run_json",
      [](const std::string& command, const std::string& config, const std::filesystem::path& out_dir) {
        return experiments::run_command(command, nlohmann::json::parse(config), out_dir).dump();
      },
      py::arg("command"), py::arg("config"), py::arg("out_dir"));
}
