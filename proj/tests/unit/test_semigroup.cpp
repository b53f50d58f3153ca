#include <doctest.h>

#include <cmath>
#include <fstream>

#include <Eigen/Eigenvalues>

#include "sglab/expm.hpp"
#include "sglab/ode.hpp"
#include "sglab/semigroup.hpp"
#include "support/instances.hpp"
#include "support/tmpdir.hpp"

using namespace sglab;

namespace {

Generator two_node() {
  Matrix swap(2, 2);
  swap << 0, 1, 1, 0;
  return generator_from_attention(StochasticMatrix(swap));
}

FeatureField unit_first() {
  RowMatrix f(2, 1);
  f << 1, 0;
  return FeatureField(f);
}

struct Instance {
  Graph graph;
  StochasticMatrix attention;
  Generator q;
};

Instance random_instance(StreamRng& rng, std::size_t n, bool reversible = false) {
  auto g = testing::random_connected_graph(n, std::min(1.0, 3.0 / n), rng);
  const auto kernel = reversible ? testing::symmetric_kernel(rng) : testing::random_kernel(rng);
  auto a = build_attention(g, testing::random_features(n, 2, rng), kernel);
  auto q = generator_from_attention(a);
  return {std::move(g), std::move(a), std::move(q)};
}

}  // namespace

TEST_SUITE("semigroup") {
  TEST_CASE("t = 0 is the identity") {
    CHECK(matrix_exponential(two_node(), 0.0) == Matrix::Identity(2, 2));
    CHECK_THROWS_AS(matrix_exponential(two_node(), -1.0), std::invalid_argument);
  }

  TEST_CASE("2-node closed form by all three routes") {
    const std::vector<double> times{0.0, 0.25, 1.0, 3.0};
    for (auto method : {SolveMethod::expm, SolveMethod::rk4, SolveMethod::adaptive}) {
      const auto sol = solve_cauchy(two_node(), unit_first(), times, method);
      CHECK(sol.states[0].values() == unit_first().values());
      for (std::size_t k = 0; k < times.size(); ++k) {
        const double e = std::exp(-2.0 * times[k]);
        const double tol = method == SolveMethod::rk4 ? 1e-6 : 1e-9;
        CHECK(std::abs(sol.states[k].values()(0, 0) - (1 + e) / 2) < tol);
        CHECK(std::abs(sol.states[k].values()(1, 0) - (1 - e) / 2) < tol);
      }
    }
  }

  TEST_CASE("constants are fixed") {
    StreamRng rng(31, 0);
    const auto inst = random_instance(rng, 12);
    const FeatureField f(RowMatrix::Constant(12, 3, 2.5));
    for (auto method : {SolveMethod::expm, SolveMethod::rk4, SolveMethod::adaptive}) {
      const auto sol = solve_cauchy(inst.q, f, std::vector{0.5, 5.0}, method);
      for (const auto& s : sol.states) CHECK((s.values().array() - 2.5).abs().maxCoeff() < 1e-10);
    }
  }

  TEST_CASE("Markov property of P(t)") {
    StreamRng rng(32, 0);
    for (int rep = 0; rep < 10; ++rep) {
      const auto inst = random_instance(rng, 8);
      const Matrix p = matrix_exponential(inst.q, 1.0);
      CHECK((p.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-10);
      CHECK(p.minCoeff() >= -1e-12);
    }
  }

  TEST_CASE("semigroup composition") {
    StreamRng rng(33, 0);
    for (int rep = 0; rep < 10; ++rep) {
      const auto inst = random_instance(rng, 10);
      const double s = 5.0 * rng.uniform(), t = 5.0 * rng.uniform();
      const Matrix lhs = matrix_exponential(inst.q, s) * matrix_exponential(inst.q, t);
      CHECK((lhs - matrix_exponential(inst.q, s + t)).cwiseAbs().maxCoeff() < 1e-9);
    }
  }

  TEST_CASE("generator recovery from a short step") {
    StreamRng rng(34, 0);
    const auto inst = random_instance(rng, 7);
    const double h = 1e-5;
    const Matrix approx = (matrix_exponential(inst.q, h) - Matrix::Identity(7, 7)) / h;
    const double qnorm = inst.q.q.cwiseAbs().rowwise().sum().maxCoeff();
    CHECK((approx - inst.q.q).cwiseAbs().maxCoeff() <= qnorm * qnorm * h);
  }

  TEST_CASE("expm and ODE routes agree") {
    StreamRng rng(35, 0);
    for (int rep = 0; rep < 8; ++rep) {
      const auto n = testing::uniform_index(rng, 2, 50);
      const auto inst = random_instance(rng, n);
      const auto f = testing::random_features(n, 2, rng);
      const std::vector<double> times{0.1, 1.0, 10.0};
      const auto a = solve_cauchy(inst.q, f, times, SolveMethod::expm);
      const auto b = solve_cauchy(inst.q, f, times, SolveMethod::adaptive);
      for (std::size_t k = 0; k < times.size(); ++k) {
        CHECK((a.states[k].values() - b.states[k].values()).cwiseAbs().maxCoeff() < 1e-7);
      }
    }
  }

  TEST_CASE("ODE integrators report bad input and budgets") {
    const Matrix q = two_node().q;
    const Matrix y0 = unit_first().values();
    CHECK_THROWS_AS(integrate_rk4(q, y0, std::vector{1.0, 0.5}), std::invalid_argument);
    AdaptiveOptions tight;
    tight.max_steps = 3;
    CHECK_THROWS_AS(integrate_adaptive(q, y0, std::vector{100.0}, tight), NumericalError);
    OdeStats stats;
    integrate_adaptive(q, y0, std::vector{1.0}, {}, &stats);
    CHECK(stats.accepted > 0);
  }

  TEST_CASE("long-form solution CSV") {
    testing::TempDir dir;
    const auto sol = solve_cauchy(two_node(), unit_first(), std::vector{0.0, 1.0}, SolveMethod::expm);
    write_solution_csv(sol, dir / "s.csv");
    std::ifstream in(dir / "s.csv");
    std::string header, first;
    std::getline(in, header);
    std::getline(in, first);
    CHECK(header == "t,node,dim,value");
    CHECK(first == "0.00000000000000000e+00,0,0,1.00000000000000000e+00");
  }

  TEST_CASE("invariant measure hand cases") {
    Matrix swap(2, 2);
    swap << 0, 1, 1, 0;
    const Vector mu = invariant_measure(StochasticMatrix(swap));
    CHECK(mu(0) == doctest::Approx(0.5));
    CHECK(mu(1) == doctest::Approx(0.5));

    // Uniform attention on a 4-regular ring (with loops) is doubly stochastic.
    std::vector<Edge> edges;
    for (std::size_t u = 0; u < 9; ++u) edges.insert(edges.end(), {{u, u}, {u, (u + 1) % 9}, {u, (u + 2) % 9}});
    const auto a = build_attention(Graph(9, edges), FeatureField(RowMatrix::Zero(9, 1)), make_kernel("zero"));
    CHECK((invariant_measure(a).array() - 1.0 / 9.0).abs().maxCoeff() < 1e-12);
  }

  TEST_CASE("power iteration agrees with the dense solve") {
    const Graph chain(3, {{0, 1}, {1, 2}, {0, 0}, {1, 1}, {2, 2}});
    const auto a = build_attention(chain, FeatureField(RowMatrix::Zero(3, 1)), make_kernel("zero"));
    const Vector mu = invariant_measure(a);
    CHECK((mu - invariant_measure_dense(a)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((a.matrix().transpose() * mu - mu).cwiseAbs().maxCoeff() < 1e-12);
    // Closed form: μ ∝ degree for uniform attention on an undirected graph.
    CHECK(mu(1) == doctest::Approx(3.0 / 7.0).epsilon(1e-10));

    StreamRng rng(36, 0);
    for (int rep = 0; rep < 10; ++rep) {
      const auto inst = random_instance(rng, 15);
      const Vector m = invariant_measure(inst.attention);
      CHECK((m - invariant_measure_dense(inst.attention)).cwiseAbs().maxCoeff() < 1e-10);
      CHECK(m.minCoeff() >= 0.0);
      CHECK(m.sum() == doctest::Approx(1.0).epsilon(1e-12));
      // Generator-level invariance against random test functions.
      for (int k = 0; k < 100; ++k) {
        Vector f(15);
        for (auto& x : f) x = 2.0 * rng.uniform() - 1.0;
        CHECK(std::abs(m.dot(inst.q.q * f)) < 1e-9);
      }
    }
  }

  TEST_CASE("invariant measure is accurate on a slowly mixing path") {
    // Path of 60 nodes with self-loops and a drift toward node 0: the power
    // iteration's step test stalls long before the measure is exact.
    const Eigen::Index n = 60;
    Matrix a = Matrix::Zero(n, n);
    for (Eigen::Index u = 0; u < n; ++u) {
      a(u, u) = 0.2;
      if (u > 0) a(u, u - 1) = u + 1 < n ? 0.45 : 0.8;
      if (u + 1 < n) a(u, u + 1) = u > 0 ? 0.35 : 0.8;
    }
    const StochasticMatrix sm(a);
    const Vector mu = invariant_measure(sm);
    CHECK((a.transpose() * mu - mu).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(mu.sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(mu.minCoeff() >= 0.0);
  }

  TEST_CASE("disconnected support has no unique invariant measure") {
    const auto a = build_attention(Graph(4, {{0, 1}, {2, 3}}), FeatureField(RowMatrix::Zero(4, 1)), make_kernel("zero"));
    CHECK_THROWS_AS(invariant_measure(a), std::invalid_argument);
  }

  TEST_CASE("spectral report on the 2-node case") {
    const auto r = spectral_report(two_node());
    CHECK(r.eigenvalues.size() == 2);
    CHECK(std::abs(r.eigenvalues[0]) < 1e-12);
    CHECK(r.eigenvalues[1].real() == doctest::Approx(-2.0));
    CHECK(r.spectral_gap == doctest::Approx(2.0));
    CHECK(r.kernel_dim == 1);
    CHECK(r.is_ergodic);
    CHECK(r.symmetrizable);
    CHECK(r.bipartite_warning);
    REQUIRE(r.symmetric_crosscheck_error);
    CHECK(*r.symmetric_crosscheck_error < 1e-12);
  }

  TEST_CASE("spectral report on a disconnected graph") {
    const auto a = build_attention(Graph(4, {{0, 1}, {2, 3}, {0, 0}}), FeatureField(RowMatrix::Zero(4, 1)), make_kernel("zero"));
    const auto r = spectral_report(generator_from_attention(a));
    CHECK(r.kernel_dim == 2);
    CHECK_FALSE(r.is_ergodic);
    CHECK_FALSE(r.invariant_measure);
    CHECK_FALSE(r.bipartite_warning);
  }

  TEST_CASE("diagonal breaking is non-ergodic") {
    StreamRng rng(37, 0);
    const auto inst = random_instance(rng, 10);
    const auto tilde = modified_generator(inst.q, Matrix::Identity(10, 10));
    const auto r = spectral_report(tilde);
    CHECK_FALSE(r.is_ergodic);
    CHECK(r.kernel_dim == 0);
    CHECK(spectral_report(inst.q).is_ergodic);
  }

  TEST_CASE("reversible spectra match the symmetrized solve") {
    StreamRng rng(38, 0);
    for (int rep = 0; rep < 5; ++rep) {
      const auto inst = random_instance(rng, 20, true);
      const auto r = spectral_report(inst.q);
      CHECK(r.symmetrizable);
      REQUIRE(r.symmetric_crosscheck_error);
      CHECK(*r.symmetric_crosscheck_error < 1e-9);
      for (const auto& z : r.eigenvalues) CHECK(std::abs(z.imag()) < 1e-9);
    }
  }

  TEST_CASE("eigenvalues sorted by real part and JSON shape") {
    StreamRng rng(39, 0);
    const auto inst = random_instance(rng, 12);
    const auto r = spectral_report(inst.q);
    for (std::size_t i = 1; i < r.eigenvalues.size(); ++i) CHECK(r.eigenvalues[i - 1].real() >= r.eigenvalues[i].real());
    const auto j = to_json(r);
    for (const char* key : {"eigenvalues", "lambda0", "spectral_gap", "kernel_dim", "invariant_measure", "is_ergodic",
                            "symmetrizable", "symmetric_crosscheck_error", "bipartite_warning"}) {
      CHECK(j.contains(key));
    }
    CHECK(j["eigenvalues"][0].size() == 2);
  }

  TEST_CASE("fixed point is the measure-weighted mean") {
    RowMatrix f(3, 2);
    f << 1, 2, 3, 4, 5, 6;
    const Vector uniform = Vector::Constant(3, 1.0 / 3.0);
    const Vector b = oversmoothing_fixed_point(FeatureField(f), uniform);
    CHECK(b(0) == doctest::Approx(3.0));
    CHECK(b(1) == doctest::Approx(4.0));
    Vector mu(3);
    mu << 0.2, 0.5, 0.3;
    const Vector c = oversmoothing_fixed_point(FeatureField(RowMatrix::Constant(3, 2, -1.5)), mu);
    CHECK((c.array() + 1.5).abs().maxCoeff() < 1e-15);
    CHECK_THROWS_AS(oversmoothing_fixed_point(FeatureField(f), Vector::Ones(2)), std::invalid_argument);
  }

  TEST_CASE("features converge to the fixed point") {
    StreamRng rng(40, 0);
    const auto inst = random_instance(rng, 10);
    const auto f = testing::random_features(10, 3, rng);
    const auto r = spectral_report(inst.q);
    const double horizon = 40.0 / r.spectral_gap;
    const auto sol = solve_cauchy(inst.q, f, std::vector{horizon}, SolveMethod::expm);
    const Vector b = oversmoothing_fixed_point(f, *r.invariant_measure);
    CHECK((sol.states[0].values().rowwise() - b.transpose()).cwiseAbs().maxCoeff() < 1e-8);
  }

  TEST_CASE("rate fit") {
    std::vector<double> times;
    for (int k = 0; k <= 10; ++k) times.push_back(0.5 * k);
    const auto sol = solve_cauchy(two_node(), unit_first(), times, SolveMethod::expm);
    Vector b(1);
    b << 0.5;
    CHECK(convergence_rate_fit(sol, b) == doctest::Approx(2.0).epsilon(0.01));

    const auto flat = solve_cauchy(two_node(), FeatureField(RowMatrix::Ones(2, 1)), times, SolveMethod::expm);
    CHECK_THROWS_WITH_AS(convergence_rate_fit(flat, Vector::Ones(1)), doctest::Contains("already converged"), NumericalError);
    const auto short_sol = solve_cauchy(two_node(), unit_first(), std::vector{0.0, 1.0}, SolveMethod::expm);
    CHECK_THROWS_AS(convergence_rate_fit(short_sol, b), std::invalid_argument);
  }

  TEST_CASE("rate fit tracks the gap on a reversible instance") {
    StreamRng rng(41, 0);
    const auto inst = random_instance(rng, 20, true);
    const auto r = spectral_report(inst.q);
    const auto f = testing::random_features(20, 2, rng);
    std::vector<double> times;
    for (int k = 0; k <= 15; ++k) times.push_back((10.0 + k) / r.spectral_gap);
    const auto sol = solve_cauchy(inst.q, f, times, SolveMethod::expm);
    const double rate = convergence_rate_fit(sol, oversmoothing_fixed_point(f, *r.invariant_measure));
    CHECK(rate == doctest::Approx(r.spectral_gap).epsilon(0.05));
  }

  TEST_CASE("feature spread") {
    RowMatrix f(3, 2);
    f << 0, 0, 3, 4, 1, 1;
    CHECK(feature_spread(FeatureField(f)) == doctest::Approx(5.0));
  }
}
