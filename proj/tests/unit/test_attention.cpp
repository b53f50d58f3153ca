#include <doctest.h>

#include <cmath>

#include "sglab/attention.hpp"
#include "sglab/expm.hpp"
#include "sglab/semigroup.hpp"
#include "support/instances.hpp"

using namespace sglab;

namespace {

FeatureField column(std::initializer_list<double> xs) {
  RowMatrix m(xs.size(), 1);
  Eigen::Index i = 0;
  for (double x : xs) m(i++, 0) = x;
  return FeatureField(m);
}

// Direct evaluation of the softmax weight over u's neighbors, no shift.
double brute_weight(const Graph& g, const FeatureField& f, const AttentionKernel& k, std::size_t u, std::size_t v) {
  double z = 0.0;
  for (auto w : g.neighbors(u)) z += std::exp(k.logit(f.row(u), f.row(w)));
  return g.has_edge(u, v) ? std::exp(k.logit(f.row(u), f.row(v))) / z : 0.0;
}

}  // namespace

TEST_SUITE("attention") {
  TEST_CASE("zero kernel gives uniform rows") {
    const Graph star(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
    const auto a = build_attention(star, column({0, 0, 0, 0, 0}), make_kernel("zero"));
    for (std::size_t v = 1; v < 5; ++v) CHECK(a(0, v) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(a(1, 0) == 1.0);
  }

  TEST_CASE("dot kernel with zero logits on a path") {
    const Graph path(3, {{0, 1}, {1, 2}});
    const auto a = build_attention(path, column({1, 0, -1}), make_kernel("dot"));
    CHECK(a(1, 0) == doctest::Approx(0.5));
    CHECK(a(1, 2) == doctest::Approx(0.5));
    CHECK(a(1, 1) == 0.0);
  }

  TEST_CASE("softmax matches a brute-force evaluation") {
    const Graph g(2, {{0, 1}, {0, 0}, {1, 1}});
    const auto f = column({1, 2});
    const auto k = make_kernel("dot");
    const auto a = build_attention(g, f, k);
    // Row 0 logits: 1·1 = 1 (self), 1·2 = 2. Row 1: 2, 4.
    CHECK(a(0, 0) == doctest::Approx(std::exp(1.0) / (std::exp(1.0) + std::exp(2.0))).epsilon(1e-14));
    CHECK(a(1, 1) == doctest::Approx(std::exp(4.0) / (std::exp(2.0) + std::exp(4.0))).epsilon(1e-14));

    StreamRng rng(5, 0);
    for (int rep = 0; rep < 20; ++rep) {
      const auto graph = testing::random_connected_graph(9, 0.3, rng, rep % 2 == 0);
      const auto feats = testing::random_features(9, 3, rng);
      const auto kernel = testing::random_kernel(rng);
      const auto att = build_attention(graph, feats, kernel);
      for (std::size_t u = 0; u < 9; ++u) {
        for (std::size_t v = 0; v < 9; ++v) CHECK(att(u, v) == doctest::Approx(brute_weight(graph, feats, kernel, u, v)).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("rows sum to one and support stays on edges") {
    StreamRng rng(6, 0);
    for (int rep = 0; rep < 100; ++rep) {
      const auto g = testing::random_connected_graph(10, 0.2, rng, rep % 3 != 0);
      const auto a = build_attention(g, testing::random_features(10, 2, rng, 3.0), testing::random_kernel(rng));
      const Vector sums = a.matrix().rowwise().sum();
      CHECK((sums.array() - 1.0).abs().maxCoeff() < 1e-12);
      for (std::size_t u = 0; u < 10; ++u) {
        for (std::size_t v = 0; v < 10; ++v) {
          if (!g.has_edge(u, v)) CHECK(a(u, v) == 0.0);
        }
      }
      const auto q = generator_from_attention(a);
      CHECK(q.q.rowwise().sum().cwiseAbs().maxCoeff() < 1e-12);
      CHECK(q.is_markov());
    }
  }

  TEST_CASE("softmax is shift invariant and overflow safe") {
    const Graph g(3, {{0, 1}, {1, 2}, {0, 0}, {1, 1}, {2, 2}});
    const auto f = column({0.3, -1.2, 2.0});
    const auto base = make_kernel("dot");
    const AttentionKernel shifted{"shifted", [&](auto x, auto y) { return base.logit(x, y) + 1000.0; }};
    const auto a = build_attention(g, f, base);
    const auto b = build_attention(g, f, shifted);
    CHECK((a.matrix() - b.matrix()).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("isolated node is named in the error") {
    const Graph g(3, {{0, 1}});
    CHECK_THROWS_WITH_AS(build_attention(g, column({0, 0, 0}), make_kernel("zero")), doctest::Contains("node 2"),
                         std::invalid_argument);
  }

  TEST_CASE("kernel registry") {
    CHECK(make_kernel("scaled_dot:4").logit(std::vector{2.0}, std::vector{3.0}) == doctest::Approx(1.5));
    CHECK(make_kernel("neg_sqdist").logit(std::vector{1.0, 0.0}, std::vector{0.0, 2.0}) == doctest::Approx(-5.0));
    CHECK_THROWS_AS(make_kernel("cosine"), std::invalid_argument);
    CHECK_THROWS_AS(make_kernel("scaled_dot:-1"), std::invalid_argument);
    CHECK_THROWS_AS(make_kernel("scaled_dot"), std::invalid_argument);
  }

  TEST_CASE("stochastic matrix validation") {
    CHECK_THROWS_AS(StochasticMatrix(Matrix::Constant(2, 2, 0.6)), std::invalid_argument);
    Matrix neg(2, 2);
    neg << 1.5, -0.5, 0, 1;
    CHECK_THROWS_AS(StochasticMatrix{neg}, std::invalid_argument);
  }

  TEST_CASE("generator from attention") {
    CHECK(generator_from_attention(StochasticMatrix(Matrix::Identity(3, 3))).q.isZero());
    Matrix swap(2, 2);
    swap << 0, 1, 1, 0;
    Matrix expected(2, 2);
    expected << -1, 1, 1, -1;
    CHECK(generator_from_attention(StochasticMatrix(swap)).q == expected);
  }

  TEST_CASE("series breaking terms match term-by-term sums") {
    StreamRng rng(7, 0);
    const auto g = testing::random_connected_graph(5, 0.5, rng);
    const auto a = build_attention(g, testing::random_features(5, 2, rng), make_kernel("dot"));
    const Matrix& m = a.matrix();
    const Matrix m2 = m * m, m3 = m2 * m;

    CHECK((breaking_term({BreakingKind::exp, 1, 2.5}, a) - 2.5 * m).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((breaking_term({BreakingKind::log, 2, 1.0}, a) - (m - m2 / 2.0)).cwiseAbs().maxCoeff() < 1e-14);
    const Matrix expn3 = -m + m2 / 2.0 - m3 / 6.0;
    CHECK((breaking_term({BreakingKind::expn, 3, 1.0}, a) - expn3).cwiseAbs().maxCoeff() < 1e-14);
    const Matrix exp2_id = Matrix::Identity(5, 5) + m + m2 / 2.0;
    CHECK((breaking_term({BreakingKind::exp, 2, 1.0, true}, a) - exp2_id).cwiseAbs().maxCoeff() < 1e-14);

    BreakingSpec diag{BreakingKind::diagonal};
    diag.diagonal_values = Vector::LinSpaced(5, 1.0, 2.0);
    CHECK(breaking_term(diag, a) == Matrix(diag.diagonal_values.asDiagonal()));
    diag.diagonal_values(2) = 0.0;
    CHECK_THROWS_AS(breaking_term(diag, a), std::invalid_argument);
  }

  TEST_CASE("breaking terms move constants out of the kernel") {
    StreamRng rng(8, 0);
    const auto g = testing::random_connected_graph(6, 0.4, rng);
    const auto a = build_attention(g, testing::random_features(6, 2, rng), make_kernel("dot"));
    for (auto kind : {BreakingKind::exp, BreakingKind::expn, BreakingKind::log}) {
      for (int order = 1; order <= 6; ++order) {
        const Matrix c = breaking_term({kind, order, 1.0}, a);
        CHECK(c.rowwise().sum().cwiseAbs().minCoeff() > 1e-3);
      }
    }
    CHECK(breaking_term({BreakingKind::exp, 3, 0.0}, a).isZero());
  }

  TEST_CASE("modified generator") {
    const auto a = build_attention(Graph(3, {{0, 1}, {1, 2}, {2, 0}}, Directedness::directed), column({0, 0, 0}),
                                   make_kernel("zero"));
    const auto q = generator_from_attention(a);
    CHECK(modified_generator(q, Matrix::Zero(3, 3)).q == q.q);

    const auto tilde = modified_generator(q, Matrix::Identity(3, 3));
    CHECK(tilde.has_breaking());
    CHECK_FALSE(tilde.is_markov());
    CHECK((tilde.q * Vector::Ones(3) - Vector::Ones(3)).norm() < 1e-15);

    // 3-cycle with first-order log breaking: no constant vector in the kernel.
    const auto log1 = modified_generator(q, breaking_term({BreakingKind::log, 1, 1.0}, a));
    Eigen::JacobiSVD<Matrix> svd(log1.q, Eigen::ComputeFullV);
    const Vector ones = Vector::Ones(3) / std::sqrt(3.0);
    for (Eigen::Index i = 0; i < 3; ++i) {
      if (svd.singularValues()(i) < 1e-9) CHECK(std::abs(svd.matrixV().col(i).dot(ones)) < 1e-8);
    }
    CHECK(svd.singularValues().minCoeff() > 1e-9);  // Ã = A here, invertible
    CHECK_THROWS_AS(modified_generator(q, Matrix::Zero(2, 2)), std::invalid_argument);
  }

  TEST_CASE("killed generator") {
    Matrix swap(2, 2);
    swap << 0, 1, 1, 0;
    const auto q = generator_from_attention(StochasticMatrix(swap));
    CHECK(killed_generator(q, Vector::Zero(2)).q == q.q);
    Matrix expected(2, 2);
    expected << -2, 1, 1, -2;
    CHECK(killed_generator(q, Vector::Constant(2, -1.0)).q == expected);
    CHECK_THROWS_AS(killed_generator(q, Vector::Constant(2, 0.1)), std::invalid_argument);
  }

  TEST_CASE("constant killing commutes with the generator") {
    StreamRng rng(9, 0);
    const auto g = testing::random_connected_graph(6, 0.4, rng);
    const auto q = generator_from_attention(build_attention(g, testing::random_features(6, 2, rng), make_kernel("dot")));
    const double c = -0.7, t = 1.3;
    const Matrix lhs = expm(t * killed_generator(q, Vector::Constant(6, c)).q);
    const Matrix rhs = std::exp(c * t) * expm(t * q.q);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
  }

  TEST_CASE("killed generators on connected graphs have negative spectral abscissa") {
    StreamRng rng(10, 0);
    for (int rep = 0; rep < 10; ++rep) {
      const auto n = testing::uniform_index(rng, 3, 50);
      const auto g = testing::random_connected_graph(n, 3.0 / n, rng);
      const auto q = generator_from_attention(build_attention(g, testing::random_features(n, 2, rng), make_kernel("dot")));
      Vector c = Vector::Zero(n);
      c(testing::uniform_index(rng, 0, n - 1)) = -0.5;
      const auto rep_q = spectral_report(killed_generator(q, c));
      CHECK(rep_q.lambda0.real() < -1e-12);
    }
  }
}
