#include "sglab/semigroup.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "sglab/expm.hpp"
#include "sglab/io.hpp"
#include "sglab/ode.hpp"

namespace sglab {

SolveMethod parse_solve_method(std::string_view name) {
  if (name == "expm") return SolveMethod::expm;
  if (name == "rk4") return SolveMethod::rk4;
  if (name == "adaptive") return SolveMethod::adaptive;
  throw std::invalid_argument("unknown solve method '" + std::string(name) + "'");
}

std::string_view to_string(SolveMethod method) {
  switch (method) {
    case SolveMethod::expm: return "expm";
    case SolveMethod::rk4: return "rk4";
    case SolveMethod::adaptive: return "adaptive";
  }
  return "?";
}

Matrix matrix_exponential(const Generator& q, double t) {
  if (!std::isfinite(t) || t < 0.0) throw std::invalid_argument("time must be finite and nonnegative");
  if (t == 0.0) return Matrix::Identity(q.q.rows(), q.q.cols());
  return expm(t * q.q);
}

SemigroupSolution solve_cauchy(const Generator& q, const FeatureField& f, std::span<const double> times,
                               SolveMethod method) {
  if (f.num_nodes() != q.size()) throw std::invalid_argument("feature rows do not match generator size");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i]) || times[i] < 0.0 || (i && times[i] < times[i - 1])) {
      throw std::invalid_argument("times must be finite, nonnegative and sorted");
    }
  }
  SemigroupSolution out;
  out.times.assign(times.begin(), times.end());
  out.method = method;
  out.provenance = {q.has_breaking(), q.has_killing()};

  const Matrix f0 = f.values();
  std::vector<Matrix> states;
  switch (method) {
    case SolveMethod::expm:
      for (const double t : times) states.push_back(t == 0.0 ? f0 : Matrix(matrix_exponential(q, t) * f0));
      break;
    case SolveMethod::rk4: states = integrate_rk4(q.q, f0, times); break;
    case SolveMethod::adaptive: states = integrate_adaptive(q.q, f0, times); break;
  }
  out.states.reserve(states.size());
  for (auto& s : states) {
    if (!s.allFinite()) throw NumericalError("solution became non-finite");
    out.states.emplace_back(RowMatrix(s));
  }
  return out;
}

void write_solution_csv(const SemigroupSolution& solution, const std::filesystem::path& path) {
  auto out = io::open_output(path);
  out << "t,node,dim,value\n";
  for (std::size_t k = 0; k < solution.times.size(); ++k) {
    const auto& h = solution.states[k].values();
    const auto t = io::format_real(solution.times[k]);
    for (Eigen::Index u = 0; u < h.rows(); ++u) {
      for (Eigen::Index i = 0; i < h.cols(); ++i) out << t << ',' << u << ',' << i << ',' << io::format_real(h(u, i)) << '\n';
    }
  }
}

namespace {

Graph support_graph(const Matrix& a) {
  std::vector<Edge> edges;
  for (Eigen::Index u = 0; u < a.rows(); ++u) {
    for (Eigen::Index v = 0; v < a.cols(); ++v) {
      if (a(u, v) != 0.0) edges.emplace_back(u, v);
    }
  }
  return Graph(static_cast<std::size_t>(a.rows()), std::move(edges), Directedness::directed);
}

}  // namespace

Vector invariant_measure(const StochasticMatrix& attention, const InvariantMeasureOptions& options) {
  const Matrix& a = attention.matrix();
  if (!support_graph(a).connected()) {
    throw std::invalid_argument("attention support is not (strongly) connected; the invariant measure is not unique");
  }
  const auto n = a.rows();
  const Matrix at = a.transpose();
  Vector mu = Vector::Constant(n, 1.0 / static_cast<double>(n));
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    const Vector next = at * mu;
    if ((next - mu).cwiseAbs().maxCoeff() < options.tolerance) {
      mu = next / next.sum();
      break;
    }
    // Lazy step: same fixed point, no periodic oscillation.
    mu = 0.5 * (mu + next);
    mu /= mu.sum();
    if (it + 1 == options.max_iterations) throw NumericalError("power iteration for the invariant measure did not converge");
  }
  // A stalled-step test leaves an error of order tolerance / gap on slowly
  // mixing chains. One Newton correction on (Aᵀ - I)μ = 0, Σμ = 1 removes it.
  Matrix system = at - Matrix::Identity(n, n);
  Vector residual = -(system * mu);
  system.row(n - 1).setOnes();
  residual(n - 1) = 0.0;
  const Vector refined = mu + system.partialPivLu().solve(residual);
  if (refined.allFinite() && refined.minCoeff() >= -options.tolerance) mu = refined.cwiseMax(0.0) / refined.cwiseMax(0.0).sum();
  return mu;
}

Vector invariant_measure_dense(const StochasticMatrix& attention) {
  Eigen::EigenSolver<Matrix> es(attention.matrix().transpose());
  if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed");
  Eigen::Index best = 0;
  es.eigenvalues().unaryExpr([](std::complex<double> z) { return std::abs(z - 1.0); }).minCoeff(&best);
  Vector mu = es.eigenvectors().col(best).real();
  if (mu.sum() < 0) mu = -mu;
  mu = mu.cwiseMax(0.0);
  return mu / mu.sum();
}

SpectralReport spectral_report(const Generator& q, const SpectralOptions& options) {
  const Matrix& m = q.q;
  const auto n = m.rows();
  SpectralReport report;

  Eigen::EigenSolver<Matrix> es(m, false);
  if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed");
  report.eigenvalues.assign(es.eigenvalues().data(), es.eigenvalues().data() + n);
  std::sort(report.eigenvalues.begin(), report.eigenvalues.end(), [](auto x, auto y) {
    return x.real() != y.real() ? x.real() > y.real() : x.imag() > y.imag();
  });
  report.lambda0 = report.eigenvalues.front();
  report.spectral_gap = n > 1 ? std::abs(report.eigenvalues[1].real()) : 0.0;

  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) < options.kernel_tolerance) ++report.kernel_dim;
  }
  if (report.kernel_dim == 1) {
    const Vector kernel = svd.matrixV().col(n - 1);
    const double mean = kernel.mean();
    const double sd = std::sqrt((kernel.array() - mean).square().mean());
    report.is_ergodic = std::abs(mean) > 0.0 && sd / std::abs(mean) < options.constancy_tolerance;
  }

  if (q.is_markov()) {
    const Matrix a = q.attention();
    const Graph support = support_graph(a);
    bool loop_free = true;
    for (Eigen::Index u = 0; u < n; ++u) loop_free = loop_free && a(u, u) == 0.0;
    report.bipartite_warning = loop_free && n > 1 && support.bipartite();

    if (support.connected()) {
      StochasticMatrix sa(a, 1e-10);
      const Vector mu = invariant_measure(sa);
      report.invariant_measure = mu;

      double imbalance = 0.0;
      for (Eigen::Index u = 0; u < n; ++u) {
        for (Eigen::Index v = 0; v < n; ++v) imbalance = std::max(imbalance, std::abs(mu(u) * a(u, v) - mu(v) * a(v, u)));
      }
      report.symmetrizable = imbalance < options.balance_tolerance;
      if (report.symmetrizable) {
        const Vector root = mu.cwiseSqrt();
        Matrix sym = root.asDiagonal() * a * root.cwiseInverse().asDiagonal();
        sym = 0.5 * (sym + sym.transpose()) - Matrix::Identity(n, n);
        Eigen::SelfAdjointEigenSolver<Matrix> ses(sym, Eigen::EigenvaluesOnly);
        std::vector<double> sym_eigs(ses.eigenvalues().data(), ses.eigenvalues().data() + n);
        std::sort(sym_eigs.rbegin(), sym_eigs.rend());
        double err = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          err = std::max(err, std::abs(report.eigenvalues[i] - std::complex<double>(sym_eigs[i], 0.0)));
        }
        report.symmetric_crosscheck_error = err;
      }
    }
  }
  return report;
}

nlohmann::json to_json(const SpectralReport& report) {
  nlohmann::json j;
  auto eigs = nlohmann::json::array();
  for (const auto& z : report.eigenvalues) eigs.push_back({z.real(), z.imag()});
  j["eigenvalues"] = eigs;
  j["lambda0"] = {report.lambda0.real(), report.lambda0.imag()};
  j["spectral_gap"] = report.spectral_gap;
  j["kernel_dim"] = report.kernel_dim;
  if (report.invariant_measure) {
    j["invariant_measure"] = std::vector<double>(report.invariant_measure->data(),
                                                 report.invariant_measure->data() + report.invariant_measure->size());
  } else {
    j["invariant_measure"] = nullptr;
  }
  j["is_ergodic"] = report.is_ergodic;
  j["symmetrizable"] = report.symmetrizable;
  j["symmetric_crosscheck_error"] =
      report.symmetric_crosscheck_error ? nlohmann::json(*report.symmetric_crosscheck_error) : nlohmann::json(nullptr);
  j["bipartite_warning"] = report.bipartite_warning;
  return j;
}

Vector oversmoothing_fixed_point(const FeatureField& f, const Vector& mu) {
  if (static_cast<std::size_t>(mu.size()) != f.num_nodes()) throw std::invalid_argument("measure length does not match node count");
  return f.values().transpose() * mu;
}

double convergence_rate_fit(const SemigroupSolution& solution, const Vector& fixed_point, double floor) {
  if (solution.times.size() < 5) throw std::invalid_argument("rate fit needs at least 5 recorded times");
  std::vector<double> ts, logs;
  for (std::size_t k = 0; k < solution.times.size(); ++k) {
    const auto& h = solution.states[k].values();
    const double dev = (h.rowwise() - fixed_point.transpose()).norm();
    if (dev > floor) {
      ts.push_back(solution.times[k]);
      logs.push_back(std::log(dev));
    }
  }
  if (ts.size() < 2) throw NumericalError("already converged: deviations are below the floating-point floor");
  const double n = static_cast<double>(ts.size());
  double mt = 0.0, ml = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    mt += ts[i] / n;
    ml += logs[i] / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    sxy += (ts[i] - mt) * (logs[i] - ml);
    sxx += (ts[i] - mt) * (ts[i] - mt);
  }
  if (sxx == 0.0) throw std::invalid_argument("rate fit needs distinct times");
  return -sxy / sxx;
}

double feature_spread(const FeatureField& h) {
  const auto& v = h.values();
  double best = 0.0;
  for (Eigen::Index u = 0; u < v.rows(); ++u) {
    for (Eigen::Index w = u + 1; w < v.rows(); ++w) best = std::max(best, (v.row(u) - v.row(w)).norm());
  }
  return best;
}

}  // namespace sglab
