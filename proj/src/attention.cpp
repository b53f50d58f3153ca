#include "sglab/attention.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "sglab/io.hpp"

namespace sglab {

AttentionKernel make_kernel(std::string_view spec) {
  const auto colon = spec.find(':');
  const auto name = spec.substr(0, colon);
  if (name == "zero") {
    return {"zero", [](std::span<const double>, std::span<const double>) { return 0.0; }};
  }
  if (name == "dot") {
    return {"dot", [](std::span<const double> x, std::span<const double> y) {
              double s = 0.0;
              for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
              return s;
            }};
  }
  if (name == "scaled_dot") {
    if (colon == std::string_view::npos) throw std::invalid_argument("scaled_dot needs a temperature: scaled_dot:<tau>");
    const double tau = io::parse_real(spec.substr(colon + 1), 0);
    if (!(tau > 0.0) || !std::isfinite(tau)) throw std::invalid_argument("scaled_dot temperature must be positive");
    return {std::string(spec), [tau](std::span<const double> x, std::span<const double> y) {
              double s = 0.0;
              for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
              return s / tau;
            }};
  }
  if (name == "neg_sqdist") {
    return {"neg_sqdist", [](std::span<const double> x, std::span<const double> y) {
              double s = 0.0;
              for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
              return -s;
            }};
  }
  throw std::invalid_argument("unknown attention kernel '" + std::string(spec) + "'");
}

StochasticMatrix::StochasticMatrix(Matrix entries, double tolerance) : entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols() || entries_.rows() == 0) {
    throw std::invalid_argument("stochastic matrix must be square and nonempty");
  }
  for (Eigen::Index u = 0; u < entries_.rows(); ++u) {
    if (!entries_.row(u).allFinite() || entries_.row(u).minCoeff() < 0.0) {
      throw std::invalid_argument("row " + std::to_string(u) + " has negative or non-finite entries");
    }
    if (std::abs(entries_.row(u).sum() - 1.0) > tolerance) {
      throw std::invalid_argument("row " + std::to_string(u) + " does not sum to 1");
    }
  }
}

StochasticMatrix build_attention(const Graph& graph, const FeatureField& features,
                                 const AttentionKernel& kernel) {
  const auto n = graph.num_nodes();
  if (features.num_nodes() != n) throw std::invalid_argument("feature rows do not match node count");
  Matrix a = Matrix::Zero(n, n);
  std::vector<double> logits;
  for (std::size_t u = 0; u < n; ++u) {
    const auto nb = graph.neighbors(u);
    if (nb.empty()) throw std::invalid_argument("node " + std::to_string(u) + " has an empty attention support");
    logits.resize(nb.size());
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < nb.size(); ++i) {
      logits[i] = kernel.logit(features.row(u), features.row(nb[i]));
      if (!std::isfinite(logits[i])) {
        throw NumericalError("attention logit for edge (" + std::to_string(u) + "," + std::to_string(nb[i]) +
                             ") is not finite");
      }
      top = std::max(top, logits[i]);
    }
    double z = 0.0;
    for (auto& l : logits) z += (l = std::exp(l - top));
    for (std::size_t i = 0; i < nb.size(); ++i) a(u, nb[i]) = logits[i] / z;
  }
  return StochasticMatrix(std::move(a));
}

Generator generator_from_attention(const StochasticMatrix& attention) {
  Generator g;
  g.base = attention.matrix() - Matrix::Identity(attention.size(), attention.size());
  g.q = g.base;
  return g;
}

BreakingKind parse_breaking_kind(std::string_view name) {
  if (name == "exp") return BreakingKind::exp;
  if (name == "expn") return BreakingKind::expn;
  if (name == "log") return BreakingKind::log;
  if (name == "diagonal") return BreakingKind::diagonal;
  throw std::invalid_argument("unknown breaking kind '" + std::string(name) + "'");
}

std::string_view to_string(BreakingKind kind) {
  switch (kind) {
    case BreakingKind::exp: return "exp";
    case BreakingKind::expn: return "expn";
    case BreakingKind::log: return "log";
    case BreakingKind::diagonal: return "diagonal";
  }
  return "?";
}

Matrix breaking_term(const BreakingSpec& spec, const StochasticMatrix& attention) {
  const auto n = static_cast<Eigen::Index>(attention.size());
  Matrix c;
  if (spec.kind == BreakingKind::diagonal) {
    if (spec.diagonal_values.size() != n) throw std::invalid_argument("diagonal_values length must equal n");
    if (!spec.diagonal_values.allFinite() || (spec.diagonal_values.array() == 0.0).any()) {
      throw std::invalid_argument("diagonal breaking values must be finite and nonzero");
    }
    c = spec.diagonal_values.asDiagonal();
  } else {
    if (spec.order < 1) throw std::invalid_argument("breaking order must be >= 1");
    const Matrix& a = attention.matrix();
    c = Matrix::Zero(n, n);
    if (spec.include_identity && spec.kind != BreakingKind::log) c.diagonal().setOnes();
    Matrix power = Matrix::Identity(n, n);
    double factorial = 1.0;
    for (int k = 1; k <= spec.order; ++k) {
      power = power * a;
      factorial *= k;
      double coeff = 0.0;
      switch (spec.kind) {
        case BreakingKind::exp: coeff = 1.0 / factorial; break;
        case BreakingKind::expn: coeff = (k % 2 ? -1.0 : 1.0) / factorial; break;
        case BreakingKind::log: coeff = (k % 2 ? 1.0 : -1.0) / k; break;
        case BreakingKind::diagonal: break;
      }
      c += coeff * power;
    }
  }
  c *= spec.scale;
  if (spec.scale != 0.0 && (c * Vector::Ones(n)).cwiseAbs().maxCoeff() <= 1e-12) {
    throw NumericalError("breaking term annihilates constants (C·1 = 0); it cannot break ergodicity");
  }
  return c;
}

Generator modified_generator(const Generator& q, const Matrix& breaking) {
  if (breaking.rows() != q.q.rows() || breaking.cols() != q.q.cols()) {
    throw std::invalid_argument("breaking matrix dimension mismatch");
  }
  Generator out = q;
  out.q += breaking;
  out.breaking = q.breaking ? Matrix(*q.breaking + breaking) : breaking;
  return out;
}

Generator killed_generator(const Generator& q, const Vector& c) {
  if (c.size() != q.q.rows()) throw std::invalid_argument("killing vector length must equal n");
  for (Eigen::Index u = 0; u < c.size(); ++u) {
    if (!std::isfinite(c(u)) || c(u) > 0.0) {
      throw std::invalid_argument("killing entry c(" + std::to_string(u) +
                                  ") must be finite and <= 0 (it is the negated killing rate)");
    }
  }
  Generator out = q;
  out.q.diagonal() += c;
  out.killing = q.killing ? Vector(*q.killing + c) : c;
  return out;
}

}  // namespace sglab
