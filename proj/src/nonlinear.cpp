#include "sglab/nonlinear.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sglab/io.hpp"
#include "sglab/semigroup.hpp"

namespace sglab {

namespace {

double min_edge_entry(const Matrix& a, const std::vector<Edge>& edges) {
  double m = 1.0;
  for (const auto& [u, v] : edges) m = std::min(m, a(u, v));
  return m;
}

}  // namespace

RolloutResult nonlinear_rollout(const Graph& graph, const FeatureField& f, const AttentionKernel& kernel,
                                std::size_t steps) {
  RolloutResult out;
  out.self_loops = graph.self_loops();
  out.edges = graph.edges();
  out.features.push_back(f);
  const double h0_max = f.max_abs();

  Matrix product;
  double epsilon = 1.0;
  for (std::size_t t = 0; t < steps; ++t) {
    const auto attention = build_attention(graph, out.features.back(), kernel);
    const Matrix& a = attention.matrix();
    const double floor = min_edge_entry(a, out.edges);
    out.factor_min_entry.push_back(floor);
    epsilon = std::min(epsilon, floor);

    product = t == 0 ? a : Matrix(a * product);
    const Vector sums = product.rowwise().sum();
    const double drift = (sums.array() - 1.0).abs().maxCoeff();
    out.max_row_drift = std::max(out.max_row_drift, drift);
    if (drift > 1e-12) product = sums.cwiseInverse().asDiagonal() * product;
    out.products.push_back({product, t, epsilon});

    RowMatrix next = a * out.features.back().values();
    if (!next.allFinite()) throw NumericalError("non-finite features at step " + std::to_string(t + 1));
    const double next_max = next.cwiseAbs().maxCoeff();
    if (next_max > h0_max + 1e-10) {
      throw NumericalError("max-norm grew at step " + std::to_string(t + 1) + ": " + std::to_string(next_max) +
                           " > " + std::to_string(h0_max));
    }
    out.features.emplace_back(std::move(next));
  }
  return out;
}

double tv_distance(const Vector& p, const Vector& q) {
  if (p.size() != q.size()) throw std::invalid_argument("tv_distance: length mismatch");
  for (const Vector* v : {&p, &q}) {
    if ((v->array() < 0.0).any() || std::abs(v->sum() - 1.0) > 1e-10) {
      throw std::invalid_argument("tv_distance expects probability vectors");
    }
  }
  return 0.5 * (p - q).cwiseAbs().sum();
}

double max_row_tv(const Matrix& m) {
  double best = 0.0;
  for (Eigen::Index u = 0; u < m.rows(); ++u) {
    for (Eigen::Index v = u + 1; v < m.rows(); ++v) best = std::max(best, 0.5 * (m.row(u) - m.row(v)).cwiseAbs().sum());
  }
  return best;
}

std::vector<double> weak_ergodicity_trace(const RolloutResult& rollout) {
  std::vector<double> trace;
  trace.reserve(rollout.products.size());
  for (const auto& p : rollout.products) trace.push_back(max_row_tv(p.p));
  return trace;
}

double doeblin_epsilon_bound(const Graph& graph, double logit_bound, bool nonnegative_logits) {
  if (!std::isfinite(logit_bound) || logit_bound < 0.0) throw std::invalid_argument("logit bound must be finite and >= 0");
  const auto support = static_cast<double>(graph.max_degree());
  if (support == 0.0) throw std::invalid_argument("graph has an empty neighborhood");
  return nonnegative_logits ? 1.0 / (support * std::exp(logit_bound)) : std::exp(-2.0 * logit_bound) / support;
}

bool selfloop_floor_check(const RolloutResult& rollout) {
  if (!rollout.self_loops) throw std::invalid_argument("entry floor check requires a self-loop on every node");
  if (rollout.products.empty()) return true;
  for (const auto& p : rollout.products) {
    const double floor = std::pow(p.epsilon, static_cast<double>(p.step + 1));
    for (const auto& [u, v] : rollout.edges) {
      if (p.p(u, v) < floor) return false;
    }
  }
  return true;
}

void write_trace_csv(const RolloutResult& rollout, const std::filesystem::path& path) {
  auto out = io::open_output(path);
  out << "t,max_pair_tv,doeblin_bound,min_edge_entry,feature_spread\n";
  const auto trace = weak_ergodicity_trace(rollout);
  for (std::size_t t = 0; t < trace.size(); ++t) {
    const double eps = rollout.products[t].epsilon;
    out << t << ',' << io::format_real(trace[t]) << ',' << io::format_real(std::pow(1.0 - eps, static_cast<double>(t)))
        << ',' << io::format_real(eps) << ',' << io::format_real(feature_spread(rollout.features[t + 1])) << '\n';
  }
}

}  // namespace sglab
