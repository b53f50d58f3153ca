#pragma once

#include <filesystem>
#include <vector>

#include "sglab/attention.hpp"
#include "sglab/graph.hpp"
#include "sglab/types.hpp"

namespace sglab {

/// P_t = A(H_t)···A(H_0) with the smallest edge-supported attention entry
/// seen across all factors.
struct ProductOperator {
  Matrix p;
  std::size_t step = 0;
  double epsilon = 1.0;
};

struct RolloutResult {
  /// H_0 .. H_T.
  std::vector<FeatureField> features;
  /// products[t] = P_t, t = 0 .. T−1, so that H_{t+1} = P_t H_0.
  std::vector<ProductOperator> products;
  /// Attention entry floor of each individual factor A(H_t).
  std::vector<double> factor_min_entry;
  /// Largest row-sum correction applied while accumulating products.
  double max_row_drift = 0.0;
  bool self_loops = false;
  /// Edge list of the graph the rollout ran on (for the entry-floor check).
  std::vector<Edge> edges;
};

/// Iterates H_{t+1} = A(H_t) H_t for `steps` steps, rebuilding attention from
/// the current features. Throws NumericalError on non-finite features or if
/// the max-norm ever grows beyond ‖H_0‖_max (+1e-10).
RolloutResult nonlinear_rollout(const Graph& graph, const FeatureField& f, const AttentionKernel& kernel,
                                std::size_t steps);

/// ½ Σ|p_i − q_i|. Both arguments must be probability vectors (1e-10).
double tv_distance(const Vector& p, const Vector& q);

/// Largest TV distance between any two rows of `m`.
double max_row_tv(const Matrix& m);

/// trace[t] = max_{u,v} TV(P_t(u,·), P_t(v,·)).
std::vector<double> weak_ergodicity_trace(const RolloutResult& rollout);

/// A-priori floor on edge-supported attention entries when every logit
/// satisfies |Φ| ≤ logit_bound: e^{−2C}/Δ, or 1/(Δ e^{C}) when the logits are
/// known to lie in [0, C]. Δ is the largest attention support.
double doeblin_epsilon_bound(const Graph& graph, double logit_bound, bool nonnegative_logits = false);

/// Checks P_t(u,v) ≥ ε^{t+1} on every edge for all recorded t, with ε the
/// rollout's a-posteriori floor. Throws std::invalid_argument when the graph
/// lacks self-loops.
bool selfloop_floor_check(const RolloutResult& rollout);

/// Columns t,max_pair_tv,doeblin_bound,min_edge_entry,feature_spread.
void write_trace_csv(const RolloutResult& rollout, const std::filesystem::path& path);

}  // namespace sglab
