#pragma once
// Seeded random instances shared by the unit and acceptance tests.

#include <cstdint>
#include <string>
#include <vector>

#include "sglab/attention.hpp"
#include "sglab/graph.hpp"
#include "sglab/rng.hpp"

namespace sglab::testing {

/// Undirected connected graph: a random spanning tree plus extra edges with
/// probability p. Self-loops on every node when `loops` is set.
inline Graph random_connected_graph(std::size_t n, double p, StreamRng& rng, bool loops = true) {
  std::vector<Edge> edges;
  for (std::size_t v = 1; v < n; ++v) {
    edges.emplace_back(static_cast<std::size_t>(rng.uniform() * static_cast<double>(v)), v);
  }
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      if (rng.uniform() < p) edges.emplace_back(u, v);
    }
    if (loops) edges.emplace_back(u, u);
  }
  return Graph(n, std::move(edges));
}

/// Entries uniform in [-scale, scale].
inline FeatureField random_features(std::size_t n, std::size_t d, StreamRng& rng, double scale = 1.0) {
  RowMatrix m(n, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * (2.0 * rng.uniform() - 1.0);
  return FeatureField(std::move(m));
}

inline AttentionKernel random_kernel(StreamRng& rng) {
  static const char* names[] = {"zero", "dot", "scaled_dot:2", "neg_sqdist"};
  return make_kernel(names[static_cast<std::size_t>(rng.uniform() * 4.0)]);
}

/// Symmetric logits on an undirected graph give a reversible chain.
inline AttentionKernel symmetric_kernel(StreamRng& rng) {
  return rng.uniform() < 0.5 ? make_kernel("dot") : make_kernel("neg_sqdist");
}

inline std::size_t uniform_index(StreamRng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.uniform() * static_cast<double>(hi - lo + 1));
}

/// Two equal communities with dense intra and sparse inter connections, self-looped.
inline Graph two_block_graph(std::size_t n, double p_in, double p_out, StreamRng& rng) {
  std::vector<Edge> edges;
  for (std::size_t u = 0; u < n; ++u) {
    edges.emplace_back(u, u);
    for (std::size_t v = u + 1; v < n; ++v) {
      const bool same = (2 * u / n) == (2 * v / n);
      if (rng.uniform() < (same ? p_in : p_out) || v == u + 1) edges.emplace_back(u, v);
    }
  }
  return Graph(n, std::move(edges));
}

}  // namespace sglab::testing
