#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "sglab/types.hpp"

namespace sglab {

using Edge = std::pair<std::size_t, std::size_t>;

enum class Directedness { undirected, directed };

/// Unweighted graph on dense node ids [0, n). Undirected graphs store both
/// orientations of every edge. Immutable after construction.
class Graph {
 public:
  /// Deduplicates `edges`, symmetrizes them when undirected, and throws
  /// std::invalid_argument on out-of-range endpoints.
  Graph(std::size_t n, std::vector<Edge> edges, Directedness directedness = Directedness::undirected);

  std::size_t num_nodes() const noexcept { return n_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  bool directed() const noexcept { return directedness_ == Directedness::directed; }
  Directedness directedness() const noexcept { return directedness_; }
  /// True iff every node carries a self-loop.
  bool self_loops() const noexcept { return self_loops_; }

  /// Out-neighbors of `u` in increasing order (includes u itself when looped).
  std::span<const std::size_t> neighbors(std::size_t u) const;
  bool has_edge(std::size_t u, std::size_t v) const;
  /// Topological out-degree, self-loops counted.
  Vector degrees() const;
  std::size_t max_degree() const;

  /// Strong connectivity of the directed support (plain connectivity when undirected).
  bool connected() const;
  /// Bipartiteness of the underlying undirected graph, ignoring self-loops.
  bool bipartite() const;

  /// Same topology with (u,u) added for every node.
  Graph with_self_loops() const;

 private:
  std::size_t n_;
  Directedness directedness_;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> targets_;
  bool self_loops_ = false;
};

/// Node features, one row per node. All entries must be finite.
class FeatureField {
 public:
  FeatureField() = default;
  explicit FeatureField(RowMatrix values);

  std::size_t num_nodes() const noexcept { return static_cast<std::size_t>(values_.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(values_.cols()); }
  const RowMatrix& values() const noexcept { return values_; }
  std::span<const double> row(std::size_t u) const {
    return {values_.data() + u * dim(), dim()};
  }
  double max_abs() const { return values_.size() == 0 ? 0.0 : values_.cwiseAbs().maxCoeff(); }

 private:
  RowMatrix values_;
};

struct NodeLabels {
  std::vector<std::size_t> labels;
  std::size_t num_classes = 0;
};

struct EdgeListOptions {
  /// Overrides the file's `directed`/`undirected` header when set.
  std::optional<Directedness> directedness;
  /// When set, node tokens must be integers in [0, num_nodes). When unset,
  /// tokens are remapped to dense ids in first-seen order.
  std::optional<std::size_t> num_nodes;
  /// Where to write the token→id table when remapping. Defaults to
  /// `<path>.nodemap.csv`; pass an empty path to suppress.
  std::optional<std::filesystem::path> node_map_path;
};

Graph load_graph(const std::filesystem::path& path, const EdgeListOptions& options = {});
/// Writes a `directed`/`undirected` header followed by one `u,v` line per
/// stored edge (each unordered pair once when undirected).
void save_graph(const Graph& graph, const std::filesystem::path& path);

FeatureField load_features(const std::filesystem::path& path);
void save_features(const FeatureField& features, const std::filesystem::path& path);
NodeLabels load_labels(const std::filesystem::path& path);
void save_labels(const NodeLabels& labels, const std::filesystem::path& path);

struct HomophilyGraph {
  Graph graph;
  NodeLabels labels;
};

/// Stochastic block model with k evenly sized classes and a self-loop on
/// every node. Node u belongs to class floor(u*k/n).
HomophilyGraph generate_homophily_graph(std::size_t n, std::size_t k, double p_in, double p_out,
                                        std::uint64_t seed);

/// Expected edge homophily of generate_homophily_graph for even class sizes.
double expected_homophily(std::size_t n, std::size_t k, double p_in, double p_out);

/// Fraction of non-loop edges whose endpoints share a label; 1 if there are none.
double homophily_ratio(const Graph& graph, const NodeLabels& labels);

}  // namespace sglab
