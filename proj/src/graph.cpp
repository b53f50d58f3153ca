#include "sglab/graph.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>
#include <unordered_map>

#include "sglab/io.hpp"
#include "sglab/rng.hpp"

namespace sglab {

Graph::Graph(std::size_t n, std::vector<Edge> edges, Directedness directedness)
    : n_(n), directedness_(directedness) {
  if (n == 0) throw std::invalid_argument("graph must have at least one node");
  for (const auto& [u, v] : edges) {
    if (u >= n || v >= n) {
      throw std::invalid_argument("edge (" + std::to_string(u) + "," + std::to_string(v) +
                                  ") has an endpoint out of range for n=" + std::to_string(n));
    }
  }
  if (directedness == Directedness::undirected) {
    const std::size_t m = edges.size();
    edges.reserve(2 * m);
    for (std::size_t i = 0; i < m; ++i) edges.emplace_back(edges[i].second, edges[i].first);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  edges_ = std::move(edges);

  offsets_.assign(n + 1, 0);
  for (const auto& e : edges_) ++offsets_[e.first + 1];
  for (std::size_t u = 0; u < n; ++u) offsets_[u + 1] += offsets_[u];
  targets_.reserve(edges_.size());
  for (const auto& e : edges_) targets_.push_back(e.second);

  self_loops_ = true;
  for (std::size_t u = 0; u < n && self_loops_; ++u) self_loops_ = has_edge(u, u);
}

std::span<const std::size_t> Graph::neighbors(std::size_t u) const {
  return {targets_.data() + offsets_[u], offsets_[u + 1] - offsets_[u]};
}

bool Graph::has_edge(std::size_t u, std::size_t v) const {
  const auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

Vector Graph::degrees() const {
  Vector d(n_);
  for (std::size_t u = 0; u < n_; ++u) d(u) = static_cast<double>(offsets_[u + 1] - offsets_[u]);
  return d;
}

std::size_t Graph::max_degree() const {
  std::size_t best = 0;
  for (std::size_t u = 0; u < n_; ++u) best = std::max(best, offsets_[u + 1] - offsets_[u]);
  return best;
}

namespace {

std::size_t reach_count(std::size_t n, std::size_t start,
                        const std::vector<std::vector<std::size_t>>& adj) {
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> stack{start};
  seen[start] = true;
  std::size_t count = 1;
  while (!stack.empty()) {
    const auto u = stack.back();
    stack.pop_back();
    for (auto v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++count;
        stack.push_back(v);
      }
    }
  }
  return count;
}

}  // namespace

bool Graph::connected() const {
  std::vector<std::vector<std::size_t>> fwd(n_), bwd(n_);
  for (const auto& [u, v] : edges_) {
    fwd[u].push_back(v);
    bwd[v].push_back(u);
  }
  return reach_count(n_, 0, fwd) == n_ && reach_count(n_, 0, bwd) == n_;
}

bool Graph::bipartite() const {
  std::vector<std::vector<std::size_t>> adj(n_);
  for (const auto& [u, v] : edges_) {
    if (u == v) continue;
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  std::vector<int> colour(n_, -1);
  for (std::size_t s = 0; s < n_; ++s) {
    if (colour[s] >= 0) continue;
    colour[s] = 0;
    std::queue<std::size_t> q;
    q.push(s);
    while (!q.empty()) {
      const auto u = q.front();
      q.pop();
      for (auto v : adj[u]) {
        if (colour[v] < 0) {
          colour[v] = 1 - colour[u];
          q.push(v);
        } else if (colour[v] == colour[u]) {
          return false;
        }
      }
    }
  }
  return true;
}

Graph Graph::with_self_loops() const {
  auto e = edges_;
  for (std::size_t u = 0; u < n_; ++u) e.emplace_back(u, u);
  return Graph(n_, std::move(e), directedness_);
}

FeatureField::FeatureField(RowMatrix values) : values_(std::move(values)) {
  if (!values_.allFinite()) throw std::invalid_argument("feature matrix has non-finite entries");
}

// ---------------------------------------------------------------------------
// File formats

Graph load_graph(const std::filesystem::path& path, const EdgeListOptions& options) {
  auto in = io::open_input(path);
  std::optional<Directedness> header;
  std::vector<Edge> edges;
  std::unordered_map<std::string, std::size_t> ids;
  std::vector<std::string> tokens_in_order;

  auto resolve = [&](std::string_view tok, std::size_t lineno) -> std::size_t {
    if (options.num_nodes) {
      const auto v = io::parse_integer(tok, lineno);
      if (v < 0 || static_cast<std::size_t>(v) >= *options.num_nodes) {
        throw ParseError("endpoint " + std::string(tok) + " out of range for n=" +
                             std::to_string(*options.num_nodes),
                         lineno);
      }
      return static_cast<std::size_t>(v);
    }
    auto [it, inserted] = ids.try_emplace(std::string(tok), ids.size());
    if (inserted) tokens_in_order.emplace_back(tok);
    return it->second;
  };

  std::string line;
  std::size_t lineno = 0;
  bool seen_edge = false;
  while (std::getline(in, line)) {
    ++lineno;
    auto body = io::trim(line);
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = io::trim(body.substr(0, hash));
    if (body.empty()) continue;
    if (!seen_edge && (body == "directed" || body == "undirected")) {
      header = body == "directed" ? Directedness::directed : Directedness::undirected;
      continue;
    }
    const auto fields = io::split(body);
    if (fields.size() < 2 || fields.size() > 3 || fields[0].empty() || fields[1].empty()) {
      throw ParseError("expected 'u,v' or 'u,v,w'", lineno);
    }
    if (fields.size() == 3) io::parse_real(fields[2], lineno);  // weight: validated, discarded
    const auto u = resolve(fields[0], lineno);
    const auto v = resolve(fields[1], lineno);
    edges.emplace_back(u, v);
    seen_edge = true;
  }

  const auto directedness = options.directedness.value_or(header.value_or(Directedness::undirected));
  std::size_t n = options.num_nodes.value_or(ids.size());
  if (n == 0) throw ParseError("empty edge list and no declared node count", lineno);

  if (!options.num_nodes) {
    const auto map_path = options.node_map_path.value_or(std::filesystem::path(path.string() + ".nodemap.csv"));
    if (!map_path.empty()) {
      auto out = io::open_output(map_path);
      out << "token,index\n";
      for (std::size_t i = 0; i < tokens_in_order.size(); ++i) out << tokens_in_order[i] << ',' << i << '\n';
    }
  }
  return Graph(n, std::move(edges), directedness);
}

void save_graph(const Graph& graph, const std::filesystem::path& path) {
  auto out = io::open_output(path);
  out << (graph.directed() ? "directed" : "undirected") << '\n';
  for (const auto& [u, v] : graph.edges()) {
    if (!graph.directed() && v < u) continue;
    out << u << ',' << v << '\n';
  }
}

FeatureField load_features(const std::filesystem::path& path) {
  return FeatureField(io::read_matrix_csv(path));
}

void save_features(const FeatureField& features, const std::filesystem::path& path) {
  io::write_matrix_csv(features.values(), path);
}

NodeLabels load_labels(const std::filesystem::path& path) {
  auto in = io::open_input(path);
  NodeLabels out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = io::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto v = io::parse_integer(body, lineno);
    if (v < 0) throw ParseError("negative class label", lineno);
    out.labels.push_back(static_cast<std::size_t>(v));
    out.num_classes = std::max(out.num_classes, static_cast<std::size_t>(v) + 1);
  }
  return out;
}

void save_labels(const NodeLabels& labels, const std::filesystem::path& path) {
  auto out = io::open_output(path);
  for (auto l : labels.labels) out << l << '\n';
}

// ---------------------------------------------------------------------------
// Synthetic graphs

HomophilyGraph generate_homophily_graph(std::size_t n, std::size_t k, double p_in, double p_out,
                                        std::uint64_t seed) {
  if (k == 0 || n < k) throw std::invalid_argument("need n >= k >= 1");
  if (!(p_in >= 0.0 && p_in <= 1.0) || !(p_out >= 0.0 && p_out <= 1.0)) {
    throw std::invalid_argument("edge probabilities must lie in [0, 1]");
  }
  NodeLabels labels{std::vector<std::size_t>(n), k};
  for (std::size_t u = 0; u < n; ++u) labels.labels[u] = u * k / n;

  StreamRng rng(seed);
  std::vector<Edge> edges;
  for (std::size_t u = 0; u < n; ++u) {
    edges.emplace_back(u, u);
    for (std::size_t v = u + 1; v < n; ++v) {
      const double p = labels.labels[u] == labels.labels[v] ? p_in : p_out;
      if (rng.uniform() < p) edges.emplace_back(u, v);
    }
  }
  return {Graph(n, std::move(edges), Directedness::undirected), std::move(labels)};
}

double expected_homophily(std::size_t n, std::size_t k, double p_in, double p_out) {
  const double per_class = static_cast<double>(n) / static_cast<double>(k);
  const double intra = p_in * (per_class - 1.0);
  const double inter = p_out * static_cast<double>(n) * static_cast<double>(k - 1) / static_cast<double>(k);
  return intra + inter == 0.0 ? 1.0 : intra / (intra + inter);
}

double homophily_ratio(const Graph& graph, const NodeLabels& labels) {
  if (labels.labels.size() != graph.num_nodes()) {
    throw std::invalid_argument("label vector length does not match node count");
  }
  std::size_t same = 0, total = 0;
  for (const auto& [u, v] : graph.edges()) {
    if (u == v) continue;
    ++total;
    if (labels.labels[u] == labels.labels[v]) ++same;
  }
  return total == 0 ? 1.0 : static_cast<double>(same) / static_cast<double>(total);
}

}  // namespace sglab
