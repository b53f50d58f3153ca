#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "sglab/graph.hpp"
#include "sglab/types.hpp"

namespace sglab {

/// Logit function Φ(x, y) of two node feature vectors.
struct AttentionKernel {
  std::string name;
  std::function<double(std::span<const double>, std::span<const double>)> logit;
};

/// Built-in kernels by config string: `zero`, `dot`, `scaled_dot:<tau>`
/// (x·y / tau), `neg_sqdist` (−‖x−y‖²). Throws std::invalid_argument otherwise.
AttentionKernel make_kernel(std::string_view spec);

/// Row-stochastic n×n matrix. Construction validates nonnegativity and unit
/// row sums (tolerance 1e-12).
class StochasticMatrix {
 public:
  explicit StochasticMatrix(Matrix entries, double tolerance = 1e-12);

  std::size_t size() const noexcept { return static_cast<std::size_t>(entries_.rows()); }
  const Matrix& matrix() const noexcept { return entries_; }
  double operator()(std::size_t u, std::size_t v) const { return entries_(u, v); }

 private:
  Matrix entries_;
};

/// Dynamics generator. `base` is the Q-matrix A − I; `q` is the composite
/// operator actually evolved, with any breaking matrix and killing diagonal
/// added on top.
struct Generator {
  Matrix q;
  Matrix base;
  std::optional<Matrix> breaking;
  std::optional<Vector> killing;

  std::size_t size() const noexcept { return static_cast<std::size_t>(q.rows()); }
  bool has_breaking() const noexcept { return breaking.has_value(); }
  bool has_killing() const noexcept { return killing.has_value(); }
  /// No extra terms: e^{tq} is a Markov semigroup.
  bool is_markov() const noexcept { return !breaking && !killing; }
  /// The attention matrix A = base + I.
  Matrix attention() const { return base + Matrix::Identity(base.rows(), base.cols()); }
};

enum class BreakingKind { exp, expn, log, diagonal };

BreakingKind parse_breaking_kind(std::string_view name);
std::string_view to_string(BreakingKind kind);

struct BreakingSpec {
  BreakingKind kind = BreakingKind::exp;
  int order = 1;
  double scale = 1.0;
  /// Adds the n = 0 identity term to the exp/expn series.
  bool include_identity = false;
  Vector diagonal_values;
};

/// Softmax of Φ over each node's out-neighbors (max-shifted). Throws
/// std::invalid_argument naming the node when a node has no neighbors.
StochasticMatrix build_attention(const Graph& graph, const FeatureField& features,
                                 const AttentionKernel& kernel);

Generator generator_from_attention(const StochasticMatrix& attention);

/// Truncated series C = scale·Σ c_k A^k (or scale·diag(values)). When
/// scale ≠ 0, throws NumericalError if C·1 vanishes, since such a term cannot
/// push constants out of the kernel.
Matrix breaking_term(const BreakingSpec& spec, const StochasticMatrix& attention);

/// Ã = Q + C. Row sums are not enforced.
Generator modified_generator(const Generator& q, const Matrix& breaking);

/// Q + diag(c), c ≤ 0 entrywise.
Generator killed_generator(const Generator& q, const Vector& c);

}  // namespace sglab
