#pragma once

#include <complex>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sglab/attention.hpp"
#include "sglab/graph.hpp"
#include "sglab/types.hpp"

namespace sglab {

enum class SolveMethod { expm, rk4, adaptive };

SolveMethod parse_solve_method(std::string_view name);
std::string_view to_string(SolveMethod method);

struct Provenance {
  bool breaking = false;
  bool killing = false;
};

/// H(t) = e^{tQ} f sampled at the requested times.
struct SemigroupSolution {
  std::vector<double> times;
  std::vector<FeatureField> states;
  SolveMethod method = SolveMethod::expm;
  Provenance provenance;
};

/// P(t) = e^{tQ}. Throws NumericalError on overflow.
Matrix matrix_exponential(const Generator& q, double t);

SemigroupSolution solve_cauchy(const Generator& q, const FeatureField& f, std::span<const double> times,
                               SolveMethod method = SolveMethod::expm);

/// Writes the long-form table `t,node,dim,value`.
void write_solution_csv(const SemigroupSolution& solution, const std::filesystem::path& path);

struct InvariantMeasureOptions {
  double tolerance = 1e-12;
  std::size_t max_iterations = 100'000;
};

/// Stationary law μ of A (Aᵀμ = μ, μ ≥ 0, Σμ = 1) by lazy power iteration on
/// Aᵀ. Throws std::invalid_argument when the support of A is not strongly
/// connected, and NumericalError when iteration does not converge.
Vector invariant_measure(const StochasticMatrix& attention, const InvariantMeasureOptions& options = {});

/// Same measure from a dense eigensolve of Aᵀ (eigenvalue nearest 1).
Vector invariant_measure_dense(const StochasticMatrix& attention);

struct SpectralOptions {
  double kernel_tolerance = 1e-9;
  double constancy_tolerance = 1e-6;
  double balance_tolerance = 1e-10;
};

struct SpectralReport {
  /// Sorted by real part, descending.
  std::vector<std::complex<double>> eigenvalues;
  std::complex<double> lambda0;
  double spectral_gap = 0.0;
  /// Dimension of the null space of Q (geometric multiplicity of 0).
  std::size_t kernel_dim = 0;
  /// Present for unmodified, irreducible generators only.
  std::optional<Vector> invariant_measure;
  bool is_ergodic = false;
  bool symmetrizable = false;
  /// Max deviation between the general spectrum and the spectrum of the
  /// symmetrized operator √μ(u) a(u,v) / √μ(v); present when symmetrizable.
  std::optional<double> symmetric_crosscheck_error;
  /// The support graph is bipartite and loop-free: the discrete chain is
  /// periodic even though e^{tQ} still converges.
  bool bipartite_warning = false;
};

SpectralReport spectral_report(const Generator& q, const SpectralOptions& options = {});

nlohmann::json to_json(const SpectralReport& report);

/// b = Σ_v μ(v) f(v), one entry per feature dimension.
Vector oversmoothing_fixed_point(const FeatureField& f, const Vector& mu);

/// Positive decay rate from a least-squares fit of log‖H(t) − 1bᵀ‖₂ against
/// t, over times whose deviation exceeds `floor`. Throws std::invalid_argument
/// with fewer than 5 times, and NumericalError ("already converged") when
/// fewer than two deviations clear the floor.
double convergence_rate_fit(const SemigroupSolution& solution, const Vector& fixed_point, double floor = 1e-12);

/// max_u ‖h(u) − h(v)‖₂ over all node pairs.
double feature_spread(const FeatureField& h);

}  // namespace sglab
