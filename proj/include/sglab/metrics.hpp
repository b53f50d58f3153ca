#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "sglab/attention.hpp"
#include "sglab/graph.hpp"
#include "sglab/semigroup.hpp"

namespace sglab {

enum class EnergyNormalization { node_count, edge_count };

/// E(H, A) = (1/N) Σ_u Σ_v a(u,v) ‖h_u/√d_u − h_v/√d_v‖². N is the node
/// count, or the number of nonzero attention entries with edge_count.
double dirichlet_energy(const FeatureField& h, const StochasticMatrix& attention, const Vector& degrees,
                        EnergyNormalization normalization = EnergyNormalization::node_count);

struct EnergyTrace {
  std::vector<double> times;
  std::vector<double> energy;
  /// nullopt marks log(0).
  std::vector<std::optional<double>> log_energy;
  std::vector<double> spread;
};

EnergyTrace energy_trace(const SemigroupSolution& solution, const StochasticMatrix& attention, const Vector& degrees,
                         EnergyNormalization normalization = EnergyNormalization::node_count);

/// Predicted trace under constant killing rate κ ≥ 0: features scale by
/// e^{−κt}, so energy scales by e^{−2κt} and log-energy shifts by −2κt.
EnergyTrace constant_killing_energy_law(const EnergyTrace& base, double kappa);

/// Columns t,energy,log_energy,spread; log of zero is written as NA.
void write_energy_csv(const EnergyTrace& trace, const std::filesystem::path& path);

}  // namespace sglab
