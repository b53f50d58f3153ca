#include "sglab/metrics.hpp"

#include <cmath>

#include "sglab/io.hpp"

namespace sglab {

double dirichlet_energy(const FeatureField& h, const StochasticMatrix& attention, const Vector& degrees,
                        EnergyNormalization normalization) {
  const auto n = attention.size();
  if (h.num_nodes() != n || static_cast<std::size_t>(degrees.size()) != n) {
    throw std::invalid_argument("dirichlet_energy: dimension mismatch");
  }
  if ((degrees.array() <= 0.0).any()) throw std::invalid_argument("dirichlet_energy: degrees must be positive");
  const RowMatrix normalized = degrees.cwiseSqrt().cwiseInverse().asDiagonal() * h.values();
  const Matrix& a = attention.matrix();
  double total = 0.0;
  std::size_t support = 0;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = 0; v < n; ++v) {
      if (a(u, v) == 0.0) continue;
      ++support;
      if (u != v) total += a(u, v) * (normalized.row(u) - normalized.row(v)).squaredNorm();
    }
  }
  const double denom = normalization == EnergyNormalization::node_count ? static_cast<double>(n)
                                                                         : static_cast<double>(support);
  return total / denom;
}

EnergyTrace energy_trace(const SemigroupSolution& solution, const StochasticMatrix& attention, const Vector& degrees,
                         EnergyNormalization normalization) {
  if (solution.states.empty()) throw std::invalid_argument("energy_trace: empty solution");
  EnergyTrace trace;
  trace.times = solution.times;
  for (const auto& h : solution.states) {
    const double e = dirichlet_energy(h, attention, degrees, normalization);
    trace.energy.push_back(e);
    trace.log_energy.push_back(e > 0.0 ? std::optional<double>(std::log(e)) : std::nullopt);
    trace.spread.push_back(feature_spread(h));
  }
  return trace;
}

EnergyTrace constant_killing_energy_law(const EnergyTrace& base, double kappa) {
  if (!std::isfinite(kappa) || kappa < 0.0) throw std::invalid_argument("killing magnitude must be finite and >= 0");
  EnergyTrace out = base;
  for (std::size_t k = 0; k < base.times.size(); ++k) {
    const double t = base.times[k];
    const double factor = std::exp(-kappa * t);
    out.energy[k] = base.energy[k] * factor * factor;
    if (base.log_energy[k]) out.log_energy[k] = *base.log_energy[k] - 2.0 * kappa * t;
    out.spread[k] = base.spread[k] * factor;
  }
  return out;
}

void write_energy_csv(const EnergyTrace& trace, const std::filesystem::path& path) {
  auto out = io::open_output(path);
  out << "t,energy,log_energy,spread\n";
  for (std::size_t k = 0; k < trace.times.size(); ++k) {
    out << io::format_real(trace.times[k]) << ',' << io::format_real(trace.energy[k]) << ','
        << (trace.log_energy[k] ? io::format_real(*trace.log_energy[k]) : std::string("NA")) << ','
        << io::format_real(trace.spread[k]) << '\n';
  }
}

}  // namespace sglab
