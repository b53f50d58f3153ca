#pragma once

#include <span>
#include <vector>

#include "sglab/types.hpp"

namespace sglab {

struct AdaptiveOptions {
  double rtol = 1e-9;
  double atol = 1e-12;
  double min_step = 1e-14;
  std::size_t max_steps = 10'000'000;
};

struct OdeStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
};

/// Classical RK4 for dY/dt = Q·Y reporting Y at each of `times` (sorted,
/// nonnegative). The step h satisfies h·‖Q‖∞ ≤ `step_norm_bound`.
std::vector<Matrix> integrate_rk4(const Matrix& q, const Matrix& y0, std::span<const double> times,
                                  double step_norm_bound = 0.1);

/// Dormand–Prince 5(4) with error-per-step control. Throws NumericalError
/// when the step size underflows `min_step` or the budget is exhausted.
std::vector<Matrix> integrate_adaptive(const Matrix& q, const Matrix& y0, std::span<const double> times,
                                       const AdaptiveOptions& options = {}, OdeStats* stats = nullptr);

}  // namespace sglab
