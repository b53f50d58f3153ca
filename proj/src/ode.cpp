#include "sglab/ode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace sglab {

namespace {

void check_times(std::span<const double> times) {
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i]) || times[i] < 0.0 || (i > 0 && times[i] < times[i - 1])) {
      throw std::invalid_argument("evaluation times must be finite, nonnegative and sorted");
    }
  }
}

}  // namespace

std::vector<Matrix> integrate_rk4(const Matrix& q, const Matrix& y0, std::span<const double> times,
                                  double step_norm_bound) {
  check_times(times);
  const double qnorm = q.cwiseAbs().rowwise().sum().maxCoeff();
  const double hmax = qnorm > 0.0 ? step_norm_bound / qnorm : std::numeric_limits<double>::infinity();

  std::vector<Matrix> out;
  out.reserve(times.size());
  Matrix y = y0;
  double t = 0.0;
  for (const double target : times) {
    const double span = target - t;
    if (span > 0.0) {
      const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(span / hmax)));
      const double h = span / static_cast<double>(steps);
      for (std::size_t s = 0; s < steps; ++s) {
        const Matrix k1 = q * y;
        const Matrix k2 = q * (y + 0.5 * h * k1);
        const Matrix k3 = q * (y + 0.5 * h * k2);
        const Matrix k4 = q * (y + h * k3);
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      }
      if (!y.allFinite()) throw NumericalError("RK4 state became non-finite");
      t = target;
    }
    out.push_back(y);
  }
  return out;
}

std::vector<Matrix> integrate_adaptive(const Matrix& q, const Matrix& y0, std::span<const double> times,
                                       const AdaptiveOptions& options, OdeStats* stats) {
  check_times(times);
  // Dormand–Prince tableau.
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                   a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                   e6 = 22.0 / 525, e7 = -1.0 / 40;

  OdeStats local;
  std::vector<Matrix> out;
  out.reserve(times.size());
  Matrix y = y0;
  Matrix k1 = q * y;
  double t = 0.0;
  const double qnorm = q.cwiseAbs().rowwise().sum().maxCoeff();
  double h = qnorm > 0.0 ? 0.1 / qnorm : 1.0;

  for (const double target : times) {
    while (t < target) {
      if (local.accepted + local.rejected >= options.max_steps) {
        throw NumericalError("adaptive integrator exceeded its step budget at t=" + std::to_string(t));
      }
      bool last = false;
      double step = h;
      if (t + step >= target) {
        step = target - t;
        last = true;
      }
      const Matrix k2 = q * (y + step * (a21 * k1));
      const Matrix k3 = q * (y + step * (a31 * k1 + a32 * k2));
      const Matrix k4 = q * (y + step * (a41 * k1 + a42 * k2 + a43 * k3));
      const Matrix k5 = q * (y + step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
      const Matrix k6 = q * (y + step * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
      Matrix y_new = y + step * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      const Matrix k7 = q * y_new;
      const Matrix err = step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

      const Matrix scale = (options.atol + options.rtol * y.cwiseAbs().cwiseMax(y_new.cwiseAbs()).array()).matrix();
      const double ratio = (err.array() / scale.array()).abs().maxCoeff();
      if (!std::isfinite(ratio)) throw NumericalError("adaptive integrator produced non-finite state");

      if (ratio <= 1.0) {
        ++local.accepted;
        t = last ? target : t + step;
        y = std::move(y_new);
        k1 = k7;
      } else {
        ++local.rejected;
      }
      const double factor = ratio == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(ratio, -0.2), 0.2, 5.0);
      if (!(last && ratio <= 1.0)) h = step * factor;
      if (h < options.min_step) {
        throw NumericalError("adaptive step size underflow (h=" + std::to_string(h) + ") at t=" + std::to_string(t));
      }
    }
    out.push_back(y);
  }
  if (stats) *stats = local;
  return out;
}

}  // namespace sglab
