#pragma once

#include "sglab/types.hpp"

namespace sglab {

/// e^{m} by scaling and squaring around a diagonal Padé approximant of
/// degree 3, 5, 7, 9 or 13, chosen from the 1-norm of m. Throws
/// NumericalError when the result overflows.
Matrix expm(const Matrix& m);

/// Diagonal Padé degree and number of squarings expm would use for `m`.
struct ExpmPlan {
  int degree;
  int squarings;
};
ExpmPlan expm_plan(const Matrix& m);

}  // namespace sglab
