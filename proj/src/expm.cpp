#include "sglab/expm.hpp"

#include <array>
#include <cmath>
#include <string>

namespace sglab {

namespace {

// Largest 1-norm for which the degree-m Padé approximant meets unit roundoff
// in double precision.
constexpr std::array<std::pair<int, double>, 5> kThetas{{
    {3, 1.495585217958292e-2},
    {5, 2.539398330063230e-1},
    {7, 9.504178996162932e-1},
    {9, 2.097847961257068e0},
    {13, 5.371920351148152e0},
}};

// Padé numerator coefficients b_0..b_m.
const double* pade_coefficients(int degree) {
  static constexpr double b3[] = {120., 60., 12., 1.};
  static constexpr double b5[] = {30240., 15120., 3360., 420., 30., 1.};
  static constexpr double b7[] = {17297280., 8648640., 1995840., 277200., 25200., 1512., 56., 1.};
  static constexpr double b9[] = {17643225600., 8821612800., 2075673600., 302702400., 30270240.,
                                  2162160.,     110880.,     3960.,       90.,         1.};
  static constexpr double b13[] = {64764752532480000., 32382376266240000., 7771770303897600.,
                                   1187353796428800.,  129060195264000.,   10559470521600.,
                                   670442572800.,      33522128640.,       1323241920.,
                                   40840800.,          960960.,            16380.,
                                   182.,               1.};
  switch (degree) {
    case 3: return b3;
    case 5: return b5;
    case 7: return b7;
    case 9: return b9;
    default: return b13;
  }
}

}  // namespace

ExpmPlan expm_plan(const Matrix& m) {
  const double norm = m.cwiseAbs().colwise().sum().maxCoeff();
  for (const auto& [degree, theta] : kThetas) {
    if (norm <= theta) return {degree, 0};
  }
  const double theta13 = kThetas.back().second;
  return {13, std::max(0, static_cast<int>(std::ceil(std::log2(norm / theta13))))};
}

Matrix expm(const Matrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("expm needs a square matrix");
  const auto n = m.rows();
  if (n == 0) return m;
  if (!m.allFinite()) throw NumericalError("expm argument has non-finite entries");

  const auto plan = expm_plan(m);
  if (plan.squarings > 1000) {
    throw NumericalError("expm argument norm too large (" + std::to_string(plan.squarings) +
                         " squarings); rescale time");
  }
  const Matrix a = std::ldexp(1.0, -plan.squarings) * m;
  const double* b = pade_coefficients(plan.degree);
  const Matrix ident = Matrix::Identity(n, n);
  const Matrix a2 = a * a;

  Matrix u, v;
  if (plan.degree == 13) {
    const Matrix a4 = a2 * a2;
    const Matrix a6 = a4 * a2;
    const Matrix inner_u = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2);
    u = a * (inner_u + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident);
    v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident;
  } else {
    // Even powers accumulated in step: U = A Σ b_{2k+1} A^{2k}, V = Σ b_{2k} A^{2k}.
    Matrix odd = b[1] * ident;
    v = b[0] * ident;
    Matrix power = ident;
    for (int k = 1; 2 * k <= plan.degree; ++k) {
      power = power * a2;
      v += b[2 * k] * power;
      odd += b[2 * k + 1] * power;
    }
    u = a * odd;
  }

  Matrix result = (v - u).partialPivLu().solve(v + u);
  for (int i = 0; i < plan.squarings; ++i) result = result * result;
  if (!result.allFinite()) throw NumericalError("matrix exponential overflowed; rescale time or the generator");
  return result;
}

}  // namespace sglab
