#include "superlase/linalg.hpp"

namespace superlase {

LinearSolveResult solve_linear(const ComplexMatrix& a, std::span<const std::complex<double>> b) {
  if (a.rows() != a.cols()) throw PreconditionError("solve_linear: matrix is not square");
  if (b.size() != a.rows()) throw PreconditionError("solve_linear: right-hand side does not conform");
  const LuDecomposition<std::complex<double>> lu(a);
  LinearSolveResult out;
  out.x = lu.solve(b);
  out.min_pivot = lu.min_pivot();
  const auto ax = a.multiply(out.x);
  double r2 = 0.0, b2 = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    r2 += std::norm(ax[i] - b[i]);
    b2 += std::norm(b[i]);
  }
  out.residual_norm = std::sqrt(r2);
  out.rhs_norm = std::sqrt(b2);
  return out;
}

}  // namespace superlase
