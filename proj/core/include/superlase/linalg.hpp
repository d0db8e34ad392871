#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "superlase/errors.hpp"

namespace superlase {

/// Row-major dense matrix.
template <class T>
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  T& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  std::span<T> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const T> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::vector<T> multiply(std::span<const T> x) const {
    std::vector<T> y(rows_, T{});
    for (std::size_t i = 0; i < rows_; ++i) {
      T acc{};
      const T* r = data_.data() + i * cols_;
      for (std::size_t j = 0; j < cols_; ++j) acc += r[j] * x[j];
      y[i] = acc;
    }
    return y;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using RealMatrix = DenseMatrix<double>;
using ComplexMatrix = DenseMatrix<std::complex<double>>;

/// LU factorisation with partial (row) pivoting, PA = LU, stored in place.
template <class T>
class LuDecomposition {
 public:
  /// Throws SingularMatrixError when a pivot falls below n * eps * max|a_ij|.
  explicit LuDecomposition(DenseMatrix<T> a) : lu_(std::move(a)), perm_(lu_.rows()) {
    const std::size_t n = lu_.rows();
    if (lu_.cols() != n) throw PreconditionError("LU needs a square matrix");
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) scale = std::max(scale, std::abs(lu_(i, j)));
    const double threshold =
        static_cast<double>(std::max<std::size_t>(n, 1)) * std::numeric_limits<double>::epsilon() * scale;
    min_pivot_ = std::numeric_limits<double>::infinity();

    for (std::size_t i = 0; i < n; ++i) perm_[i] = i;
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t piv = k;
      double best = std::abs(lu_(k, k));
      for (std::size_t i = k + 1; i < n; ++i) {
        const double v = std::abs(lu_(i, k));
        if (v > best) {
          best = v;
          piv = i;
        }
      }
      min_pivot_ = std::min(min_pivot_, best);
      if (!(best > threshold)) {
        throw SingularMatrixError("matrix is numerically singular at column " + std::to_string(k) +
                                      " (pivot magnitude " + std::to_string(best) + ")",
                                  best);
      }
      if (piv != k) {
        std::swap_ranges(lu_.row(k).begin(), lu_.row(k).end(), lu_.row(piv).begin());
        std::swap(perm_[k], perm_[piv]);
      }
      const T inv = T{1} / lu_(k, k);
      const auto rk = lu_.row(k);
      for (std::size_t i = k + 1; i < n; ++i) {
        auto ri = lu_.row(i);
        const T f = ri[k] * inv;
        ri[k] = f;
        if (f == T{}) continue;
        for (std::size_t j = k + 1; j < n; ++j) ri[j] -= f * rk[j];
      }
    }
  }

  std::size_t size() const noexcept { return lu_.rows(); }
  double min_pivot() const noexcept { return min_pivot_; }

  std::vector<T> solve(std::span<const T> b) const {
    const std::size_t n = size();
    if (b.size() != n) throw PreconditionError("right-hand side does not match matrix size");
    std::vector<T> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[perm_[i]];
    for (std::size_t i = 0; i < n; ++i) {
      const auto ri = lu_.row(i);
      T acc = x[i];
      for (std::size_t j = 0; j < i; ++j) acc -= ri[j] * x[j];
      x[i] = acc;
    }
    for (std::size_t i = n; i-- > 0;) {
      const auto ri = lu_.row(i);
      T acc = x[i];
      for (std::size_t j = i + 1; j < n; ++j) acc -= ri[j] * x[j];
      x[i] = acc / ri[i];
    }
    return x;
  }

 private:
  DenseMatrix<T> lu_;
  std::vector<std::size_t> perm_;
  double min_pivot_ = 0.0;
};

struct LinearSolveResult {
  std::vector<std::complex<double>> x;
  double residual_norm = 0.0;  // ||Ax - b||_2
  double rhs_norm = 0.0;       // ||b||_2
  double min_pivot = 0.0;
};

/// Solves Ax = b by LU with partial pivoting and reports the residual.
LinearSolveResult solve_linear(const ComplexMatrix& a, std::span<const std::complex<double>> b);

}  // namespace superlase
