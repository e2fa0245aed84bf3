// Dense (n+1)x(n+1)-scale matrices over an arbitrary scalar, plus the two
// linear solvers the library relies on: fraction-free (Bareiss) elimination
// for exact rationals and partial-pivot elimination for float modes.
// Dense is deliberate: the theory lives at small n where (n+1)^2 is cheap.
#pragma once

#include "wfdual/common.hpp"

#include <algorithm>
#include <utility>
#include <vector>

namespace wfdual {

template <class S>
class Matrix {
 public:
  Matrix() : rows_(0), cols_(0) {}
  Matrix(int rows, int cols, const S& init = S(0))
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, init) {}

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = S(1);
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  S& operator()(int i, int j) { return data_[static_cast<size_t>(i) * cols_ + j]; }
  const S& operator()(int i, int j) const { return data_[static_cast<size_t>(i) * cols_ + j]; }

  Matrix operator*(const Matrix& other) const {
    if (cols_ != other.rows_) throw NumericalError("matrix product: dimension mismatch");
    Matrix out(rows_, other.cols_);
    for (int i = 0; i < rows_; ++i)
      for (int k = 0; k < cols_; ++k) {
        const S& a = (*this)(i, k);
        if (a == S(0)) continue;
        for (int j = 0; j < other.cols_; ++j) out(i, j) += a * other(k, j);
      }
    return out;
  }

  Matrix operator-(const Matrix& other) const {
    Matrix out(rows_, cols_);
    for (size_t t = 0; t < data_.size(); ++t) out.data_[t] = data_[t] - other.data_[t];
    return out;
  }

  Matrix transpose() const {
    Matrix out(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) out(j, i) = (*this)(i, j);
    return out;
  }

  /// M v
  std::vector<S> apply(const std::vector<S>& v) const {
    if (static_cast<int>(v.size()) != cols_) throw NumericalError("matrix apply: dimension mismatch");
    std::vector<S> out(rows_, S(0));
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) out[i] += (*this)(i, j) * v[j];
    return out;
  }

  /// v' M   (row vector times matrix)
  std::vector<S> apply_left(const std::vector<S>& v) const {
    if (static_cast<int>(v.size()) != rows_) throw NumericalError("matrix apply_left: dimension mismatch");
    std::vector<S> out(cols_, S(0));
    for (int i = 0; i < rows_; ++i) {
      const S& a = v[i];
      if (a == S(0)) continue;
      for (int j = 0; j < cols_; ++j) out[j] += a * (*this)(i, j);
    }
    return out;
  }

  Matrix power(unsigned r) const {
    if (rows_ != cols_) throw NumericalError("matrix power: not square");
    Matrix acc = identity(rows_);
    Matrix base = *this;
    while (r > 0) {
      if (r & 1u) acc = acc * base;
      base = base * base;
      r >>= 1u;
    }
    return acc;
  }

  S max_abs() const {
    S m(0);
    for (const S& x : data_) m = std::max(m, abs_value(x));
    return m;
  }

 private:
  int rows_, cols_;
  std::vector<S> data_;
};

template <class S>
S max_abs_diff(const Matrix<S>& a, const Matrix<S>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw NumericalError("max_abs_diff: dimension mismatch");
  S m(0);
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) m = std::max(m, abs_value<S>(a(i, j) - b(i, j)));
  return m;
}

namespace detail {

/// Bareiss fraction-free elimination on an integer augmented system.
/// Rows are pre-scaled by their denominator lcm so all entries are BigInt.
inline std::vector<Rational> solve_bareiss(std::vector<std::vector<BigInt>> aug, int n) {
  BigInt prev(1);
  for (int k = 0; k < n; ++k) {
    int pivot = -1;
    for (int r = k; r < n; ++r)
      if (aug[r][k] != 0) {
        pivot = r;
        break;
      }
    if (pivot < 0) throw NumericalError("exact solve: singular system");
    if (pivot != k) std::swap(aug[pivot], aug[k]);
    for (int r = k + 1; r < n; ++r) {
      for (int c = k + 1; c <= n; ++c) {
        aug[r][c] = (aug[k][k] * aug[r][c] - aug[r][k] * aug[k][c]) / prev;
      }
      aug[r][k] = 0;
    }
    prev = aug[k][k];
  }
  std::vector<Rational> x(n);
  for (int i = n - 1; i >= 0; --i) {
    Rational acc(aug[i][n]);
    for (int j = i + 1; j < n; ++j) acc -= Rational(aug[i][j]) * x[j];
    x[i] = acc / Rational(aug[i][i]);
  }
  return x;
}

}  // namespace detail

/// Solve A x = b exactly over the rationals (fraction-free elimination).
inline std::vector<Rational> solve_linear(const Matrix<Rational>& A, const std::vector<Rational>& b) {
  const int n = A.rows();
  if (A.cols() != n || static_cast<int>(b.size()) != n)
    throw NumericalError("solve_linear: dimension mismatch");
  std::vector<std::vector<BigInt>> aug(n, std::vector<BigInt>(n + 1));
  for (int i = 0; i < n; ++i) {
    BigInt lcm(1);
    for (int j = 0; j < n; ++j) lcm = boost::multiprecision::lcm(lcm, denominator(A(i, j)));
    lcm = boost::multiprecision::lcm(lcm, denominator(b[i]));
    for (int j = 0; j < n; ++j)
      aug[i][j] = numerator(A(i, j)) * (lcm / denominator(A(i, j)));
    aug[i][n] = numerator(b[i]) * (lcm / denominator(b[i]));
  }
  return detail::solve_bareiss(std::move(aug), n);
}

/// Solve A x = b by partial-pivot elimination at the scalar's precision.
/// Throws NumericalError with a crude conditioning hint when a pivot
/// degenerates.
template <class S>
std::vector<S> solve_linear(Matrix<S> A, std::vector<S> b) {
  static_assert(!scalar_traits<S>::is_exact, "rational overload handles the exact mode");
  const int n = A.rows();
  if (A.cols() != n || static_cast<int>(b.size()) != n)
    throw NumericalError("solve_linear: dimension mismatch");
  const S scale = std::max(A.max_abs(), S(1));
  const S tiny = scale * scalar_traits<S>::epsilon() * S(n) * S(8);
  for (int k = 0; k < n; ++k) {
    int pivot = k;
    S best = abs_value(A(k, k));
    for (int r = k + 1; r < n; ++r) {
      S cand = abs_value(A(r, k));
      if (cand > best) {
        best = cand;
        pivot = r;
      }
    }
    if (best <= tiny)
      throw NumericalError("float solve: pivot " + scalar_traits<S>::to_string(best) +
                           " at column " + std::to_string(k) +
                           " (scale " + scalar_traits<S>::to_string(scale) + "): system singular to working precision");
    if (pivot != k) {
      for (int c = k; c < n; ++c) std::swap(A(k, c), A(pivot, c));
      std::swap(b[k], b[pivot]);
    }
    for (int r = k + 1; r < n; ++r) {
      if (A(r, k) == S(0)) continue;
      S f = A(r, k) / A(k, k);
      A(r, k) = S(0);
      for (int c = k + 1; c < n; ++c) A(r, c) -= f * A(k, c);
      b[r] -= f * b[k];
    }
  }
  std::vector<S> x(n);
  for (int i = n - 1; i >= 0; --i) {
    S acc = b[i];
    for (int j = i + 1; j < n; ++j) acc -= A(i, j) * x[j];
    x[i] = acc / A(i, i);
  }
  return x;
}

/// det(M - lambda I), exact. Rational-mode eigenvalue verification for the
/// triangular duals (full eigenvectors stay a float-mode feature).
inline Rational char_poly_eval(const Matrix<Rational>& M, const Rational& lambda) {
  const int n = M.rows();
  std::vector<std::vector<BigInt>> a(n, std::vector<BigInt>(n));
  Rational denscale(1);
  std::vector<Rational> rowscale(n, Rational(1));
  // clear denominators row by row; det scales by the product
  for (int i = 0; i < n; ++i) {
    BigInt lcm(1);
    for (int j = 0; j < n; ++j) {
      Rational v = M(i, j) - (i == j ? lambda : Rational(0));
      lcm = boost::multiprecision::lcm(lcm, denominator(v));
    }
    for (int j = 0; j < n; ++j) {
      Rational v = M(i, j) - (i == j ? lambda : Rational(0));
      a[i][j] = numerator(v) * (lcm / denominator(v));
    }
    denscale *= Rational(lcm);
  }
  // Bareiss determinant
  BigInt prev(1);
  int sign = 1;
  for (int k = 0; k < n - 1; ++k) {
    int pivot = -1;
    for (int r = k; r < n; ++r)
      if (a[r][k] != 0) {
        pivot = r;
        break;
      }
    if (pivot < 0) return Rational(0);
    if (pivot != k) {
      std::swap(a[pivot], a[k]);
      sign = -sign;
    }
    for (int r = k + 1; r < n; ++r) {
      for (int c = k + 1; c < n; ++c) a[r][c] = (a[k][k] * a[r][c] - a[r][k] * a[k][c]) / prev;
      a[r][k] = 0;
    }
    prev = a[k][k];
  }
  Rational det(a[n - 1][n - 1] * sign);
  return det / denscale;
}

}  // namespace wfdual
