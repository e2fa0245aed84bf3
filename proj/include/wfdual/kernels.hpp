// Hypergeometric duality kernels and the backward-difference machinery.
//
// Both kernel variants come with closed-form inverses; nothing here ever
// inverts numerically. The identity Phi * Phi^{-1} = I is a test, not a
// construction step.
#pragma once

#include "wfdual/combinatorics.hpp"
#include "wfdual/matrix.hpp"

#include <vector>

namespace wfdual::kernels {

enum class KernelVariant { Phi1, Phi2 };

/// Backward-difference triangle of a sampled vector v(0..n).
/// level(j)[t] = grad^j v(m) at m = j + t, with grad v(m) = v(m) - v(m-1).
template <class S>
class DifferenceTable {
 public:
  explicit DifferenceTable(std::vector<S> values) {
    const int n = static_cast<int>(values.size()) - 1;
    if (n < 0) throw ConfigError("difference table of empty vector");
    levels_.reserve(n + 1);
    levels_.push_back(std::move(values));
    for (int j = 1; j <= n; ++j) {
      const auto& prev = levels_.back();
      std::vector<S> next(prev.size() - 1);
      for (size_t t = 0; t + 1 < prev.size(); ++t) next[t] = prev[t + 1] - prev[t];
      levels_.push_back(std::move(next));
    }
  }

  int order() const { return static_cast<int>(levels_.size()) - 1; }
  const std::vector<S>& level(int j) const { return levels_.at(j); }

  /// grad^j v(m) evaluated at the endpoint m = n.
  const S& endpoint(int j) const { return levels_.at(j).back(); }

  std::vector<S> endpoints() const {
    std::vector<S> out;
    out.reserve(levels_.size());
    for (const auto& lv : levels_) out.push_back(lv.back());
    return out;
  }

  /// Largest magnitude anywhere in the triangle; the float-mode tolerance
  /// for monotonicity checks scales with this.
  S magnitude() const {
    S m(0);
    for (const auto& lv : levels_)
      for (const S& x : lv) m = std::max(m, abs_value(x));
    return m;
  }

 private:
  std::vector<std::vector<S>> levels_;
};

template <class S>
DifferenceTable<S> backward_difference_table(std::vector<S> values) {
  return DifferenceTable<S>(std::move(values));
}

/// Alternating-sum route to the same endpoint differences:
///   grad^j v(n) = sum_l (-1)^l C(j,l) v(n-l).
/// Kept as the independent cross-check of the triangle recurrence.
template <class S>
S backward_difference_alternating(const std::vector<S>& values, int j) {
  const int n = static_cast<int>(values.size()) - 1;
  if (j < 0 || j > n) throw ConfigError("difference order out of range");
  S sum(0);
  for (int l = 0; l <= j; ++l) {
    S term = scalar_traits<S>::from_bigint(binomial(j, l)) * values[n - l];
    if (l % 2 != 0)
      sum -= term;
    else
      sum += term;
  }
  return sum;
}

/// One duality kernel with its closed-form inverse.
///   Phi1(m,k) = C(m,k)/C(n,k)        [Phi1]^{-1}(i,j) = (-1)^{i-j} C(i,j) C(n,i)
///   Phi2(m,k) = C(n-m,k)/C(n,k)      [Phi2]^{-1}(i,j) = (-1)^{i+j-n} C(i,n-j) C(n,i)
template <class S>
struct DualityKernel {
  int n = 0;
  KernelVariant variant = KernelVariant::Phi2;
  Matrix<S> matrix;
  Matrix<S> inverse;
};

template <class S>
DualityKernel<S> build_kernel(int n, KernelVariant variant) {
  if (n < 1) throw ConfigError("build_kernel: population size must be >= 1");
  DualityKernel<S> k;
  k.n = n;
  k.variant = variant;
  k.matrix = Matrix<S>(n + 1, n + 1);
  k.inverse = Matrix<S>(n + 1, n + 1);
  for (int m = 0; m <= n; ++m) {
    for (int j = 0; j <= n; ++j) {
      const BigInt num = (variant == KernelVariant::Phi1) ? binomial(m, j) : binomial(n - m, j);
      if (num != 0)
        k.matrix(m, j) = from_rational<S>(Rational(num, binomial(n, j)));
      BigInt inv = (variant == KernelVariant::Phi1)
                       ? binomial(m, j) * binomial(n, m)
                       : binomial(m, n - j) * binomial(n, m);
      if (inv != 0) {
        const int sign = (variant == KernelVariant::Phi1) ? (m - j) : (m + j - n);
        if (sign % 2 != 0) inv = -inv;
        k.inverse(m, j) = scalar_traits<S>::from_bigint(inv);
      }
    }
  }
  return k;
}

}  // namespace wfdual::kernels
