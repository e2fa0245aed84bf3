// Exact integer combinatorics: binomials, factorial products, Stirling and
// Bell numbers. Everything here is big-integer arithmetic; callers convert
// to the scalar of their mode.
#pragma once

#include "wfdual/common.hpp"

#include <mutex>
#include <vector>

namespace wfdual {

/// Hard cap on exact binomial tables. Construction beyond it fails loudly
/// instead of silently losing precision downstream.
inline constexpr int kMaxBinomialN = 512;

namespace detail {

class BinomialCache {
 public:
  const BigInt& at(int n, int k) {
    std::lock_guard<std::mutex> lock(mu_);
    if (n > kMaxBinomialN)
      throw ConfigError("binomial(" + std::to_string(n) + ", ...) exceeds the exact-arithmetic cap of n = " +
                        std::to_string(kMaxBinomialN));
    while (static_cast<int>(rows_.size()) <= n) {
      int m = static_cast<int>(rows_.size());
      std::vector<BigInt> row(m + 1);
      row[0] = 1;
      row[m] = 1;
      for (int j = 1; j < m; ++j) row[j] = rows_[m - 1][j - 1] + rows_[m - 1][j];
      rows_.push_back(std::move(row));
    }
    return rows_[n][k];
  }

 private:
  std::mutex mu_;
  std::vector<std::vector<BigInt>> rows_{{BigInt(1)}};
};

inline BinomialCache& binomial_cache() {
  static BinomialCache cache;
  return cache;
}

}  // namespace detail

/// C(n,k); zero outside the triangle, exact big integer inside.
inline BigInt binomial(int n, int k) {
  if (k < 0 || n < 0 || k > n) return BigInt(0);
  return detail::binomial_cache().at(n, k);
}

/// Falling factorial (n)_k = n(n-1)...(n-k+1).
inline BigInt falling_factorial(int n, int k) {
  BigInt r(1);
  for (int i = 0; i < k; ++i) r *= (n - i);
  return r;
}

/// Rising factorial [x]_k = x(x+1)...(x+k-1) over rationals.
inline Rational rising_factorial(const Rational& x, int k) {
  Rational r(1);
  for (int i = 0; i < k; ++i) r *= (x + i);
  return r;
}

inline BigInt factorial(int n) { return falling_factorial(n, n); }

/// Second-kind Stirling number S_{i,j} via the triangle recurrence
/// S_{i+1,j} = j S_{i,j} + S_{i,j-1}.
inline BigInt stirling_second(int i, int j) {
  if (i < 0 || j < 0) throw ConfigError("stirling_second: negative index");
  if (j > i) return BigInt(0);
  if (i == 0) return BigInt(j == 0 ? 1 : 0);
  std::vector<BigInt> row(i + 1, BigInt(0));
  row[0] = 1;  // S_{0,0}
  for (int m = 1; m <= i; ++m) {
    for (int l = std::min(m, i); l >= 1; --l) row[l] = l * row[l] + row[l - 1];
    row[0] = 0;  // S_{m,0} = 0 once m >= 1
  }
  return row[j];
}

/// Bell number B_m = sum_l S_{m,l}.
inline BigInt bell_number(int m) {
  BigInt b(0);
  for (int l = 0; l <= m; ++l) b += stirling_second(m, l);
  return b;
}

/// Generalized Stirling value S^{mu2}_{i,j}(kappa/n) of the mutation dual,
/// defined through
///   (n)_j n^{-i} S^{mu2}_{i,j}(kappa/n)
///       = C(n,j) sum_l (-1)^{j-l} C(j,l) (mu2 + kappa l/n)^i,
/// i.e. S = (1/j!) sum_l (-1)^{j-l} C(j,l) (n mu2 + kappa l)^i.
/// With mu2 = 0, kappa = 1 this is the classical S_{i,j}.
template <class S>
S stirling_generalized(int i, int j, const Rational& mu2, const Rational& kappa, int n) {
  if (i < 0 || j < 0 || n < 1) throw ConfigError("stirling_generalized: bad index");
  const S nmu2 = from_rational<S>(Rational(n) * mu2);
  const S kap = from_rational<S>(kappa);
  S sum(0);
  for (int l = 0; l <= j; ++l) {
    S base = nmu2 + kap * l;
    S term = scalar_traits<S>::from_bigint(binomial(j, l));
    S p(1);
    for (int e = 0; e < i; ++e) p *= base;
    term *= p;
    if ((j - l) % 2 != 0)
      sum -= term;
    else
      sum += term;
  }
  return sum / scalar_traits<S>::from_bigint(factorial(j));
}

/// Table of classical and generalized Stirling values for one (mu2, kappa, n).
/// Powers (n mu2 + kappa l)^i are built incrementally so the whole table
/// costs O(n_max^3) scalar operations.
template <class S>
class StirlingTable {
 public:
  StirlingTable(int n_max, const Rational& mu2, const Rational& kappa, int n)
      : n_max_(n_max), mu2_(mu2), kappa_(kappa), n_(n) {
    classical_.resize(n_max + 1);
    generalized_.resize(n_max + 1);
    {
      // classical triangle by the recurrence
      std::vector<BigInt> row{BigInt(1)};
      classical_[0] = row;
      for (int i = 1; i <= n_max; ++i) {
        row.push_back(BigInt(0));
        for (int l = i; l >= 1; --l) row[l] = l * row[l] + row[l - 1];
        row[0] = 0;
        classical_[i] = row;
      }
    }
    std::vector<S> base(n_max + 1), pw(n_max + 1, S(1));
    for (int l = 0; l <= n_max; ++l) base[l] = from_rational<S>(Rational(n) * mu2 + kappa * l);
    std::vector<S> inv_factorial(n_max + 1);
    for (int j = 0; j <= n_max; ++j)
      inv_factorial[j] = S(1) / scalar_traits<S>::from_bigint(factorial(j));
    for (int i = 0; i <= n_max; ++i) {
      if (i > 0)
        for (int l = 0; l <= n_max; ++l) pw[l] *= base[l];
      generalized_[i].resize(i + 1);
      for (int j = 0; j <= i; ++j) {
        S sum(0);
        for (int l = 0; l <= j; ++l) {
          S term = scalar_traits<S>::from_bigint(binomial(j, l)) * pw[l];
          if ((j - l) % 2 != 0)
            sum -= term;
          else
            sum += term;
        }
        generalized_[i][j] = sum * inv_factorial[j];
      }
    }
  }

  int n_max() const { return n_max_; }
  const BigInt& classical(int i, int j) const { return classical_.at(i).at(j); }
  const S& generalized(int i, int j) const { return generalized_.at(i).at(j); }

 private:
  int n_max_;
  Rational mu2_, kappa_;
  int n_;
  std::vector<std::vector<BigInt>> classical_;
  std::vector<std::vector<S>> generalized_;
};

}  // namespace wfdual
