// Exchangeable (neutral) reproduction machinery: Cannings reproduction
// laws, merger probabilities, and the backward ancestral count matrix with
// its inclusion-exclusion cross-check.
#pragma once

#include "wfdual/combinatorics.hpp"
#include "wfdual/matrix.hpp"
#include "wfdual/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace wfdual::exchangeable {

/// Feasibility cap for composition enumeration in the ancestral matrix.
inline constexpr int kMaxSampleSize = 20;

class ReproductionLaw {
 public:
  enum class Kind { DirichletMultinomial, WrightFisher, Moran };

  static ReproductionLaw dirichlet_multinomial(const Rational& theta) {
    if (!(theta > 0)) throw ConfigError("dirichlet law needs theta > 0");
    return ReproductionLaw(Kind::DirichletMultinomial, theta);
  }
  static ReproductionLaw wright_fisher() { return ReproductionLaw(Kind::WrightFisher, Rational(0)); }
  static ReproductionLaw moran() { return ReproductionLaw(Kind::Moran, Rational(0)); }

  Kind kind() const { return kind_; }
  const Rational& theta() const { return theta_; }

  std::string describe() const {
    switch (kind_) {
      case Kind::DirichletMultinomial: return "dirichlet(theta=" + format_rational(theta_) + ")";
      case Kind::WrightFisher: return "wright-fisher";
      case Kind::Moran: return "moran";
    }
    return "?";
  }

 private:
  ReproductionLaw(Kind kind, Rational theta) : kind_(kind), theta_(std::move(theta)) {}
  Kind kind_;
  Rational theta_;
};

/// Cluster sizes of one backward step: b sampled lineages find a parents.
struct MergerPattern {
  int b = 0;
  int a = 0;
  std::vector<int> clusters;  // positive sizes, sum b; order irrelevant

  static MergerPattern of(std::vector<int> cluster_sizes) {
    MergerPattern p;
    p.a = static_cast<int>(cluster_sizes.size());
    for (int c : cluster_sizes) {
      if (c < 1) throw ConfigError("merger pattern clusters must be >= 1");
      p.b += c;
    }
    p.clusters = std::move(cluster_sizes);
    return p;
  }
};

namespace detail {

inline BigInt falling_of_int(int v, int k) {
  BigInt r(1);
  for (int i = 0; i < k; ++i) r *= (v - i);
  return r;
}

/// E prod_{l<=a} (nu_l)_{b_l} for the Moran law: exact enumeration over the
/// placements of the '2' and '0' offspring coordinates, O(n^2).
inline Rational moran_product_moment(int n, const std::vector<int>& clusters) {
  const int a = static_cast<int>(clusters.size());
  BigInt total(0);
  for (int pos2 = 1; pos2 <= n; ++pos2) {
    for (int pos0 = 1; pos0 <= n; ++pos0) {
      if (pos0 == pos2) continue;
      BigInt prod(1);
      for (int l = 1; l <= a && prod != 0; ++l) {
        const int nu = (l == pos2) ? 2 : (l == pos0 ? 0 : 1);
        prod *= falling_of_int(nu, clusters[l - 1]);
      }
      total += prod;
    }
  }
  return Rational(total, BigInt(n) * (n - 1));
}

}  // namespace detail

/// Probability that b sampled lineages merge into a parents with the given
/// cluster sizes: (n)_a/(n)_b * E prod (nu_l)_{b_l}, with the law's closed
/// form where one exists.
template <class S>
S merger_probability(const ReproductionLaw& law, int n, const MergerPattern& pattern) {
  if (pattern.a < 1 || pattern.a > pattern.b || pattern.b > n)
    throw ConfigError("merger pattern invalid for population size " + std::to_string(n));
  switch (law.kind()) {
    case ReproductionLaw::Kind::WrightFisher: {
      BigInt npow(1);
      for (int i = 0; i < pattern.b; ++i) npow *= n;
      return from_rational<S>(Rational(falling_factorial(n, pattern.a), npow));
    }
    case ReproductionLaw::Kind::DirichletMultinomial: {
      Rational r(falling_factorial(n, pattern.a));
      r /= rising_factorial(Rational(n) * law.theta(), pattern.b);
      for (int c : pattern.clusters) r *= rising_factorial(law.theta(), c);
      return from_rational<S>(r);
    }
    case ReproductionLaw::Kind::Moran: {
      Rational r(falling_factorial(n, pattern.a), falling_factorial(n, pattern.b));
      r *= detail::moran_product_moment(n, pattern.clusters);
      return from_rational<S>(r);
    }
  }
  throw ConfigError("unreachable law kind");
}

namespace detail {

template <class S>
void compositions_sum(const ReproductionLaw& law, int n, int b, int a, std::vector<int>& stack,
                      int remaining, S& acc) {
  const int depth = static_cast<int>(stack.size());
  if (depth == a) {
    if (remaining != 0) return;
    MergerPattern pattern = MergerPattern::of(stack);
    S term = merger_probability<S>(law, n, pattern);
    BigInt denom(1);
    for (int c : stack) denom *= factorial(c);
    acc += term / scalar_traits<S>::from_bigint(denom);
    return;
  }
  const int slots_left = a - depth;
  for (int c = 1; c + (slots_left - 1) <= remaining; ++c) {
    stack.push_back(c);
    compositions_sum(law, n, b, a, stack, remaining - c, acc);
    stack.pop_back();
  }
}

}  // namespace detail

/// One entry of the ancestral count transition matrix via the composition
/// sum P_{b,a} = b!/a! sum_{b_1+..+b_a=b} P_{b;a}(b_a) / (b_1! ... b_a!).
template <class S>
S ancestral_count_entry(const ReproductionLaw& law, int n, int b, int a) {
  if (b == 0) return S(a == 0 ? 1 : 0);
  if (a == 0 || a > b) return S(0);
  if (b > kMaxSampleSize)
    throw ConfigError("ancestral count entry: composition enumeration capped at b <= " +
                      std::to_string(kMaxSampleSize));
  S acc(0);
  std::vector<int> stack;
  detail::compositions_sum<S>(law, n, b, a, stack, b, acc);
  const Rational scale(factorial(b), factorial(a));
  return acc * from_rational<S>(scale);
}

/// Stochastic matrix of the ancestral count process on {0,...,m_max}.
template <class S>
Matrix<S> ancestral_count_matrix(const ReproductionLaw& law, int n, int m_max) {
  if (m_max > n) throw ConfigError("ancestral count matrix needs m_max <= n");
  Matrix<S> P(m_max + 1, m_max + 1);
  for (int b = 0; b <= m_max; ++b)
    for (int a = 0; a <= b; ++a) P(b, a) = ancestral_count_entry<S>(law, n, b, a);
  return P;
}

// ── one-generation forward laws (Eq. (1) for each reproduction law) ─────────

/// Dirichlet-binomial forward entry C(n,k') [k theta]_{k'} [(n-k) theta]_{n-k'} / [n theta]_n.
template <class S>
S dirichlet_forward_entry(int n, const Rational& theta, int k, int kp) {
  if (!(theta > 0)) throw ConfigError("dirichlet forward entry needs theta > 0");
  if (k < 0 || k > n || kp < 0 || kp > n) throw ConfigError("dirichlet forward entry out of range");
  Rational r(binomial(n, kp));
  r *= rising_factorial(Rational(k) * theta, kp);
  r *= rising_factorial(Rational(n - k) * theta, n - kp);
  r /= rising_factorial(Rational(n) * theta, n);
  return from_rational<S>(r);
}

/// P(nu_1 + ... + nu_k = k') for any of the three laws.
template <class S>
S law_forward_entry(const ReproductionLaw& law, int n, int k, int kp) {
  if (k < 0 || k > n || kp < 0 || kp > n) throw ConfigError("law forward entry out of range");
  switch (law.kind()) {
    case ReproductionLaw::Kind::DirichletMultinomial:
      return dirichlet_forward_entry<S>(n, law.theta(), k, kp);
    case ReproductionLaw::Kind::WrightFisher: {
      Rational p(k, n), q(n - k, n);
      Rational r(binomial(n, kp));
      for (int i = 0; i < kp; ++i) r *= p;
      for (int i = 0; i < n - kp; ++i) r *= q;
      return from_rational<S>(r);
    }
    case ReproductionLaw::Kind::Moran: {
      // N' = k + 1{pos2 <= k < pos0-side} - 1{pos0 <= k, pos2 > k}
      const Rational off(BigInt(k) * (n - k), BigInt(n) * (n - 1));
      if (kp == k + 1 || kp == k - 1) return from_rational<S>(off);
      if (kp == k) return from_rational<S>(Rational(1) - 2 * off);
      return S(0);
    }
  }
  throw ConfigError("unreachable law kind");
}

template <class S>
Matrix<S> law_forward_matrix(const ReproductionLaw& law, int n) {
  Matrix<S> M(n + 1, n + 1);
  for (int k = 0; k <= n; ++k)
    for (int kp = 0; kp <= n; ++kp) M(k, kp) = law_forward_entry<S>(law, n, k, kp);
  return M;
}

// ── inclusion–exclusion cross-check ─────────────────────────────────────────

namespace detail {

/// E C(S_m, b) where S_m = nu_1 + ... + nu_m under the law.
template <class S>
S expected_binomial_of_partial_sum(const ReproductionLaw& law, int n, int m, int b) {
  if (m == 0) return S(b == 0 ? 1 : 0);
  switch (law.kind()) {
    case ReproductionLaw::Kind::WrightFisher: {
      // S_m ~ Bin(n, m/n)
      S acc(0);
      Rational p(m, n), q(n - m, n);
      for (int x = b; x <= n; ++x) {
        Rational mass(binomial(n, x));
        for (int i = 0; i < x; ++i) mass *= p;
        for (int i = 0; i < n - x; ++i) mass *= q;
        acc += scalar_traits<S>::from_bigint(binomial(x, b)) * from_rational<S>(mass);
      }
      return acc;
    }
    case ReproductionLaw::Kind::DirichletMultinomial: {
      // S_m ~ Dirichlet-binomial with parameters (m theta, (n-m) theta)
      S acc(0);
      for (int x = b; x <= n; ++x)
        acc += scalar_traits<S>::from_bigint(binomial(x, b)) *
               dirichlet_forward_entry<S>(n, law.theta(), m, x);
      return acc;
    }
    case ReproductionLaw::Kind::Moran: {
      // three-point law on {m-1, m, m+1}
      const Rational off(BigInt(m) * (n - m), BigInt(n) * (n - 1));
      Rational acc = off * Rational(binomial(m + 1, b) + binomial(m - 1, b));
      acc += (Rational(1) - 2 * off) * Rational(binomial(m, b));
      return from_rational<S>(acc);
    }
  }
  throw ConfigError("unreachable law kind");
}

}  // namespace detail

/// The alternating form
///   P_{b,a} = C(n,a)/C(n,b) sum_m (-1)^{a-m} C(a,m) E C(nu_1+..+nu_m, b),
/// equal to ancestral_count_entry by inclusion–exclusion.
template <class S>
S ancestral_count_inclusion_exclusion(const ReproductionLaw& law, int n, int b, int a) {
  if (a == 0) return S(b == 0 ? 1 : 0);
  S acc(0);
  for (int m = 0; m <= a; ++m) {
    S term = scalar_traits<S>::from_bigint(binomial(a, m)) *
             detail::expected_binomial_of_partial_sum<S>(law, n, m, b);
    if ((a - m) % 2 != 0)
      acc -= term;
    else
      acc += term;
  }
  return acc * from_rational<S>(Rational(binomial(n, a), binomial(n, b)));
}

// ── samplers ────────────────────────────────────────────────────────────────

namespace detail {

/// Inversion draw from an explicit pmf over {0..size}; pmf need not be
/// perfectly normalized (the tail absorbs rounding).
inline int inversion_draw(const std::vector<double>& pmf, double u) {
  double cum = 0;
  for (size_t k = 0; k + 1 < pmf.size(); ++k) {
    cum += pmf[k];
    if (u < cum) return static_cast<int>(k);
  }
  return static_cast<int>(pmf.size()) - 1;
}

}  // namespace detail

/// One offspring vector nu with sum exactly n.
inline std::vector<int> sample_reproduction(const ReproductionLaw& law, int n, mc::PhiloxRng& rng) {
  std::vector<int> nu(n, 0);
  switch (law.kind()) {
    case ReproductionLaw::Kind::Moran: {
      const int pos2 = static_cast<int>(rng.next_below(n));
      int pos0 = static_cast<int>(rng.next_below(n - 1));
      if (pos0 >= pos2) ++pos0;
      std::fill(nu.begin(), nu.end(), 1);
      nu[pos2] = 2;
      nu[pos0] = 0;
      return nu;
    }
    case ReproductionLaw::Kind::WrightFisher: {
      int remaining = n;
      for (int m = 0; m < n - 1 && remaining > 0; ++m) {
        const double p = 1.0 / static_cast<double>(n - m);
        std::vector<double> pmf(remaining + 1);
        double lp = remaining * std::log1p(-p);
        pmf[0] = std::exp(lp);
        for (int k = 1; k <= remaining; ++k)
          pmf[k] = pmf[k - 1] * (remaining - k + 1) / static_cast<double>(k) * p / (1 - p);
        nu[m] = detail::inversion_draw(pmf, rng.next_double());
        remaining -= nu[m];
      }
      nu[n - 1] = remaining;
      return nu;
    }
    case ReproductionLaw::Kind::DirichletMultinomial: {
      const double theta = scalar_traits<Rational>::to_double(law.theta());
      int remaining = n;
      for (int m = 0; m < n - 1 && remaining > 0; ++m) {
        const int comps_left = n - m;  // this component plus the rest
        // beta-binomial pmf: P(k) = C(t,k) [th]_k [(r-1)th]_{t-k} / [r th]_t
        const int t = remaining;
        const double rest = (comps_left - 1) * theta;
        std::vector<double> pmf(t + 1);
        double v = 1.0;
        for (int i = 0; i < t; ++i) v *= (rest + i) / (comps_left * theta + i);
        pmf[0] = v;
        for (int k = 1; k <= t; ++k)
          pmf[k] = pmf[k - 1] * (t - k + 1) / static_cast<double>(k) * (theta + k - 1) /
                   (rest + t - k);
        nu[m] = detail::inversion_draw(pmf, rng.next_double());
        remaining -= nu[m];
      }
      nu[n - 1] = remaining;
      return nu;
    }
  }
  throw ConfigError("unreachable law kind");
}

}  // namespace wfdual::exchangeable
