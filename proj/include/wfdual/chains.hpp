// Forward biased Wright-Fisher transition matrices and their dual backward
// matrices.
//
// Forward:   Pi(k,k') = C(n,k') p(k/n)^{k'} (1-p(k/n))^{n-k'}
// Backward:  P(i,j)   = C(n,j) sum_l (-1)^{j-l} C(j,l) q(1-l/n)^i
//                     = C(n,j) (-1)^j grad^j (q(m/n)^i) | m=n
//
// The backward build runs through the difference triangle of the sampled
// powers q(m/n)^i, which halves the cancellation depth of the raw
// alternating sum; the raw sum is kept alongside as a cross-check path.
// A negative backward entry is exactly the failure of the resolution-n
// complete-monotonicity test, reported as CmViolation with the entry.
#pragma once

#include "wfdual/bias.hpp"

#include <string>
#include <vector>

namespace wfdual::chains {

enum class Direction { Forward, Backward };
enum class Stochasticity { Stochastic, SubStochastic };

template <class S>
struct TransitionMatrix {
  int n = 0;
  Direction direction = Direction::Forward;
  Matrix<S> entries;
  Stochasticity stochasticity = Stochasticity::Stochastic;
  /// Row killing mass 1 - q(0)^i for sub-stochastic backward chains;
  /// empty when stochastic. Simulation routes this mass to the coffin.
  std::vector<S> deficit;
  std::string provenance;
  long clamped_entries = 0;
};

namespace detail {

template <class S>
S grid_x(int m, int n) {
  if constexpr (scalar_traits<S>::is_exact)
    return from_rational<S>(Rational(m, n));
  else
    return S(m) / S(n);
}

template <class S>
std::vector<S> bias_probabilities(const bias::BiasMechanism& mech, int n) {
  std::vector<S> p(n + 1);
  for (int k = 0; k <= n; ++k) {
    p[k] = mech.evaluate(grid_x<S>(k, n));
    if constexpr (scalar_traits<S>::is_exact) {
      if (p[k] < 0 || p[k] > 1)
        throw NumericalError("bias evaluation left [0,1] at k=" + std::to_string(k) + " for " +
                             mech.describe());
    } else {
      const S slack = scalar_traits<S>::epsilon() * S(16);
      if (p[k] < -slack || p[k] > S(1) + slack)
        throw NumericalError("bias evaluation left [0,1] at k=" + std::to_string(k) + " for " +
                             mech.describe());
      if (p[k] < S(0)) p[k] = S(0);
      if (p[k] > S(1)) p[k] = S(1);
    }
  }
  return p;
}

}  // namespace detail

/// Binomial resampling matrix of the biased chain; rows sum to one exactly
/// in rational mode.
template <class S>
TransitionMatrix<S> forward_matrix(const bias::BiasMechanism& mech, int n) {
  if (n < 1) throw ConfigError("forward_matrix: population size must be >= 1");
  const std::vector<S> p = detail::bias_probabilities<S>(mech, n);

  TransitionMatrix<S> out;
  out.n = n;
  out.direction = Direction::Forward;
  out.entries = Matrix<S>(n + 1, n + 1);
  out.provenance = mech.describe();

  std::vector<S> pow_p(n + 1), pow_q(n + 1);
  for (int k = 0; k <= n; ++k) {
    const S q = S(1) - p[k];
    pow_p[0] = S(1);
    pow_q[0] = S(1);
    for (int j = 1; j <= n; ++j) {
      pow_p[j] = pow_p[j - 1] * p[k];
      pow_q[j] = pow_q[j - 1] * q;
    }
    for (int kp = 0; kp <= n; ++kp)
      out.entries(k, kp) =
          scalar_traits<S>::from_bigint(binomial(n, kp)) * pow_p[kp] * pow_q[n - kp];
  }
  return out;
}

namespace detail {

template <class S>
TransitionMatrix<S> finish_backward(int n, Matrix<S> entries, const S& q0, long clamped,
                                    std::string provenance) {
  TransitionMatrix<S> out;
  out.n = n;
  out.direction = Direction::Backward;
  out.entries = std::move(entries);
  out.provenance = std::move(provenance);
  out.clamped_entries = clamped;
  if (q0 == S(1)) {
    out.stochasticity = Stochasticity::Stochastic;
  } else {
    out.stochasticity = Stochasticity::SubStochastic;
    out.deficit.resize(n + 1);
    S q0_pow(1);
    for (int i = 0; i <= n; ++i) {
      out.deficit[i] = S(1) - q0_pow;
      q0_pow *= q0;
    }
  }
  return out;
}

}  // namespace detail

/// Dual ancestral matrix of the theorem, built from the difference triangle
/// of (q(m/n)^i)_m. Float mode clamps entries in [-tol, 0) to zero with
/// tol = 2^{-60} * (row max) and aborts on anything more negative; rational
/// mode aborts on any negative entry. The abort carries the violating
/// (i, j, value) as a CmViolation: the mechanism fails the admissibility
/// test at this resolution.
template <class S>
TransitionMatrix<S> dual_matrix(const bias::BiasMechanism& mech, int n) {
  if (n < 1) throw ConfigError("dual_matrix: population size must be >= 1");
  std::vector<S> q(n + 1);
  for (int m = 0; m <= n; ++m) q[m] = mech.q(detail::grid_x<S>(m, n));

  Matrix<S> entries(n + 1, n + 1);
  long clamped = 0;
  std::vector<S> w(n + 1, S(1));  // q^i, starting at i = 0
  std::vector<S> t(n + 1), raw(n + 1);
  for (int i = 0; i <= n; ++i) {
    if (i > 0)
      for (int m = 0; m <= n; ++m) w[m] *= q[m];
    t = w;
    raw[0] = t[n];
    for (int j = 1; j <= n; ++j) {
      for (int m = n; m >= j; --m) t[m] -= t[m - 1];
      raw[j] = (j % 2 == 0) ? t[n] : S(-t[n]);
      raw[j] *= scalar_traits<S>::from_bigint(binomial(n, j));
    }
    S row_max(0);
    for (int j = 0; j <= n; ++j) row_max = std::max(row_max, abs_value(raw[j]));
    S tol(0);
    if constexpr (!scalar_traits<S>::is_exact) tol = row_max * ldexp(S(1), -60);
    for (int j = 0; j <= n; ++j) {
      if (raw[j] < S(0)) {
        if (raw[j] < -tol)
          throw CmViolation(i, j, scalar_traits<S>::to_string(raw[j]),
                            mech.describe() + " is not admissible at resolution n=" +
                                std::to_string(n) + ": dual entry (" + std::to_string(i) + "," +
                                std::to_string(j) + ") = " + scalar_traits<S>::to_string(raw[j]));
        raw[j] = S(0);
        ++clamped;
      }
      entries(i, j) = raw[j];
    }
  }
  return detail::finish_backward<S>(n, std::move(entries), q[0], clamped,
                                    "dual of " + mech.describe());
}

/// Raw alternating-sum route to the same dual matrix; cross-check path
/// only (deeper cancellation than the triangle route).
template <class S>
TransitionMatrix<S> dual_matrix_alternating(const bias::BiasMechanism& mech, int n) {
  if (n < 1) throw ConfigError("dual_matrix_alternating: population size must be >= 1");
  std::vector<S> q(n + 1);
  for (int m = 0; m <= n; ++m) q[m] = mech.q(detail::grid_x<S>(m, n));

  Matrix<S> entries(n + 1, n + 1);
  std::vector<S> qpow(n + 1, S(1));  // q(1 - l/n)^i = q[(n-l)/n]^i
  for (int i = 0; i <= n; ++i) {
    if (i > 0)
      for (int m = 0; m <= n; ++m) qpow[m] *= q[m];
    for (int j = 0; j <= n; ++j) {
      S sum(0);
      for (int l = 0; l <= j; ++l) {
        S term = scalar_traits<S>::from_bigint(binomial(j, l)) * qpow[n - l];
        if ((j - l) % 2 != 0)
          sum -= term;
        else
          sum += term;
      }
      entries(i, j) = scalar_traits<S>::from_bigint(binomial(n, j)) * sum;
    }
  }
  return detail::finish_backward<S>(n, std::move(entries), q[0], 0,
                                    "dual (alternating sum) of " + mech.describe());
}

/// Mutation dual in closed form: P(i,j) = (n)_j n^{-i} S^{mu2}_{i,j}(kappa/n)
/// for j <= i, zero above the diagonal. Equals dual_matrix(mutation(...), n)
/// entrywise.
template <class S>
TransitionMatrix<S> dual_matrix_mutation_closed_form(const Rational& mu1, const Rational& mu2,
                                                     int n) {
  const Rational kappa = Rational(1) - mu1 - mu2;
  if (kappa < 0) throw ConfigError("mutation dual needs kappa >= 0 (mu1 <= 1 - mu2)");
  if (n < 1) throw ConfigError("dual_matrix_mutation_closed_form: population size must be >= 1");

  StirlingTable<S> table(n, mu2, kappa, n);
  Matrix<S> entries(n + 1, n + 1);
  BigInt n_pow(1);  // n^i
  for (int i = 0; i <= n; ++i) {
    if (i > 0) n_pow *= n;
    for (int j = 0; j <= i; ++j)
      entries(i, j) =
          from_rational<S>(Rational(falling_factorial(n, j), n_pow)) * table.generalized(i, j);
  }
  const S q0 = from_rational<S>(Rational(1) - mu1);
  return detail::finish_backward<S>(n, std::move(entries), q0, 0,
                                    "mutation dual closed form (mu1=" + format_rational(mu1) +
                                        ", mu2=" + format_rational(mu2) + ")");
}

/// Multinomial reproduction weights pi_m = p(m/n) - p((m-1)/n), m = 1..n.
/// They sum to p(1) - p(0); a probability vector exactly when that span is 1.
template <class S>
std::vector<S> biased_reproduction_weights(const bias::BiasMechanism& mech, int n) {
  const std::vector<S> p = detail::bias_probabilities<S>(mech, n);
  std::vector<S> w(n);
  for (int m = 1; m <= n; ++m) {
    w[m - 1] = p[m] - p[m - 1];
    S tol(0);
    if constexpr (!scalar_traits<S>::is_exact) tol = scalar_traits<S>::epsilon() * S(16);
    if (w[m - 1] < -tol)
      throw NumericalError("negative reproduction weight at m=" + std::to_string(m) +
                           ": mechanism not monotone");
    if (w[m - 1] < S(0)) w[m - 1] = S(0);
  }
  return w;
}

template <class S>
struct DualityReport {
  S residual{};       // max entry of |Pi Phi - Phi P'|
  bool exact = false; // residual is an exact rational zero
};

/// Residual of the one-step duality identity Pi Phi = Phi P'.
template <class S>
DualityReport<S> verify_duality(const TransitionMatrix<S>& forward,
                                const TransitionMatrix<S>& backward,
                                const kernels::DualityKernel<S>& kernel) {
  if (forward.n != backward.n || forward.n != kernel.n)
    throw NumericalError("verify_duality: population sizes disagree");
  const Matrix<S> lhs = forward.entries * kernel.matrix;
  const Matrix<S> rhs = kernel.matrix * backward.entries.transpose();
  DualityReport<S> rep;
  rep.residual = max_abs_diff(lhs, rhs);
  rep.exact = scalar_traits<S>::is_exact && rep.residual == S(0);
  return rep;
}

}  // namespace wfdual::chains
