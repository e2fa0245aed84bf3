// Limit-law analysis: stationary distributions, absorption probabilities,
// the rho = Phi pi bridge between the two, Bernstein pgf evaluation,
// spectral decomposition / transport, and the Galton-Watson regime of
// supercritical mechanisms.
#pragma once

#include "wfdual/chains.hpp"

#include <boost/multiprecision/eigen.hpp>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <complex>
#include <numeric>
#include <string>
#include <vector>

namespace wfdual::analysis {

/// Thrown when a stationary distribution is requested of a chain with
/// absorbing states; absorption analysis is the right tool there.
class ReducibleChainError : public NumericalError {
 public:
  explicit ReducibleChainError(const std::string& what) : NumericalError(what) {}
};

template <class S>
struct StationaryDistribution {
  int n = 0;
  std::vector<S> probabilities;
  S residual{};  // max |pi' M - pi'| plus any cross-method disagreement
  std::string method;
};

template <class S>
struct AbsorptionVector {
  int n = 0;
  std::vector<S> values;  // values[k] = P_k(hit 0 before any other exit)
  std::string boundary;
};

namespace detail {

template <class S>
bool row_is_point_mass(const Matrix<S>& M, int i) {
  S tol(0);
  if constexpr (!scalar_traits<S>::is_exact) tol = scalar_traits<S>::epsilon() * S(64);
  for (int j = 0; j < M.cols(); ++j) {
    const S want = (j == i) ? S(1) : S(0);
    if (abs_value<S>(M(i, j) - want) > tol) return false;
  }
  return true;
}

template <class S>
S stationary_residual(const Matrix<S>& M, const std::vector<S>& pi) {
  const std::vector<S> image = M.apply_left(pi);
  S r(0);
  for (size_t i = 0; i < pi.size(); ++i) r = std::max(r, abs_value<S>(image[i] - pi[i]));
  return r;
}

/// Left fixed vector by solving (I - M') x = 0 with sum(x) = 1 substituted
/// for the last equation.
template <class S>
std::vector<S> stationary_by_solve(const Matrix<S>& M) {
  const int d = M.rows();
  Matrix<S> A(d, d);
  std::vector<S> b(d, S(0));
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) A(i, j) = (i == j ? S(1) : S(0)) - M(j, i);
  for (int j = 0; j < d; ++j) A(d - 1, j) = S(1);
  b[d - 1] = S(1);
  return solve_linear(A, b);
}

}  // namespace detail

inline constexpr long kPowerIterationCap = 1000000;

/// Stationary distribution of an irreducible aperiodic forward chain.
/// Float mode: power iteration to an L1 step below 1e-14, cross-checked
/// against the direct linear solve. Rational mode: exact linear solve.
template <class S>
StationaryDistribution<S> stationary(const chains::TransitionMatrix<S>& chain) {
  const Matrix<S>& M = chain.entries;
  const int d = M.rows();
  for (int i = 0; i < d; ++i)
    if (detail::row_is_point_mass(M, i))
      throw ReducibleChainError("state " + std::to_string(i) +
                                " is absorbing; the chain has no unique stationary law - "
                                "use absorption analysis instead");
  if (chain.stochasticity != chains::Stochasticity::Stochastic)
    throw ReducibleChainError("sub-stochastic matrix has no stationary distribution; "
                              "use absorption analysis instead");

  StationaryDistribution<S> out;
  out.n = chain.n;

  if constexpr (scalar_traits<S>::is_exact) {
    out.probabilities = detail::stationary_by_solve<S>(M);
    out.residual = detail::stationary_residual(M, out.probabilities);
    out.method = "exact-linear-solve";
    return out;
  } else {
    std::vector<S> v(d, S(1) / S(d));
    const S threshold = S(1e-14);
    bool converged = false;
    for (long it = 0; it < kPowerIterationCap; ++it) {
      std::vector<S> w = M.apply_left(v);
      S mass(0);
      for (const S& x : w) mass += x;
      for (S& x : w) x /= mass;
      S step(0);
      for (int i = 0; i < d; ++i) step += abs_value<S>(w[i] - v[i]);
      v = std::move(w);
      if (step < threshold) {
        converged = true;
        break;
      }
    }
    if (!converged)
      throw NumericalError("power iteration did not reach the 1e-14 threshold within " +
                           std::to_string(kPowerIterationCap) + " iterations");
    std::vector<S> solved = detail::stationary_by_solve<S>(M);
    S disagreement(0);
    for (int i = 0; i < d; ++i) disagreement = std::max(disagreement, abs_value<S>(solved[i] - v[i]));
    out.probabilities = std::move(solved);
    out.residual = std::max(detail::stationary_residual(M, out.probabilities), disagreement);
    out.method = "power-iteration+linear-solve";
    return out;
  }
}

/// Hit-{0}-first probabilities. Boundary states must be absorbing in the
/// matrix; for sub-stochastic backward chains the per-row deficit is killing
/// mass (the coffin), so values[k] = P_k(reach 0 before the coffin or any
/// other boundary state). Lower-triangular systems short-circuit to forward
/// substitution; everything else goes through the linear solver.
template <class S>
AbsorptionVector<S> absorption(const chains::TransitionMatrix<S>& chain,
                               const std::vector<int>& boundary) {
  const Matrix<S>& M = chain.entries;
  const int d = M.rows();
  std::vector<bool> is_boundary(d, false);
  bool has_zero = false;
  for (int s : boundary) {
    if (s < 0 || s >= d) throw ConfigError("absorption: boundary state out of range");
    if (!detail::row_is_point_mass(M, s))
      throw ConfigError("absorption: state " + std::to_string(s) + " is not absorbing");
    is_boundary[s] = true;
    if (s == 0) has_zero = true;
  }
  if (!has_zero) throw ConfigError("absorption: boundary must contain state 0");

  AbsorptionVector<S> out;
  out.n = chain.n;
  out.values.assign(d, S(0));
  out.values[0] = S(1);
  {
    std::string names;
    for (int s : boundary) names += (names.empty() ? "" : ",") + std::to_string(s);
    out.boundary = "{" + names + "}";
  }

  std::vector<int> transient;
  for (int i = 0; i < d; ++i)
    if (!is_boundary[i]) transient.push_back(i);
  if (transient.empty()) return out;

  bool lower_triangular = true;
  for (int i = 0; i < d && lower_triangular; ++i)
    for (int j = i + 1; j < d; ++j)
      if (M(i, j) != S(0)) {
        lower_triangular = false;
        break;
      }

  if (lower_triangular) {
    for (int i = 1; i < d; ++i) {
      if (is_boundary[i]) continue;
      S acc(0);
      for (int j = 0; j < i; ++j) acc += M(i, j) * out.values[j];
      const S diag = S(1) - M(i, i);
      if (diag == S(0)) throw NumericalError("absorption: transient state with unit self-loop");
      out.values[i] = acc / diag;
    }
    return out;
  }

  const int t = static_cast<int>(transient.size());
  Matrix<S> A(t, t);
  std::vector<S> b(t, S(0));
  for (int r = 0; r < t; ++r) {
    const int i = transient[r];
    for (int c = 0; c < t; ++c) A(r, c) = (r == c ? S(1) : S(0)) - M(i, transient[c]);
    b[r] = M(i, 0);
  }
  const std::vector<S> x = solve_linear(A, b);
  for (int r = 0; r < t; ++r) out.values[transient[r]] = x[r];
  return out;
}

// ── the duality bridge ──────────────────────────────────────────────────────

/// rho = Phi pi: extinction probabilities of one chain from the invariant
/// law of its dual. Phi2 only.
template <class S>
AbsorptionVector<S> duality_bridge(const std::vector<S>& pi,
                                   const kernels::DualityKernel<S>& kernel) {
  if (kernel.variant != kernels::KernelVariant::Phi2)
    throw ConfigError("duality bridge runs through the Phi2 kernel");
  if (static_cast<int>(pi.size()) != kernel.n + 1)
    throw ConfigError("duality bridge: dimension mismatch");
  AbsorptionVector<S> out;
  out.n = kernel.n;
  out.values = kernel.matrix.apply(pi);
  out.boundary = "bridge";
  return out;
}

/// pi = Phi^{-1} rho, the inverse direction of the bridge.
template <class S>
std::vector<S> duality_bridge_inverse(const std::vector<S>& rho,
                                      const kernels::DualityKernel<S>& kernel) {
  if (kernel.variant != kernels::KernelVariant::Phi2)
    throw ConfigError("duality bridge runs through the Phi2 kernel");
  if (static_cast<int>(rho.size()) != kernel.n + 1)
    throw ConfigError("duality bridge: dimension mismatch");
  return kernel.inverse.apply(rho);
}

// ── Bernstein pgf of the limit law ──────────────────────────────────────────

/// E[u^{X_inf}] = sum_k C(n,k) rho(k) u^{n-k} (1-u)^k.
template <class S>
S pgf_from_absorption(const AbsorptionVector<S>& rho, const S& u) {
  const int n = rho.n;
  std::vector<S> pow_u(n + 1), pow_v(n + 1);
  const S v = S(1) - u;
  pow_u[0] = S(1);
  pow_v[0] = S(1);
  for (int k = 1; k <= n; ++k) {
    pow_u[k] = pow_u[k - 1] * u;
    pow_v[k] = pow_v[k - 1] * v;
  }
  S acc(0);
  for (int k = 0; k <= n; ++k)
    acc += scalar_traits<S>::from_bigint(binomial(n, k)) * rho.values[k] * pow_u[n - k] * pow_v[k];
  return acc;
}

template <class S>
struct LimitMoments {
  S mean{}, variance{};
};

/// Factorial-moment identities: E[n - X] = n rho(1),
/// E[(n-X)(n-X-1)] = n(n-1) rho(2). These are the k = 1,2 rows of the
/// duality formula, so mean and variance come straight off the absorption
/// vector.
template <class S>
LimitMoments<S> moments_from_absorption(const AbsorptionVector<S>& rho) {
  const int n = rho.n;
  LimitMoments<S> m;
  const S ey = S(n) * rho.values[1];  // E[n - X]
  m.mean = S(n) - ey;
  if (n >= 2) {
    const S ey2 = S(n) * S(n - 1) * rho.values[2] + ey;  // E[(n-X)^2]
    m.variance = ey2 - ey * ey;
  }
  return m;
}

/// Mean and variance of a law given directly on {0..n}.
template <class S>
LimitMoments<S> moments_from_law(const std::vector<S>& pi) {
  LimitMoments<S> m;
  S ex(0), ex2(0);
  for (size_t i = 0; i < pi.size(); ++i) {
    ex += S(static_cast<int>(i)) * pi[i];
    ex2 += S(static_cast<int>(i)) * S(static_cast<int>(i)) * pi[i];
  }
  m.mean = ex;
  m.variance = ex2 - ex * ex;
  return m;
}

// ── spectral machinery (float modes only) ───────────────────────────────────

template <class S>
struct SpectralResult {
  std::vector<std::complex<S>> eigenvalues;  // sorted by modulus, descending
  Matrix<std::complex<S>> right;             // columns: right eigenvectors
  Matrix<std::complex<S>> left;              // rows: left eigenvectors, left*right = I

  /// M^r as sum_k lambda_k^r r_k l_k'; imaginary parts cancel up to
  /// rounding and the largest leftover is reported through *imag_residual.
  Matrix<S> reconstruct_power(unsigned r, S* imag_residual = nullptr) const {
    const int d = static_cast<int>(eigenvalues.size());
    Matrix<std::complex<S>> scaled(d, d);
    for (int k = 0; k < d; ++k) {
      std::complex<S> lr(S(1), S(0));
      for (unsigned e = 0; e < r; ++e) lr *= eigenvalues[k];
      for (int j = 0; j < d; ++j) scaled(k, j) = lr * left(k, j);
    }
    const Matrix<std::complex<S>> full = right * scaled;
    Matrix<S> out(d, d);
    S worst(0);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        out(i, j) = full(i, j).real();
        worst = std::max(worst, abs_value<S>(full(i, j).imag()));
      }
    if (imag_residual) *imag_residual = worst;
    return out;
  }
};

namespace detail {

template <class S>
Matrix<std::complex<S>> complex_inverse(const Matrix<std::complex<S>>& V) {
  const int d = V.rows();
  // Gauss-Jordan with magnitude pivoting on |re| + |im|
  Matrix<std::complex<S>> a = V;
  Matrix<std::complex<S>> inv = Matrix<std::complex<S>>::identity(d);
  auto mag = [](const std::complex<S>& z) { return abs_value(z.real()) + abs_value(z.imag()); };
  for (int k = 0; k < d; ++k) {
    int pivot = k;
    S best = mag(a(k, k));
    for (int r = k + 1; r < d; ++r)
      if (mag(a(r, k)) > best) {
        best = mag(a(r, k));
        pivot = r;
      }
    if (best == S(0))
      throw NumericalError("eigenvector matrix is singular: matrix is defective or nearly so");
    if (pivot != k)
      for (int c = 0; c < d; ++c) {
        std::swap(a(k, c), a(pivot, c));
        std::swap(inv(k, c), inv(pivot, c));
      }
    const std::complex<S> piv = a(k, k);
    for (int c = 0; c < d; ++c) {
      a(k, c) /= piv;
      inv(k, c) /= piv;
    }
    for (int r = 0; r < d; ++r) {
      if (r == k) continue;
      const std::complex<S> f = a(r, k);
      if (f == std::complex<S>(S(0), S(0))) continue;
      for (int c = 0; c < d; ++c) {
        a(r, c) -= f * a(k, c);
        inv(r, c) -= f * inv(k, c);
      }
    }
  }
  return inv;
}

}  // namespace detail

/// Eigendecomposition of a transition matrix at the scalar's precision.
template <class S>
SpectralResult<S> spectral(const Matrix<S>& M) {
  static_assert(!scalar_traits<S>::is_exact,
                "spectral decomposition is a float-mode feature; rational mode offers "
                "char_poly_eval for eigenvalue verification");
  const int d = M.rows();
  using EMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  EMat A(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) A(i, j) = M(i, j);
  Eigen::EigenSolver<EMat> solver(A);
  if (solver.info() != Eigen::Success)
    throw NumericalError("eigensolver failed to converge");

  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  const auto& ev = solver.eigenvalues();
  auto modulus2 = [&](int k) {
    return ev[k].real() * ev[k].real() + ev[k].imag() * ev[k].imag();
  };
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
    const S mx = modulus2(x), my = modulus2(y);
    if (mx != my) return mx > my;
    if (ev[x].real() != ev[y].real()) return ev[x].real() > ev[y].real();
    return ev[x].imag() > ev[y].imag();
  });

  SpectralResult<S> out;
  out.eigenvalues.resize(d);
  out.right = Matrix<std::complex<S>>(d, d);
  const auto& vec = solver.eigenvectors();
  for (int k = 0; k < d; ++k) {
    out.eigenvalues[k] = std::complex<S>(ev[order[k]].real(), ev[order[k]].imag());
    for (int i = 0; i < d; ++i)
      out.right(i, k) = std::complex<S>(vec(i, order[k]).real(), vec(i, order[k]).imag());
  }
  out.left = detail::complex_inverse(out.right);
  return out;
}

template <class S>
SpectralResult<S> spectral(const chains::TransitionMatrix<S>& chain) {
  return spectral(chain.entries);
}

/// Transported decomposition of the dual: right vectors Phi^{-1} R, left
/// vectors L Phi, eigenvalues unchanged, normalization preserved. The
/// result diagonalizes P' when the duality identity holds.
template <class S>
SpectralResult<S> dual_spectrum_transport(const SpectralResult<S>& spec,
                                          const kernels::DualityKernel<S>& kernel) {
  const int d = kernel.n + 1;
  if (static_cast<int>(spec.eigenvalues.size()) != d)
    throw ConfigError("dual_spectrum_transport: dimension mismatch");
  Matrix<std::complex<S>> phi(d, d), phi_inv(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      phi(i, j) = std::complex<S>(kernel.matrix(i, j), S(0));
      phi_inv(i, j) = std::complex<S>(kernel.inverse(i, j), S(0));
    }
  SpectralResult<S> out;
  out.eigenvalues = spec.eigenvalues;
  out.right = phi_inv * spec.right;
  out.left = spec.left * phi;
  return out;
}

// ── Galton-Watson regime ────────────────────────────────────────────────────

template <class S>
struct GwFixedPoint {
  S rho{};
  bool supercritical = false;
};

/// Smallest root of x = exp(-lambda (1 - x)), by the monotone fixed-point
/// iteration from x = 0. Subcritical lambda <= 1 returns rho = 1 flagged.
template <class S>
GwFixedPoint<S> gw_fixed_point(const S& lambda) {
  static_assert(!scalar_traits<S>::is_exact, "gw_fixed_point is a float-mode computation");
  GwFixedPoint<S> out;
  if (lambda <= S(1)) {
    out.rho = S(1);
    out.supercritical = false;
    return out;
  }
  out.supercritical = true;
  S x(0);
  const S tol = std::max(S(1e-20), scalar_traits<S>::epsilon() * S(4));
  for (long it = 0; it < kPowerIterationCap; ++it) {
    const S next = exp(-lambda * (S(1) - x));
    const S step = abs_value<S>(next - x);
    x = next;
    if (step < tol) break;
  }
  out.rho = x;
  return out;
}

/// Right-hand side of the finite-n correction identity
///   n (rho^m - rho_inf(m)) -> rho^m ( (1-rho)/(1+lambda rho) m^2
///                                   + lambda (1-rho) rho / (1-(lambda rho)^2) m ).
template <class S>
S gw_correction(const S& lambda, const S& rho, int m) {
  const S lr = lambda * rho;
  const S denom = S(1) - lr * lr;
  if (denom == S(0)) throw NumericalError("gw_correction: lambda*rho = 1 is singular");
  S rho_m(1);
  for (int e = 0; e < m; ++e) rho_m *= rho;
  const S quad = (S(1) - rho) / (S(1) + lr) * S(m) * S(m);
  const S lin = lambda * (S(1) - rho) * rho / denom * S(m);
  return rho_m * (quad + lin);
}

// ── limit-law diagnostics against the asymptotic formulas ───────────────────

template <class S>
struct MutationMomentsRow {
  int n = 0;
  S mean{}, variance{};            // exact finite-n moments of N_inf
  S mean_exact{};                  // n mu1/(mu1+mu2)
  S variance_main_term{};          // n^2 mu1 mu2 / ((mu1+mu2)^2 (2n(mu1+mu2)+1))
  S variance_asymptotic{};         // n mu1 mu2 / (2 (mu1+mu2)^3)
};

/// Extinction probabilities rho(0..k_max) of the mutation dual, by forward
/// substitution on its leading rows. The dual is a pure death process, so
/// rho(k) only involves rows up to k; this stays exact and O(k_max^2 n) at
/// any population size.
template <class S>
std::vector<S> mutation_extinction_prefix(const Rational& mu1, const Rational& mu2, int n,
                                          int k_max) {
  const Rational kappa = Rational(1) - mu1 - mu2;
  if (kappa < 0) throw ConfigError("mutation extinction needs kappa >= 0");
  std::vector<S> q(k_max + 1);  // q(1 - l/n) for l = 0..k_max
  for (int l = 0; l <= k_max; ++l)
    q[l] = from_rational<S>(Rational(1) - mu1 - kappa * Rational(n - l, n));
  std::vector<S> rho(k_max + 1);
  rho[0] = S(1);
  std::vector<S> qpow(k_max + 1, S(1));
  for (int i = 1; i <= k_max; ++i) {
    for (int l = 0; l <= k_max; ++l) qpow[l] *= q[l];
    S acc(0);
    S diag(0);
    for (int j = 0; j <= i; ++j) {
      S sum(0);
      for (int l = 0; l <= j; ++l) {
        S term = scalar_traits<S>::from_bigint(binomial(j, l)) * qpow[l];
        if ((j - l) % 2 != 0)
          sum -= term;
        else
          sum += term;
      }
      const S entry = scalar_traits<S>::from_bigint(binomial(n, j)) * sum;
      if (j == i)
        diag = entry;
      else
        acc += entry * rho[j];
    }
    rho[i] = acc / (S(1) - diag);
  }
  return rho;
}

/// Finite-n moments of the mutation model's stationary law over a ladder of
/// population sizes, next to the paper's asymptotic targets. Moments come
/// from the k = 1,2 factorial-moment identities, i.e. from rho(1) and
/// rho(2) of the dual, which keeps every ladder entry exact.
template <class S>
std::vector<MutationMomentsRow<S>> mutation_moment_diagnostics(const Rational& mu1,
                                                               const Rational& mu2,
                                                               const std::vector<int>& ladder) {
  std::vector<MutationMomentsRow<S>> rows;
  for (int n : ladder) {
    AbsorptionVector<S> rho;
    rho.n = n;
    rho.boundary = "{0}";
    rho.values = mutation_extinction_prefix<S>(mu1, mu2, n, 2);
    const auto m = moments_from_absorption<S>(rho);

    MutationMomentsRow<S> row;
    row.n = n;
    row.mean = m.mean;
    row.variance = m.variance;
    const S u1 = from_rational<S>(mu1), u2 = from_rational<S>(mu2);
    const S tot = u1 + u2;
    row.mean_exact = S(n) * u1 / tot;
    row.variance_main_term = S(n) * S(n) * u1 * u2 / (tot * tot * (S(2) * S(n) * tot + S(1)));
    row.variance_asymptotic = S(n) * u1 * u2 / (S(2) * tot * tot * tot);
    rows.push_back(std::move(row));
  }
  return rows;
}

template <class S>
struct AncestralLimitRow {
  int n = 0;
  S lambda{}, rho{};                 // gw inputs
  S mean{}, variance{};              // exact finite-n moments of A_inf
  S mean_asymptotic{};               // n (1 - rho)
  S variance_asymptotic{};           // n rho (1-rho) / (1 + lambda rho)
  std::vector<S> forward_extinction; // rho_inf(0..n) of the forward chain
};

/// Case-2 diagnostics for an absorbing mechanism with p'(0) = lambda > 1:
/// exact A_inf law via forward absorption and the bridge, against the
/// Galton-Watson normal-limit moments.
template <class S>
AncestralLimitRow<S> ancestral_limit_diagnostics(const bias::BiasMechanism& mech, int n,
                                                 const S& lambda) {
  auto forward = chains::forward_matrix<S>(mech, n);
  auto rho = absorption<S>(forward, {0, n});
  auto kernel = kernels::build_kernel<S>(n, kernels::KernelVariant::Phi2);
  auto pi = duality_bridge_inverse<S>(rho.values, kernel);
  const auto m = moments_from_law<S>(pi);

  AncestralLimitRow<S> row;
  row.n = n;
  row.lambda = lambda;
  row.rho = gw_fixed_point<S>(lambda).rho;
  row.mean = m.mean;
  row.variance = m.variance;
  row.mean_asymptotic = S(n) * (S(1) - row.rho);
  row.variance_asymptotic = S(n) * row.rho * (S(1) - row.rho) / (S(1) + lambda * row.rho);
  row.forward_extinction = rho.values;
  return row;
}

}  // namespace wfdual::analysis
