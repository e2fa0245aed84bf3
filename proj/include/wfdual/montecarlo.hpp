// Seeded simulation of the forward chain N_r and the backward chain A_r
// (with its coffin state), and the two-sided estimator of the duality
// identity. Replicate r always draws from Philox stream r, so traces are
// bit-identical for a given (seed, stream layout) no matter how replicates
// are scheduled.
#pragma once

#include "wfdual/chains.hpp"
#include "wfdual/rng.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace wfdual::mc {

/// Terminal-state sentinel for the coffin state of killed backward chains.
inline constexpr int kCoffin = -1;

enum class ForwardSampler {
  Binomial,     // k' ~ Bin(n, p(k/n)) directly
  Multinomial,  // offspring vector ~ Multin(n; pi), summed over the first k
};

struct SimConfig {
  int n = 0;
  int horizon = 0;
  long replicates = 1;
  std::uint64_t seed = 0;
  int start = 0;
  ForwardSampler sampler = ForwardSampler::Binomial;
  bool record_paths = false;
};

struct SimTrace {
  std::vector<int> terminal;             // per replicate; kCoffin if killed
  std::vector<std::vector<int>> paths;   // optional full paths
  long coffin_hits = 0;
  std::uint64_t seed = 0;
  int n = 0, horizon = 0, start = 0;
  std::string provenance;
};

// ── distribution draws ──────────────────────────────────────────────────────

namespace detail {

inline int binomial_small(int n, double p, PhiloxRng& rng) {
  // inversion from k = 0; p <= 1/2 so (1-p)^n stays well above underflow
  const double u = rng.next_double();
  double pf = std::exp(n * std::log1p(-p));
  double cum = pf;
  int k = 0;
  const double odds = p / (1 - p);
  while (u >= cum && k < n) {
    pf *= odds * (n - k) / (k + 1);
    ++k;
    cum += pf;
  }
  return k;
}

inline int binomial_large(int n, double p, PhiloxRng& rng) {
  // mode-centered window inversion; the window carries all but ~1e-30 of
  // the mass, so the draw stays stable at any n
  const int mode = static_cast<int>((n + 1) * p);
  const double sd = std::sqrt(n * p * (1 - p));
  const int half = static_cast<int>(12 * sd) + 8;
  const int lo = std::max(0, mode - half), hi = std::min(n, mode + half);
  std::vector<double> pmf(hi - lo + 1);
  double lmode = std::lgamma(n + 1.0) - std::lgamma(mode + 1.0) - std::lgamma(n - mode + 1.0) +
                 mode * std::log(p) + (n - mode) * std::log1p(-p);
  pmf[mode - lo] = std::exp(lmode);
  for (int k = mode + 1; k <= hi; ++k)
    pmf[k - lo] = pmf[k - 1 - lo] * ((n - k + 1) * p) / (k * (1 - p));
  for (int k = mode - 1; k >= lo; --k)
    pmf[k - lo] = pmf[k + 1 - lo] * ((k + 1) * (1 - p)) / ((n - k) * p);
  double total = 0;
  for (double v : pmf) total += v;
  const double u = rng.next_double() * total;
  double cum = 0;
  for (int k = lo; k <= hi; ++k) {
    cum += pmf[k - lo];
    if (u < cum) return k;
  }
  return hi;
}

}  // namespace detail

/// One draw from Bin(n, p). Inversion for n <= 64, mode-centered window
/// inversion above; the one-step chi-square test is the behavioral guard.
inline int binomial_draw(int n, double p, PhiloxRng& rng) {
  if (p <= 0) return 0;
  if (p >= 1) return n;
  if (p > 0.5) return n - binomial_draw(n, 1 - p, rng);
  return n <= 64 ? detail::binomial_small(n, p, rng) : detail::binomial_large(n, p, rng);
}

/// Multinomial draw via sequential conditional binomials; the result sums
/// to n exactly.
inline std::vector<int> multinomial_draw(int n, const std::vector<double>& weights,
                                         PhiloxRng& rng) {
  std::vector<int> counts(weights.size(), 0);
  double mass = 0;
  for (double w : weights) mass += w;
  int remaining = n;
  for (size_t m = 0; m + 1 < weights.size() && remaining > 0; ++m) {
    const double p = mass > 0 ? std::min(1.0, weights[m] / mass) : 1.0;
    counts[m] = binomial_draw(remaining, p, rng);
    remaining -= counts[m];
    mass -= weights[m];
  }
  if (!counts.empty()) counts.back() += remaining;
  return counts;
}

// ── forward simulation ──────────────────────────────────────────────────────

template <class S>
SimTrace simulate_forward(const bias::BiasMechanism& mech, const SimConfig& cfg) {
  if (cfg.n < 1 || cfg.start < 0 || cfg.start > cfg.n || cfg.replicates < 1 || cfg.horizon < 0)
    throw ConfigError("simulate_forward: invalid configuration");

  std::vector<double> p(cfg.n + 1);
  for (int k = 0; k <= cfg.n; ++k)
    p[k] = scalar_traits<S>::to_double(mech.evaluate(chains::detail::grid_x<S>(k, cfg.n)));

  std::vector<double> weights;
  if (cfg.sampler == ForwardSampler::Multinomial) {
    const auto w = chains::biased_reproduction_weights<S>(mech, cfg.n);
    double span = 0;
    weights.reserve(w.size());
    for (const S& x : w) {
      weights.push_back(scalar_traits<S>::to_double(x));
      span += weights.back();
    }
    if (std::abs(span - 1.0) > 1e-9)
      throw ConfigError("multinomial sampler needs p(1) - p(0) = 1; weights sum to " +
                        std::to_string(span));
  }

  SimTrace trace;
  trace.n = cfg.n;
  trace.horizon = cfg.horizon;
  trace.start = cfg.start;
  trace.seed = cfg.seed;
  trace.provenance = "forward " + mech.describe();
  trace.terminal.resize(cfg.replicates);
  if (cfg.record_paths) trace.paths.resize(cfg.replicates);

  for (long rep = 0; rep < cfg.replicates; ++rep) {
    PhiloxRng rng(cfg.seed, static_cast<std::uint64_t>(rep));
    int state = cfg.start;
    std::vector<int>* path = nullptr;
    if (cfg.record_paths) {
      path = &trace.paths[rep];
      path->push_back(state);
    }
    for (int r = 0; r < cfg.horizon; ++r) {
      if (cfg.sampler == ForwardSampler::Binomial) {
        state = binomial_draw(cfg.n, p[state], rng);
      } else {
        const std::vector<int> nu = multinomial_draw(cfg.n, weights, rng);
        int sum = 0;
        for (int m = 0; m < state; ++m) sum += nu[m];
        state = sum;
      }
      if (path) path->push_back(state);
    }
    trace.terminal[rep] = state;
  }
  return trace;
}

// ── backward simulation ─────────────────────────────────────────────────────

template <class S>
SimTrace simulate_backward(const chains::TransitionMatrix<S>& dual, const SimConfig& cfg) {
  if (dual.direction != chains::Direction::Backward)
    throw ConfigError("simulate_backward expects a backward matrix");
  if (cfg.n != dual.n) throw ConfigError("simulate_backward: population size mismatch");
  if (cfg.start < 0 || cfg.start > cfg.n || cfg.replicates < 1 || cfg.horizon < 0)
    throw ConfigError("simulate_backward: invalid configuration");

  const int d = cfg.n + 1;
  std::vector<std::vector<double>> cumulative(d, std::vector<double>(d));
  for (int i = 0; i < d; ++i) {
    double acc = 0;
    for (int j = 0; j < d; ++j) {
      acc += scalar_traits<S>::to_double(dual.entries(i, j));
      cumulative[i][j] = acc;
    }
  }

  SimTrace trace;
  trace.n = cfg.n;
  trace.horizon = cfg.horizon;
  trace.start = cfg.start;
  trace.seed = cfg.seed;
  trace.provenance = "backward " + dual.provenance;
  trace.terminal.resize(cfg.replicates);
  if (cfg.record_paths) trace.paths.resize(cfg.replicates);

  for (long rep = 0; rep < cfg.replicates; ++rep) {
    PhiloxRng rng(cfg.seed, static_cast<std::uint64_t>(rep));
    int state = cfg.start;
    std::vector<int>* path = nullptr;
    if (cfg.record_paths) {
      path = &trace.paths[rep];
      path->push_back(state);
    }
    for (int r = 0; r < cfg.horizon && state != kCoffin; ++r) {
      const auto& row = cumulative[state];
      const double u = rng.next_double();
      if (u >= row.back()) {
        state = kCoffin;  // killing mass 1 - q(0)^i
      } else {
        int j = 0;
        while (u >= row[j]) ++j;
        state = j;
      }
      if (path) path->push_back(state);
    }
    if (state == kCoffin) ++trace.coffin_hits;
    trace.terminal[rep] = state;
  }
  return trace;
}

// ── two-sided duality estimator ─────────────────────────────────────────────

struct EstimatorSide {
  double mean = 0;
  double std_error = 0;
};

struct DualityEstimate {
  EstimatorSide forward;   // E_m Phi2(N_r, k)
  EstimatorSide backward;  // E_k Phi2(m, A_r), coffin contributing 0
  double difference = 0;
  double combined_se = 0;
  double sigmas = 0;  // |difference| in units of combined standard error
  long replicates = 0;
  std::uint64_t seed = 0;
};

namespace detail {

inline EstimatorSide summarize(const std::vector<double>& values) {
  const double n = static_cast<double>(values.size());
  double mean = 0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0;
  for (double v : values) ss += (v - mean) * (v - mean);
  EstimatorSide side;
  side.mean = mean;
  side.std_error = values.size() > 1 ? std::sqrt(ss / (n * (n - 1))) : 0.0;
  return side;
}

}  // namespace detail

/// Monte Carlo check of E_m[C(n-N_r,k)/C(n,k)] = E_k[C(n-m,A_r)/C(n,A_r)].
/// Backward replicates that hit the coffin contribute 0, which keeps the
/// estimator aligned with the sub-stochastic matrix expectation Phi P'^r.
template <class S>
DualityEstimate duality_estimator(const bias::BiasMechanism& mech, int n, int m, int k, int r,
                                  long replicates, std::uint64_t seed) {
  const auto dual = chains::dual_matrix<S>(mech, n);

  std::vector<double> phi_forward(n + 1), phi_backward(n + 1);
  for (int state = 0; state <= n; ++state) {
    phi_forward[state] =
        scalar_traits<Rational>::to_double(Rational(binomial(n - state, k), binomial(n, k)));
    phi_backward[state] =
        scalar_traits<Rational>::to_double(Rational(binomial(n - m, state), binomial(n, state)));
  }

  SimConfig fwd;
  fwd.n = n;
  fwd.horizon = r;
  fwd.replicates = replicates;
  fwd.seed = seed;
  fwd.start = m;
  const SimTrace ftrace = simulate_forward<S>(mech, fwd);

  SimConfig bwd = fwd;
  bwd.start = k;
  bwd.seed = seed ^ 0x9e3779b97f4a7c15ull;  // decouple the two stream families
  const SimTrace btrace = simulate_backward<S>(dual, bwd);

  std::vector<double> fvals(replicates), bvals(replicates);
  for (long i = 0; i < replicates; ++i) {
    fvals[i] = phi_forward[ftrace.terminal[i]];
    bvals[i] = btrace.terminal[i] == kCoffin ? 0.0 : phi_backward[btrace.terminal[i]];
  }

  DualityEstimate est;
  est.forward = detail::summarize(fvals);
  est.backward = detail::summarize(bvals);
  est.difference = est.forward.mean - est.backward.mean;
  est.combined_se = std::sqrt(est.forward.std_error * est.forward.std_error +
                              est.backward.std_error * est.backward.std_error);
  est.sigmas = est.combined_se > 0 ? std::abs(est.difference) / est.combined_se
                                   : (est.difference == 0 ? 0.0 : std::numeric_limits<double>::infinity());
  est.replicates = replicates;
  est.seed = seed;
  return est;
}

// ── goodness-of-fit guard ───────────────────────────────────────────────────

struct ChiSquareResult {
  double statistic = 0;
  int dof = 0;
  double p_value = 1;
  long pooled_bins = 0;
};

/// Pearson chi-square of observed counts against expected probabilities,
/// pooling cells with expected count below 5 into their neighbor.
inline ChiSquareResult chi_square_test(const std::vector<long>& observed,
                                       const std::vector<double>& expected_probs, long total) {
  if (observed.size() != expected_probs.size())
    throw ConfigError("chi_square_test: size mismatch");
  std::vector<double> exp_counts;
  std::vector<double> obs_counts;
  double pend_exp = 0, pend_obs = 0;
  ChiSquareResult res;
  for (size_t i = 0; i < observed.size(); ++i) {
    pend_exp += expected_probs[i] * static_cast<double>(total);
    pend_obs += static_cast<double>(observed[i]);
    if (pend_exp >= 5.0) {
      exp_counts.push_back(pend_exp);
      obs_counts.push_back(pend_obs);
      pend_exp = pend_obs = 0;
    } else {
      ++res.pooled_bins;
    }
  }
  if (pend_exp > 0 || pend_obs > 0) {
    if (!exp_counts.empty()) {
      exp_counts.back() += pend_exp;
      obs_counts.back() += pend_obs;
    } else {
      exp_counts.push_back(pend_exp);
      obs_counts.push_back(pend_obs);
    }
  }
  res.dof = static_cast<int>(exp_counts.size()) - 1;
  for (size_t i = 0; i < exp_counts.size(); ++i) {
    if (exp_counts[i] <= 0) continue;
    const double d = obs_counts[i] - exp_counts[i];
    res.statistic += d * d / exp_counts[i];
  }
  if (res.dof >= 1) {
    boost::math::chi_squared dist(res.dof);
    res.p_value = boost::math::cdf(boost::math::complement(dist, res.statistic));
  }
  return res;
}

}  // namespace wfdual::mc
