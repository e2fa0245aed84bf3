// Bias mechanisms p(x) and their algebra.
//
// A mechanism is a closed expression tree (sharing allowed), so the
// reciprocal / joint / compound rewrite rules and the symbolic
// admissibility rules stay decidable. Catalog leaves:
//
//   neutral            p(x) = x
//   selection(s)       p(x) = (1+s)x / (1+sx),               s > -1
//   dominance(s,h)     p(x) = ((1+s)x^2 + (1+sh)x(1-x)) /
//                             (1 + sx^2 + 2shx(1-x)),        s > -1, sh > -1
//   quadratic(c)       p(x) = x(1+c-cx),                     c in [-1,1]
//   mutation(m1,m2)    p(x) = (1-m2)x + m1(1-x),             m1 <= 1-m2
//   power(g)           p(x) = x^g,                           g > 0
//
// and combinators reciprocal / joint / mutational-compose / compound.
// Admissibility means q(x) = 1 - p(x) is completely monotone; the grid
// check is the finite-resolution necessary test that gates dual-matrix
// construction.
#pragma once

#include "wfdual/kernels.hpp"

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace wfdual::bias {

enum class Verdict { Admissible, NotAdmissible, Unknown };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Admissible: return "admissible";
    case Verdict::NotAdmissible: return "not-admissible";
    default: return "unknown";
  }
}

// ── probability generating functions ────────────────────────────────────────

/// Absolutely monotone pgf on (0,1), usable as the outer layer of a
/// compound bias. Construction enforces the parameter domain that makes
/// absolute monotonicity hold.
class Pgf {
 public:
  enum class Kind { Poisson, ShiftedPoisson, Geometric, ShiftedGeometric, Affine };

  static Pgf poisson(const Rational& theta) {
    require(theta > 0, "poisson pgf needs theta > 0");
    return Pgf(Kind::Poisson, theta, Rational(0));
  }
  static Pgf shifted_poisson(const Rational& theta) {
    require(theta > 0, "shifted-poisson pgf needs theta > 0");
    return Pgf(Kind::ShiftedPoisson, theta, Rational(0));
  }
  static Pgf geometric(const Rational& pi) {
    require(pi > 0 && pi < 1, "geometric pgf needs pi in (0,1)");
    return Pgf(Kind::Geometric, pi, Rational(0));
  }
  static Pgf shifted_geometric(const Rational& pi) {
    require(pi > 0 && pi < 1, "shifted-geometric pgf needs pi in (0,1)");
    return Pgf(Kind::ShiftedGeometric, pi, Rational(0));
  }
  static Pgf affine(const Rational& mu1, const Rational& mu2) {
    require(mu1 >= 0 && mu1 <= 1 && mu2 >= 0 && mu2 <= 1, "affine pgf needs mu1, mu2 in [0,1]");
    require(mu1 + mu2 <= 1, "affine pgf is absolutely monotone only for mu1 <= 1 - mu2");
    return Pgf(Kind::Affine, mu1, mu2);
  }

  Kind kind() const { return kind_; }
  const Rational& a() const { return a_; }
  const Rational& b() const { return b_; }

  bool rational_capable() const {
    return kind_ == Kind::Geometric || kind_ == Kind::ShiftedGeometric || kind_ == Kind::Affine;
  }

  template <class S>
  S operator()(const S& x) const {
    switch (kind_) {
      case Kind::Poisson: {
        if constexpr (scalar_traits<S>::is_exact)
          throw ConfigError("poisson pgf has no exact rational evaluation");
        else
          return exp(-from_rational<S>(a_) * (S(1) - x));
      }
      case Kind::ShiftedPoisson: {
        if constexpr (scalar_traits<S>::is_exact)
          throw ConfigError("shifted-poisson pgf has no exact rational evaluation");
        else {
          const S th = from_rational<S>(a_);
          return (exp(th * x) - S(1)) / (exp(th) - S(1));
        }
      }
      case Kind::Geometric: {
        const S pi = from_rational<S>(a_);
        return (S(1) - pi) / (S(1) - pi * x);
      }
      case Kind::ShiftedGeometric: {
        const S pi = from_rational<S>(a_);
        return x * (S(1) - pi) / (S(1) - pi * x);
      }
      case Kind::Affine: {
        const S kappa = from_rational<S>(Rational(1) - a_ - b_);
        return from_rational<S>(b_) + kappa * x;  // phi(x) = mu2 + kappa x
      }
    }
    throw ConfigError("unreachable pgf kind");
  }

  std::string describe() const {
    switch (kind_) {
      case Kind::Poisson: return "poisson(theta=" + format_rational(a_) + ")";
      case Kind::ShiftedPoisson: return "shifted-poisson(theta=" + format_rational(a_) + ")";
      case Kind::Geometric: return "geometric(pi=" + format_rational(a_) + ")";
      case Kind::ShiftedGeometric: return "shifted-geometric(pi=" + format_rational(a_) + ")";
      case Kind::Affine:
        return "affine(mu1=" + format_rational(a_) + ", mu2=" + format_rational(b_) + ")";
    }
    return "?";
  }

 private:
  Pgf(Kind kind, Rational a, Rational b) : kind_(kind), a_(std::move(a)), b_(std::move(b)) {}
  static void require(bool ok, const char* msg) {
    if (!ok) throw ConfigError(msg);
  }

  Kind kind_;
  Rational a_, b_;
};

// ── bias mechanisms ──────────────────────────────────────────────────────────

class BiasMechanism {
 public:
  enum class Kind {
    Neutral,
    Selection,
    Dominance,
    Quadratic,
    Mutation,
    Power,
    Reciprocal,
    MutationalCompose,
    Joint,
    Compound
  };

  static BiasMechanism neutral() { return make(Kind::Neutral, {}, {}, {}, nullptr, nullptr); }

  static BiasMechanism selection(const Rational& s) {
    if (!(s > -1)) throw ConfigError("selection needs s > -1");
    return make(Kind::Selection, s, {}, {}, nullptr, nullptr);
  }

  static BiasMechanism dominance(const Rational& s, const Rational& h) {
    if (!(s > -1)) throw ConfigError("dominance needs s > -1");
    if (!(s * h > -1)) throw ConfigError("dominance needs s*h > -1");
    return make(Kind::Dominance, s, h, {}, nullptr, nullptr);
  }

  static BiasMechanism quadratic(const Rational& c) {
    if (c < -1 || c > 1) throw ConfigError("quadratic needs c in [-1,1]");
    return make(Kind::Quadratic, c, {}, {}, nullptr, nullptr);
  }

  static BiasMechanism mutation(const Rational& mu1, const Rational& mu2) {
    if (mu1 < 0 || mu1 > 1 || mu2 < 0 || mu2 > 1)
      throw ConfigError("mutation needs mu1, mu2 in [0,1]");
    if (mu1 > 1 - mu2)
      throw ConfigError("mutation needs mu1 <= 1 - mu2 (kappa >= 0)");
    return make(Kind::Mutation, mu1, mu2, {}, nullptr, nullptr);
  }

  static BiasMechanism power(const Rational& gamma) {
    if (!(gamma > 0)) throw ConfigError("power needs gamma > 0");
    return make(Kind::Power, gamma, {}, {}, nullptr, nullptr);
  }

  Kind kind() const { return node_->kind; }
  const Rational& param_a() const { return node_->a; }
  const Rational& param_b() const { return node_->b; }
  const Pgf& pgf() const {
    if (!node_->pgf) throw ConfigError("mechanism carries no pgf");
    return *node_->pgf;
  }
  BiasMechanism left_child() const {
    if (!node_->left) throw ConfigError("mechanism has no inner expression");
    return BiasMechanism(node_->left);
  }
  BiasMechanism right_child() const {
    if (!node_->right) throw ConfigError("mechanism has no right expression");
    return BiasMechanism(node_->right);
  }

  /// True when p is a rational function with rational parameters, so exact
  /// mode applies (power with integer exponent counts; all mechanisms
  /// through a poisson-type pgf do not).
  bool rational_capable() const { return rational_capable(*node_); }

  /// p(x). Exact in rational mode whenever rational_capable().
  template <class S>
  S evaluate(const S& x) const {
    return eval(*node_, x);
  }

  /// q(x) = 1 - p(x).
  template <class S>
  S q(const S& x) const {
    return S(1) - eval(*node_, x);
  }

  std::string describe() const { return describe(*node_); }

  /// Structural closure rules from the mechanism catalog; Unknown means
  /// "undecided here, run the grid check".
  Verdict symbolic_admissibility() const { return admissible(*node_); }

  friend BiasMechanism reciprocal(const BiasMechanism& m);
  friend BiasMechanism joint(const BiasMechanism& a, const BiasMechanism& b);
  friend BiasMechanism mutational_compose(const Rational& mu1, const Rational& mu2,
                                          const BiasMechanism& inner);
  friend BiasMechanism compound(const Pgf& pgf, const BiasMechanism& inner);

 private:
  struct Node {
    Kind kind;
    Rational a, b;
    std::optional<Pgf> pgf;
    std::shared_ptr<const Node> left, right;
  };

  explicit BiasMechanism(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

  static BiasMechanism make(Kind kind, Rational a, Rational b, std::optional<Pgf> pgf,
                            std::shared_ptr<const Node> left, std::shared_ptr<const Node> right) {
    auto node = std::make_shared<Node>();
    node->kind = kind;
    node->a = std::move(a);
    node->b = std::move(b);
    node->pgf = std::move(pgf);
    node->left = std::move(left);
    node->right = std::move(right);
    BiasMechanism m(node);
    m.validate_shape();
    return m;
  }

  static bool rational_capable(const Node& nd) {
    switch (nd.kind) {
      case Kind::Neutral:
      case Kind::Selection:
      case Kind::Dominance:
      case Kind::Quadratic:
      case Kind::Mutation:
        return true;
      case Kind::Power:
        return denominator(nd.a) == 1;
      case Kind::Reciprocal:
        return rational_capable(*nd.left);
      case Kind::MutationalCompose:
        return rational_capable(*nd.left);
      case Kind::Joint:
        return rational_capable(*nd.left) && rational_capable(*nd.right);
      case Kind::Compound:
        return nd.pgf->rational_capable() && rational_capable(*nd.left);
    }
    return false;
  }

  template <class S>
  static S eval(const Node& nd, const S& x) {
    switch (nd.kind) {
      case Kind::Neutral:
        return x;
      case Kind::Selection: {
        const S s = from_rational<S>(nd.a);
        return (S(1) + s) * x / (S(1) + s * x);
      }
      case Kind::Dominance: {
        const S s = from_rational<S>(nd.a), h = from_rational<S>(nd.b);
        const S xx = x * x, het = x * (S(1) - x);
        return ((S(1) + s) * xx + (S(1) + s * h) * het) / (S(1) + s * xx + S(2) * s * h * het);
      }
      case Kind::Quadratic: {
        const S c = from_rational<S>(nd.a);
        return x * (S(1) + c - c * x);
      }
      case Kind::Mutation: {
        const S m1 = from_rational<S>(nd.a), m2 = from_rational<S>(nd.b);
        return (S(1) - m2) * x + m1 * (S(1) - x);
      }
      case Kind::Power: {
        if constexpr (scalar_traits<S>::is_exact) {
          if (denominator(nd.a) != 1)
            throw ConfigError("power(gamma=" + format_rational(nd.a) +
                              ") has no exact rational evaluation");
          S r(1);
          BigInt g = numerator(nd.a);
          for (BigInt e = 0; e < g; ++e) r *= x;
          return r;
        } else {
          if (x == S(0)) return S(0);
          return pow(x, from_rational<S>(nd.a));
        }
      }
      case Kind::Reciprocal:
        return S(1) - eval(*nd.left, S(1) - x);
      case Kind::MutationalCompose: {
        // p_M(p(x)) with p_M the affine mutation map: mu1 + kappa * p(x)
        const S kappa = from_rational<S>(Rational(1) - nd.a - nd.b);
        return from_rational<S>(nd.a) + kappa * eval(*nd.left, x);
      }
      case Kind::Joint: {
        const S p1 = eval(*nd.left, x), p2 = eval(*nd.right, x);
        return p1 + p2 - p1 * p2;
      }
      case Kind::Compound: {
        const S qq = S(1) - eval(*nd.left, x);
        return S(1) - (*nd.pgf)(qq);
      }
    }
    throw ConfigError("unreachable mechanism kind");
  }

  static Verdict admissible(const Node& nd) {
    switch (nd.kind) {
      case Kind::Neutral:
        return Verdict::Admissible;
      case Kind::Selection:
        return nd.a >= 0 ? Verdict::Admissible : Verdict::NotAdmissible;
      case Kind::Dominance: {
        if (nd.a == 0) return Verdict::Admissible;            // reduces to neutral
        if (nd.b == Rational(1, 2)) return Verdict::Unknown;  // genic balancing boundary
        return (nd.a > 0 && nd.b > 0 && nd.b < Rational(1, 2)) ? Verdict::Admissible
                                                               : Verdict::NotAdmissible;
      }
      case Kind::Quadratic:
        return (nd.a >= 0 && nd.a <= 1) ? Verdict::Admissible : Verdict::NotAdmissible;
      case Kind::Mutation:
        // kappa >= 0 is already a construction invariant
        return Verdict::Admissible;
      case Kind::Power:
        // gamma = 1 is the neutral mechanism; included despite the
        // catalog's open-interval statement
        return (nd.a <= 1) ? Verdict::Admissible : Verdict::NotAdmissible;
      case Kind::MutationalCompose:
        return admissible(*nd.left) == Verdict::Admissible ? Verdict::Admissible
                                                           : Verdict::Unknown;
      case Kind::Joint:
        return (admissible(*nd.left) == Verdict::Admissible &&
                admissible(*nd.right) == Verdict::Admissible)
                   ? Verdict::Admissible
                   : Verdict::Unknown;
      case Kind::Compound:
        return admissible(*nd.left) == Verdict::Admissible ? Verdict::Admissible
                                                           : Verdict::Unknown;
      case Kind::Reciprocal:
        return Verdict::Unknown;
    }
    return Verdict::Unknown;
  }

  static std::string describe(const Node& nd) {
    switch (nd.kind) {
      case Kind::Neutral: return "neutral";
      case Kind::Selection: return "selection(s=" + format_rational(nd.a) + ")";
      case Kind::Dominance:
        return "dominance(s=" + format_rational(nd.a) + ", h=" + format_rational(nd.b) + ")";
      case Kind::Quadratic: return "quadratic(c=" + format_rational(nd.a) + ")";
      case Kind::Mutation:
        return "mutation(mu1=" + format_rational(nd.a) + ", mu2=" + format_rational(nd.b) + ")";
      case Kind::Power: return "power(gamma=" + format_rational(nd.a) + ")";
      case Kind::Reciprocal: return "reciprocal(" + describe(*nd.left) + ")";
      case Kind::MutationalCompose:
        return "mutational-compose(mu1=" + format_rational(nd.a) +
               ", mu2=" + format_rational(nd.b) + ", " + describe(*nd.left) + ")";
      case Kind::Joint: return "joint(" + describe(*nd.left) + ", " + describe(*nd.right) + ")";
      case Kind::Compound:
        return "compound(" + nd.pgf->describe() + ", " + describe(*nd.left) + ")";
    }
    return "?";
  }

  void validate_shape() const;

  std::shared_ptr<const Node> node_;
};

// ── mechanism algebra ────────────────────────────────────────────────────────

/// The complemented-chain mechanism 1 - p(1-x). Catalog leaves rewrite to
/// catalog leaves (selection and dominance per the reciprocal-parameter
/// formulas, mutation swaps its rates, quadratic flips curvature); anything
/// else wraps structurally, and reciprocal of reciprocal unwraps.
inline BiasMechanism reciprocal(const BiasMechanism& m) {
  using Kind = BiasMechanism::Kind;
  switch (m.kind()) {
    case Kind::Neutral:
      return m;
    case Kind::Selection: {
      const Rational& s = m.param_a();
      return BiasMechanism::selection(-s / (1 + s));
    }
    case Kind::Dominance: {
      const Rational& s = m.param_a();
      const Rational& h = m.param_b();
      return BiasMechanism::dominance(-s / (1 + s), 1 - h);
    }
    case Kind::Quadratic:
      return BiasMechanism::quadratic(-m.param_a());
    case Kind::Mutation:
      return BiasMechanism::mutation(m.param_b(), m.param_a());
    case Kind::Power:
      if (m.param_a() == 1) return BiasMechanism::neutral();
      break;
    case Kind::Reciprocal:
      return m.left_child();  // involution unwraps structurally
    default:
      break;
  }
  return BiasMechanism::make(BiasMechanism::Kind::Reciprocal, {}, {}, {}, m.node_, nullptr);
}

inline BiasMechanism joint(const BiasMechanism& a, const BiasMechanism& b) {
  return BiasMechanism::make(BiasMechanism::Kind::Joint, {}, {}, {}, a.node_, b.node_);
}

inline BiasMechanism mutational_compose(const Rational& mu1, const Rational& mu2,
                                        const BiasMechanism& inner) {
  if (mu1 < 0 || mu1 > 1 || mu2 < 0 || mu2 > 1)
    throw ConfigError("mutational compose needs mu1, mu2 in [0,1]");
  if (mu1 > 1 - mu2) throw ConfigError("mutational compose needs kappa >= 0");
  return BiasMechanism::make(BiasMechanism::Kind::MutationalCompose, mu1, mu2, {}, inner.node_,
                             nullptr);
}

inline BiasMechanism compound(const Pgf& pgf, const BiasMechanism& inner) {
  if (pgf.kind() == Pgf::Kind::Affine)
    return mutational_compose(pgf.a(), pgf.b(), inner);  // same mechanism, canonical node
  return BiasMechanism::make(BiasMechanism::Kind::Compound, {}, {}, pgf, inner.node_, nullptr);
}

// ── construction-time grid validation ────────────────────────────────────────

namespace detail {

/// Boundary and monotonicity screen over sampled p values. tol absorbs
/// rounding in float mode; exact mode passes tol = 0.
template <class S>
void validate_bias_grid(const std::vector<S>& p, const S& tol, const std::string& what) {
  if (p.front() < -tol || p.front() > S(1) + tol || p.back() < -tol || p.back() > S(1) + tol)
    throw ConfigError(what + ": p must map [0,1] into [0,1]");
  if (p.back() < p.front() - tol) throw ConfigError(what + ": p(1) < p(0)");
  for (size_t k = 0; k + 1 < p.size(); ++k)
    if (p[k + 1] < p[k] - tol)
      throw ConfigError(what + ": p is not non-decreasing (grid point " + std::to_string(k) + ")");
}

}  // namespace detail

inline constexpr int kValidationGridPoints = 256;

inline void BiasMechanism::validate_shape() const {
  const int g = kValidationGridPoints;
  if (rational_capable()) {
    std::vector<Rational> p(g + 1);
    for (int k = 0; k <= g; ++k) p[k] = eval(*node_, Rational(k, g));
    detail::validate_bias_grid<Rational>(p, Rational(0), describe(*node_));
  } else {
    std::vector<Float128> p(g + 1);
    for (int k = 0; k <= g; ++k) p[k] = eval(*node_, Float128(k) / Float128(g));
    const Float128 tol = ldexp(Float128(1), -96);
    detail::validate_bias_grid<Float128>(p, tol, describe(*node_));
  }
}

// ── finite-resolution admissibility check ────────────────────────────────────

template <class S>
struct CmCheckResult {
  bool pass = true;
  int violation_order = -1;  // first j with (-1)^j grad^j q(n) < -tol
  S violation_value{};
  std::vector<S> signed_differences;  // (-1)^j grad^j q(m/n) at m = n, j = 0..n
  S table_magnitude{};
};

/// Backward-difference admissibility test of q at resolution n: verifies
/// (-1)^j grad^j q(m/n)|_{m=n} >= -tol for j = 0..n. Passing is necessary
/// for complete monotonicity but not sufficient (the grid sees only n+1
/// samples); the dual-matrix builder treats a pass as "admissible at
/// resolution n".
template <class S>
CmCheckResult<S> grid_cm_check(const BiasMechanism& mech, int n,
                               std::optional<S> tolerance = std::nullopt) {
  if (n < 1) throw ConfigError("grid_cm_check: population size must be >= 1");
  std::vector<S> values(n + 1);
  for (int m = 0; m <= n; ++m) {
    S x;
    if constexpr (scalar_traits<S>::is_exact)
      x = from_rational<S>(Rational(m, n));
    else
      x = S(m) / S(n);
    values[m] = mech.q(x);
  }
  kernels::DifferenceTable<S> table(std::move(values));

  CmCheckResult<S> result;
  result.table_magnitude = table.magnitude();
  S tol;
  if (tolerance)
    tol = *tolerance;
  else if constexpr (scalar_traits<S>::is_exact)
    tol = S(0);
  else
    tol = result.table_magnitude * ldexp(S(1), -60);

  result.signed_differences.resize(n + 1);
  for (int j = 0; j <= n; ++j) {
    S signed_diff = (j % 2 == 0) ? table.endpoint(j) : S(-table.endpoint(j));
    result.signed_differences[j] = signed_diff;
    if (result.pass && signed_diff < -tol) {
      result.pass = false;
      result.violation_order = j;
      result.violation_value = signed_diff;
    }
  }
  return result;
}

}  // namespace wfdual::bias
