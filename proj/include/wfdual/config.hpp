// JSON grammar for mechanism / pgf / reproduction-law literals, plus the
// CSV and JSON matrix serializers shared by the CLI and the tests.
//
// All scalar parameters travel as strings: "p/q" exact rationals or
// decimal literals (themselves exact: "0.37" means 37/100). Round-trips of
// rational parameters are bit-exact.
#pragma once

#include "wfdual/bias.hpp"
#include "wfdual/chains.hpp"
#include "wfdual/exchangeable.hpp"

#include <json.hpp>

#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace wfdual::config {

using nlohmann::json;

inline Rational rational_field(const json& j, const std::string& key) {
  if (!j.contains(key))
    throw ConfigError("missing scalar field '" + key + "' in " + j.dump());
  const json& v = j.at(key);
  if (v.is_string()) return parse_rational(v.get<std::string>());
  if (v.is_number_integer()) return Rational(v.get<long long>());
  throw ConfigError("scalar field '" + key + "' must be a string literal (\"p/q\" or decimal)");
}

// ── pgf ─────────────────────────────────────────────────────────────────────

inline bias::Pgf pgf_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "poisson") return bias::Pgf::poisson(rational_field(j, "theta"));
  if (kind == "shifted-poisson") return bias::Pgf::shifted_poisson(rational_field(j, "theta"));
  if (kind == "geometric") return bias::Pgf::geometric(rational_field(j, "pi"));
  if (kind == "shifted-geometric") return bias::Pgf::shifted_geometric(rational_field(j, "pi"));
  if (kind == "affine") return bias::Pgf::affine(rational_field(j, "mu1"), rational_field(j, "mu2"));
  throw ConfigError("unknown pgf kind '" + kind + "'");
}

inline json pgf_to_json(const bias::Pgf& p) {
  json j;
  switch (p.kind()) {
    case bias::Pgf::Kind::Poisson:
      j["kind"] = "poisson";
      j["theta"] = format_rational(p.a());
      break;
    case bias::Pgf::Kind::ShiftedPoisson:
      j["kind"] = "shifted-poisson";
      j["theta"] = format_rational(p.a());
      break;
    case bias::Pgf::Kind::Geometric:
      j["kind"] = "geometric";
      j["pi"] = format_rational(p.a());
      break;
    case bias::Pgf::Kind::ShiftedGeometric:
      j["kind"] = "shifted-geometric";
      j["pi"] = format_rational(p.a());
      break;
    case bias::Pgf::Kind::Affine:
      j["kind"] = "affine";
      j["mu1"] = format_rational(p.a());
      j["mu2"] = format_rational(p.b());
      break;
  }
  return j;
}

// ── mechanisms ──────────────────────────────────────────────────────────────

inline bias::BiasMechanism mechanism_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("mechanism literal must be an object: " + j.dump());
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "neutral") return bias::BiasMechanism::neutral();
  if (kind == "selection") return bias::BiasMechanism::selection(rational_field(j, "s"));
  if (kind == "dominance")
    return bias::BiasMechanism::dominance(rational_field(j, "s"), rational_field(j, "h"));
  if (kind == "quadratic") return bias::BiasMechanism::quadratic(rational_field(j, "c"));
  if (kind == "mutation")
    return bias::BiasMechanism::mutation(rational_field(j, "mu1"), rational_field(j, "mu2"));
  if (kind == "power") return bias::BiasMechanism::power(rational_field(j, "gamma"));
  if (kind == "reciprocal") return bias::reciprocal(mechanism_from_json(j.at("inner")));
  if (kind == "mutational-compose")
    return bias::mutational_compose(rational_field(j, "mu1"), rational_field(j, "mu2"),
                                    mechanism_from_json(j.at("inner")));
  if (kind == "joint")
    return bias::joint(mechanism_from_json(j.at("left")), mechanism_from_json(j.at("right")));
  if (kind == "compound")
    return bias::compound(pgf_from_json(j.at("pgf")), mechanism_from_json(j.at("inner")));
  throw ConfigError("unknown mechanism kind '" + kind + "'");
}

inline json mechanism_to_json(const bias::BiasMechanism& m) {
  using Kind = bias::BiasMechanism::Kind;
  json j;
  switch (m.kind()) {
    case Kind::Neutral:
      j["kind"] = "neutral";
      break;
    case Kind::Selection:
      j["kind"] = "selection";
      j["s"] = format_rational(m.param_a());
      break;
    case Kind::Dominance:
      j["kind"] = "dominance";
      j["s"] = format_rational(m.param_a());
      j["h"] = format_rational(m.param_b());
      break;
    case Kind::Quadratic:
      j["kind"] = "quadratic";
      j["c"] = format_rational(m.param_a());
      break;
    case Kind::Mutation:
      j["kind"] = "mutation";
      j["mu1"] = format_rational(m.param_a());
      j["mu2"] = format_rational(m.param_b());
      break;
    case Kind::Power:
      j["kind"] = "power";
      j["gamma"] = format_rational(m.param_a());
      break;
    case Kind::Reciprocal:
      j["kind"] = "reciprocal";
      j["inner"] = mechanism_to_json(m.left_child());
      break;
    case Kind::MutationalCompose:
      j["kind"] = "mutational-compose";
      j["mu1"] = format_rational(m.param_a());
      j["mu2"] = format_rational(m.param_b());
      j["inner"] = mechanism_to_json(m.left_child());
      break;
    case Kind::Joint:
      j["kind"] = "joint";
      j["left"] = mechanism_to_json(m.left_child());
      j["right"] = mechanism_to_json(m.right_child());
      break;
    case Kind::Compound:
      j["kind"] = "compound";
      j["pgf"] = pgf_to_json(m.pgf());
      j["inner"] = mechanism_to_json(m.left_child());
      break;
  }
  return j;
}

// ── reproduction laws ───────────────────────────────────────────────────────

inline exchangeable::ReproductionLaw law_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "wright-fisher") return exchangeable::ReproductionLaw::wright_fisher();
  if (kind == "moran") return exchangeable::ReproductionLaw::moran();
  if (kind == "dirichlet")
    return exchangeable::ReproductionLaw::dirichlet_multinomial(rational_field(j, "theta"));
  throw ConfigError("unknown reproduction law kind '" + kind + "'");
}

inline json law_to_json(const exchangeable::ReproductionLaw& law) {
  json j;
  switch (law.kind()) {
    case exchangeable::ReproductionLaw::Kind::WrightFisher:
      j["kind"] = "wright-fisher";
      break;
    case exchangeable::ReproductionLaw::Kind::Moran:
      j["kind"] = "moran";
      break;
    case exchangeable::ReproductionLaw::Kind::DirichletMultinomial:
      j["kind"] = "dirichlet";
      j["theta"] = format_rational(law.theta());
      break;
  }
  return j;
}

// ── matrix serialization ────────────────────────────────────────────────────

template <class S>
void matrix_to_csv(std::ostream& os, const Matrix<S>& m) {
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      if (j) os << ',';
      os << scalar_traits<S>::to_string(m(i, j));
    }
    os << '\n';
  }
}

template <class S>
void matrix_to_csv(std::ostream&& os, const Matrix<S>& m) {
  matrix_to_csv<S>(os, m);
}

template <class S>
std::string matrix_to_csv(const Matrix<S>& m) {
  std::ostringstream os;
  matrix_to_csv(os, m);
  return os.str();
}

inline Matrix<Rational> matrix_from_csv(std::istream& is) {
  std::vector<std::vector<Rational>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<Rational> row;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) row.push_back(parse_rational(cell));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("empty CSV matrix");
  Matrix<Rational> m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw ConfigError("ragged CSV matrix");
    for (size_t j = 0; j < rows[i].size(); ++j) m(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
  }
  return m;
}

template <class S>
json matrix_to_json(const Matrix<S>& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(scalar_traits<S>::to_string(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <class S>
json vector_to_json(const std::vector<S>& v) {
  json out = json::array();
  for (const S& x : v) out.push_back(scalar_traits<S>::to_string(x));
  return out;
}

/// Manifest block describing a built transition matrix.
template <class S>
json transition_manifest(const chains::TransitionMatrix<S>& m) {
  json j;
  j["n"] = m.n;
  j["direction"] = m.direction == chains::Direction::Forward ? "forward" : "backward";
  j["stochasticity"] =
      m.stochasticity == chains::Stochasticity::Stochastic ? "stochastic" : "sub-stochastic";
  j["provenance"] = m.provenance;
  j["clamped_entries"] = m.clamped_entries;
  if (!m.deficit.empty()) j["deficit"] = vector_to_json(m.deficit);
  return j;
}

}  // namespace wfdual::config
