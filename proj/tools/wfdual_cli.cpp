// wfdual — batch front end for the duality toolkit.
//
// Subcommands: check, dual, limits, simulate, coalescent. Each run takes a
// single JSON config (a previous run's manifest.json also works: its
// "config" block is re-used), writes every artifact under one run
// directory, and finishes with a manifest that makes the run repeatable.
//
// Exit codes: 0 success, 1 admissibility failure (check), 2 construction
// or config failure, 3 numerical failure.

#include "wfdual/analysis.hpp"
#include "wfdual/config.hpp"
#include "wfdual/montecarlo.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace wfdual;
using nlohmann::json;

namespace {

struct RunContext {
  std::string command;
  fs::path out_dir;
  json config;
  Mode mode = Mode::RationalExact;
  int precision_bits = 128;
  std::uint64_t seed = 0;
  json manifest;
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

  void add_output(const std::string& name) { manifest["outputs"].push_back(name); }

  std::ofstream open_output(const std::string& name) {
    add_output(name);
    std::ofstream os(out_dir / name);
    if (!os) throw ConfigError("cannot open output file " + (out_dir / name).string());
    return os;
  }

  void finish() {
    manifest["wall_ms"] = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - started)
                              .count();
    std::ofstream os(out_dir / "manifest.json");
    os << manifest.dump(2) << "\n";
  }
};

json load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("parse error in " + path + ": " + e.what());
  }
  if (j.contains("config")) return j.at("config");  // manifest re-run
  return j;
}

int default_precision_bits() {
  if (const char* env = std::getenv("WFDUAL_PRECISION_BITS")) {
    try {
      return std::stoi(env);
    } catch (const std::exception&) {
      throw ConfigError("WFDUAL_PRECISION_BITS is not an integer");
    }
  }
  return 128;
}

/// Dispatch over the supported float widths, rounding the request up.
template <class F>
int with_precision(int bits, F&& fn) {
  if (bits <= 128) return fn(Float128{});
  if (bits <= 256) return fn(Float256{});
  if (bits <= 512) return fn(Float512{});
  if (bits <= 1024) return fn(Float1024{});
  if (bits <= 2048) return fn(Float2048{});
  throw ConfigError("precision above 2048 bits is not built in");
}

/// Significand width that keeps the Phi^{-1} alternating sums accurate:
/// the amplification is at most C(n,i) 2^i <= 3^n, i.e. ~1.585 n bits.
int bridge_precision_bits(int n, int requested) {
  const int needed = 64 + static_cast<int>(1.585 * n) + 1;
  return std::max(requested, needed);
}

RunContext make_context(const std::string& command, const std::string& config_path,
                        const std::string& out, const std::string& mode_override,
                        int precision_override, long seed_override) {
  RunContext ctx;
  ctx.command = command;
  ctx.config = load_config(config_path);
  ctx.out_dir = out.empty() ? fs::path("wfdual-" + command) : fs::path(out);
  fs::create_directories(ctx.out_dir);

  std::string mode = ctx.config.value("mode", "rational");
  if (!mode_override.empty()) mode = mode_override;
  if (mode == "rational")
    ctx.mode = Mode::RationalExact;
  else if (mode == "float")
    ctx.mode = Mode::HighPrecisionFloat;
  else
    throw ConfigError("mode must be 'rational' or 'float', got '" + mode + "'");

  ctx.precision_bits = ctx.config.value("precision_bits", default_precision_bits());
  if (precision_override > 0) ctx.precision_bits = precision_override;

  if (ctx.config.contains("sim") && ctx.config["sim"].contains("seed"))
    ctx.seed = ctx.config["sim"]["seed"].get<std::uint64_t>();
  if (seed_override >= 0) {
    ctx.seed = static_cast<std::uint64_t>(seed_override);
    if (ctx.config.contains("sim")) ctx.config["sim"]["seed"] = ctx.seed;
  }

  ctx.manifest["command"] = command;
  ctx.manifest["version"] = kVersion;
  ctx.manifest["config"] = ctx.config;
  ctx.manifest["mode"] = mode;
  ctx.manifest["precision_bits"] = ctx.precision_bits;
  ctx.manifest["seed"] = ctx.seed;
  ctx.manifest["outputs"] = json::array();
  return ctx;
}

std::vector<int> int_list(const json& j, const std::string& key) {
  if (!j.contains(key)) throw ConfigError("config needs '" + key + "'");
  return j.at(key).get<std::vector<int>>();
}

// ── check ───────────────────────────────────────────────────────────────────

template <class S>
int run_check_mode(RunContext& ctx, const bias::BiasMechanism& mech,
                   const std::vector<int>& n_list) {
  auto report = ctx.open_output("check.csv");
  report << "n,symbolic,grid,violation_order,violation_value\n";
  bool all_pass = true;
  const auto verdict = mech.symbolic_admissibility();
  for (int n : n_list) {
    const auto grid = bias::grid_cm_check<S>(mech, n);
    report << n << ',' << bias::to_string(verdict) << ',' << (grid.pass ? "pass" : "fail") << ',';
    if (!grid.pass) {
      report << grid.violation_order << ','
             << scalar_traits<S>::to_string(grid.violation_value) << '\n';
      std::cout << "n=" << n << ": FAIL at difference order j=" << grid.violation_order
                << " value " << scalar_traits<S>::to_string(grid.violation_value) << "\n";
      all_pass = false;
    } else {
      report << ",\n";
      std::cout << "n=" << n << ": pass\n";
    }
  }
  if (verdict == bias::Verdict::NotAdmissible) all_pass = false;
  std::cout << mech.describe() << ": symbolic verdict " << bias::to_string(verdict)
            << (all_pass ? " | all grid checks pass" : " | admissibility FAILED") << "\n";
  ctx.manifest["verdict"] = bias::to_string(verdict);
  ctx.manifest["all_pass"] = all_pass;
  ctx.finish();
  return all_pass ? 0 : 1;
}

int run_check(RunContext& ctx) {
  const auto mech = config::mechanism_from_json(ctx.config.at("mechanism"));
  const auto n_list = int_list(ctx.config, "n_list");
  if (ctx.mode == Mode::RationalExact && mech.rational_capable())
    return run_check_mode<Rational>(ctx, mech, n_list);
  return with_precision(ctx.precision_bits, [&](auto tag) {
    using S = decltype(tag);
    return run_check_mode<S>(ctx, mech, n_list);
  });
}

// ── dual ────────────────────────────────────────────────────────────────────

template <class S>
int run_dual_mode(RunContext& ctx, const bias::BiasMechanism& mech, int n) {
  const auto forward = chains::forward_matrix<S>(mech, n);
  const auto dual = chains::dual_matrix<S>(mech, n);  // throws CmViolation if inadmissible
  const auto kernel = kernels::build_kernel<S>(n, kernels::KernelVariant::Phi2);
  const auto report = chains::verify_duality<S>(forward, dual, kernel);

  config::matrix_to_csv<S>(ctx.open_output("forward.csv"), forward.entries);
  config::matrix_to_csv<S>(ctx.open_output("dual.csv"), dual.entries);
  ctx.manifest["forward"] = config::transition_manifest(forward);
  ctx.manifest["dual"] = config::transition_manifest(dual);
  ctx.manifest["duality_residual"] = scalar_traits<S>::to_string(report.residual);
  ctx.manifest["duality_exact_zero"] = report.exact;
  std::cout << "duality residual: " << scalar_traits<S>::to_string(report.residual) << "\n";
  ctx.finish();
  return 0;
}

int run_dual(RunContext& ctx) {
  const auto mech = config::mechanism_from_json(ctx.config.at("mechanism"));
  const int n = ctx.config.at("n").get<int>();
  if (ctx.mode == Mode::RationalExact && mech.rational_capable())
    return run_dual_mode<Rational>(ctx, mech, n);
  return with_precision(ctx.precision_bits, [&](auto tag) {
    using S = decltype(tag);
    return run_dual_mode<S>(ctx, mech, n);
  });
}

// ── limits ──────────────────────────────────────────────────────────────────

template <class S>
S growth_rate_at_zero(const bias::BiasMechanism& mech) {
  // p(0) = 0 here; lambda = p'(0) by a one-sided difference at h = 2^-40
  const S h = ldexp(S(1), -40);
  return mech.evaluate(h) / h;
}

template <class S>
int run_limits_mode(RunContext& ctx, const bias::BiasMechanism& mech,
                    const std::vector<int>& ladder, const std::vector<int>& m_list) {
  const S p0 = mech.evaluate(S(0));
  const S p1 = mech.evaluate(S(1));
  const bool zero_left = (p0 == S(0));
  const bool one_right = (p1 == S(1));

  if (!zero_left && !one_right) {
    // Case 1: recurrent chain with stationary law
    auto table = ctx.open_output("limits.csv");
    table << "n,mean,variance,bridge_residual\n";
    json residuals = json::array();
    for (int n : ladder) {
      const auto forward = chains::forward_matrix<S>(mech, n);
      const auto pi = analysis::stationary<S>(forward);
      const auto dual = chains::dual_matrix<S>(mech, n);
      const auto rho = analysis::absorption<S>(dual, {0});
      const auto kernel = kernels::build_kernel<S>(n, kernels::KernelVariant::Phi2);
      const auto bridged = analysis::duality_bridge<S>(pi.probabilities, kernel);
      S bridge_residual(0);
      for (int k = 0; k <= n; ++k)
        bridge_residual = std::max(bridge_residual,
                                   abs_value<S>(bridged.values[k] - rho.values[k]));
      const auto m = analysis::moments_from_law<S>(pi.probabilities);
      table << n << ',' << scalar_traits<S>::to_string(m.mean) << ','
            << scalar_traits<S>::to_string(m.variance) << ','
            << scalar_traits<S>::to_string(bridge_residual) << '\n';
      residuals.push_back(scalar_traits<S>::to_string(bridge_residual));
      std::cout << "n=" << n << " mean=" << scalar_traits<S>::to_string(m.mean)
                << " bridge residual=" << scalar_traits<S>::to_string(bridge_residual) << "\n";
    }
    ctx.manifest["case"] = "stationary";
    ctx.manifest["bridge_residuals"] = residuals;
    if (mech.kind() == bias::BiasMechanism::Kind::Mutation) {
      auto rows = analysis::mutation_moment_diagnostics<S>(mech.param_a(), mech.param_b(), ladder);
      auto diag = ctx.open_output("moments.csv");
      diag << "n,mean,mean_exact,variance,variance_main_term,variance_asymptotic\n";
      for (const auto& r : rows)
        diag << r.n << ',' << scalar_traits<S>::to_string(r.mean) << ','
             << scalar_traits<S>::to_string(r.mean_exact) << ','
             << scalar_traits<S>::to_string(r.variance) << ','
             << scalar_traits<S>::to_string(r.variance_main_term) << ','
             << scalar_traits<S>::to_string(r.variance_asymptotic) << '\n';
    }
    ctx.finish();
    return 0;
  }

  if (zero_left && one_right) {
    // Case 2: absorbing boundaries, A_inf law through the bridge
    ctx.manifest["case"] = "absorbing";
    auto table = ctx.open_output("limits.csv");
    table << "n,lambda,rho,mean_Ainf,mean_over_n,gw_mean_target,variance_over_n,"
             "gw_variance_target\n";
    auto gw_table = ctx.open_output("gw.csv");
    gw_table << "n,m,rho_inf_m,n_gap,correction\n";
    const Float128 lambda = growth_rate_at_zero<Float128>(mech);
    const auto gw = analysis::gw_fixed_point<Float128>(lambda);
    json used_bits = json::array();
    for (int n : ladder) {
      std::vector<Float128> rho_f, pi_f;
      if constexpr (scalar_traits<S>::is_exact) {
        const auto forward = chains::forward_matrix<S>(mech, n);
        const auto rho = analysis::absorption<S>(forward, {0, n});
        const auto kernel = kernels::build_kernel<S>(n, kernels::KernelVariant::Phi2);
        const auto pi = analysis::duality_bridge_inverse<S>(rho.values, kernel);
        for (const S& x : rho.values) rho_f.push_back(from_rational<Float128>(x));
        for (const S& x : pi) pi_f.push_back(from_rational<Float128>(x));
        used_bits.push_back("exact");
      } else {
        const int bits = bridge_precision_bits(n, ctx.precision_bits);
        used_bits.push_back(bits);
        with_precision(bits, [&](auto tag) {
          using T = decltype(tag);
          const auto forward = chains::forward_matrix<T>(mech, n);
          const auto rho = analysis::absorption<T>(forward, {0, n});
          const auto kernel = kernels::build_kernel<T>(n, kernels::KernelVariant::Phi2);
          const auto pi = analysis::duality_bridge_inverse<T>(rho.values, kernel);
          for (const T& x : rho.values) rho_f.push_back(Float128(x));
          for (const T& x : pi) pi_f.push_back(Float128(x));
          return 0;
        });
      }
      const auto moments = analysis::moments_from_law<Float128>(pi_f);
      using FT = scalar_traits<Float128>;
      table << n << ',' << FT::to_string(lambda) << ',' << FT::to_string(gw.rho) << ','
            << FT::to_string(moments.mean) << ',' << FT::to_string(moments.mean / Float128(n))
            << ',' << FT::to_string(Float128(1) - gw.rho) << ','
            << FT::to_string(moments.variance / Float128(n)) << ','
            << FT::to_string(gw.rho * (Float128(1) - gw.rho) / (Float128(1) + lambda * gw.rho))
            << '\n';
      if (gw.supercritical) {
        for (int m : m_list) {
          Float128 rho_m(1);
          for (int e = 0; e < m; ++e) rho_m *= gw.rho;
          const Float128 gap = Float128(n) * (rho_m - rho_f[m]);
          gw_table << n << ',' << m << ',' << FT::to_string(rho_f[m]) << ','
                   << FT::to_string(gap) << ','
                   << FT::to_string(analysis::gw_correction<Float128>(lambda, gw.rho, m)) << '\n';
        }
      }
      std::cout << "n=" << n << " done\n";
    }
    ctx.manifest["precision_bits_used"] = used_bits;
    ctx.finish();
    return 0;
  }

  // mixed boundary (one-way mutation): stochastic matrix with an absorbing
  // origin; stationary analysis does not apply, run absorption instead
  std::cout << "warning: mixed boundary case p(0)=0, p(1)<1; routing to absorption analysis\n";
  ctx.manifest["case"] = "mixed-boundary-absorption";
  auto table = ctx.open_output("limits.csv");
  table << "n,state,hit0_probability\n";
  for (int n : ladder) {
    const auto forward = chains::forward_matrix<S>(mech, n);
    const auto rho = analysis::absorption<S>(forward, {0});
    for (int m = 0; m <= n; ++m)
      table << n << ',' << m << ',' << scalar_traits<S>::to_string(rho.values[m]) << '\n';
  }
  ctx.finish();
  return 0;
}

int run_limits(RunContext& ctx) {
  const auto mech = config::mechanism_from_json(ctx.config.at("mechanism"));
  const auto ladder = int_list(ctx.config, "n_ladder");
  std::vector<int> m_list{1, 2, 3};
  if (ctx.config.contains("m_list")) m_list = int_list(ctx.config, "m_list");
  if (ctx.mode == Mode::RationalExact && mech.rational_capable())
    return run_limits_mode<Rational>(ctx, mech, ladder, m_list);
  return with_precision(ctx.precision_bits, [&](auto tag) {
    using S = decltype(tag);
    return run_limits_mode<S>(ctx, mech, ladder, m_list);
  });
}

// ── simulate ────────────────────────────────────────────────────────────────

int run_simulate(RunContext& ctx) {
  const auto mech = config::mechanism_from_json(ctx.config.at("mechanism"));
  const json& sim = ctx.config.at("sim");
  const int n = sim.at("n").get<int>();
  const int horizon = sim.value("horizon", 1);
  const long replicates = sim.value("replicates", 100000L);
  const std::uint64_t seed = sim.value("seed", 0ULL);
  const int start_forward = sim.value("start_forward", n / 2);
  const int start_backward = sim.value("start_backward", n / 2);
  const std::string sampler = sim.value("sampler", "binomial");

  using S = Float128;
  mc::SimConfig cfg;
  cfg.n = n;
  cfg.horizon = horizon;
  cfg.replicates = replicates;
  cfg.seed = seed;
  cfg.start = start_forward;
  cfg.sampler =
      sampler == "multinomial" ? mc::ForwardSampler::Multinomial : mc::ForwardSampler::Binomial;

  const auto ftrace = mc::simulate_forward<S>(mech, cfg);
  {
    auto os = ctx.open_output("trace_forward.csv");
    os << "replicate,terminal\n";
    for (long i = 0; i < replicates; ++i) os << i << ',' << ftrace.terminal[i] << '\n';
  }

  const auto dual = chains::dual_matrix<S>(mech, n);
  mc::SimConfig bcfg = cfg;
  bcfg.start = start_backward;
  const auto btrace = mc::simulate_backward<S>(dual, bcfg);
  {
    auto os = ctx.open_output("trace_backward.csv");
    os << "replicate,terminal\n";
    for (long i = 0; i < replicates; ++i) os << i << ',' << btrace.terminal[i] << '\n';
  }
  ctx.manifest["coffin_hits"] = btrace.coffin_hits;

  const auto est = mc::duality_estimator<S>(mech, n, start_forward, start_backward, horizon,
                                            replicates, seed);
  json est_json;
  est_json["forward_mean"] = est.forward.mean;
  est_json["forward_se"] = est.forward.std_error;
  est_json["backward_mean"] = est.backward.mean;
  est_json["backward_se"] = est.backward.std_error;
  est_json["difference"] = est.difference;
  est_json["combined_se"] = est.combined_se;
  est_json["sigmas"] = est.sigmas;
  est_json["replicates"] = est.replicates;
  {
    auto os = ctx.open_output("estimator.json");
    os << est_json.dump(2) << "\n";
  }
  ctx.manifest["estimator"] = est_json;

  // one-step empirical law vs the exact forward row (the chi-square guard)
  const auto forward = chains::forward_matrix<S>(mech, n);
  mc::SimConfig one = cfg;
  one.horizon = 1;
  const auto otrace = mc::simulate_forward<S>(mech, one);
  std::vector<long> counts(n + 1, 0);
  for (int t : otrace.terminal) ++counts[t];
  std::vector<double> expected(n + 1);
  for (int j = 0; j <= n; ++j)
    expected[j] = scalar_traits<S>::to_double(forward.entries(start_forward, j));
  const auto chi = mc::chi_square_test(counts, expected, replicates);
  json chi_json;
  chi_json["statistic"] = chi.statistic;
  chi_json["dof"] = chi.dof;
  chi_json["p_value"] = chi.p_value;
  ctx.manifest["one_step_chi_square"] = chi_json;

  std::cout << "duality estimator: |diff| = " << est.sigmas << " combined standard errors\n"
            << "one-step chi-square p = " << chi.p_value << "\n";
  ctx.finish();
  return 0;
}

// ── coalescent ──────────────────────────────────────────────────────────────

int run_coalescent(RunContext& ctx) {
  const auto law = config::law_from_json(ctx.config.at("law"));
  const int n = ctx.config.at("n").get<int>();
  const int b_max = ctx.config.value("b_max", std::min(n, 8));
  if (b_max > exchangeable::kMaxSampleSize)
    throw ConfigError("b_max is capped at " + std::to_string(exchangeable::kMaxSampleSize));

  const auto P = exchangeable::ancestral_count_matrix<Rational>(law, n, b_max);
  config::matrix_to_csv<Rational>(ctx.open_output("ancestral.csv"), P);

  Matrix<Rational> Q(b_max + 1, b_max + 1);
  for (int b = 0; b <= b_max; ++b)
    for (int a = 0; a <= b; ++a)
      Q(b, a) = exchangeable::ancestral_count_inclusion_exclusion<Rational>(law, n, b, a);
  config::matrix_to_csv<Rational>(ctx.open_output("ancestral_inclusion_exclusion.csv"), Q);
  const Rational agreement = max_abs_diff(P, Q);
  ctx.manifest["formula_agreement_residual"] = format_rational(agreement);

  {
    auto os = ctx.open_output("mergers.csv");
    os << "b,a,clusters,probability\n";
    // all partition-shaped patterns (non-increasing cluster sizes)
    for (int b = 2; b <= b_max; ++b) {
      std::vector<int> parts;
      std::function<void(int, int)> rec = [&](int remaining, int cap) {
        if (remaining == 0) {
          const auto pattern = exchangeable::MergerPattern::of(parts);
          const auto prob = exchangeable::merger_probability<Rational>(law, n, pattern);
          os << pattern.b << ',' << pattern.a << ',';
          for (size_t i = 0; i < parts.size(); ++i) os << (i ? "|" : "") << parts[i];
          os << ',' << format_rational(prob) << '\n';
          return;
        }
        for (int next = std::min(cap, remaining); next >= 1; --next) {
          parts.push_back(next);
          rec(remaining - next, next);
          parts.pop_back();
        }
      };
      rec(b, b);
    }
  }

  const auto F = exchangeable::law_forward_matrix<Rational>(law, n);
  config::matrix_to_csv<Rational>(ctx.open_output("law_forward.csv"), F);

  std::cout << "ancestral matrix on {0.." << b_max << "} for " << law.describe()
            << "; formula agreement residual " << format_rational(agreement) << "\n";
  ctx.finish();
  return agreement == 0 ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wfdual: non-neutral Wright-Fisher duality toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir, mode_override;
  int precision_override = -1;
  long seed_override = -1;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config (or manifest.json of a previous run)")
        ->required();
    cmd->add_option("--out", out_dir, "output directory (default wfdual-<command>)");
    cmd->add_option("--mode", mode_override, "rational | float");
    cmd->add_option("--precision-bits", precision_override,
                    "float significand bits (also WFDUAL_PRECISION_BITS)");
    cmd->add_option("--seed", seed_override, "override simulation seed");
  };

  auto* check = app.add_subcommand("check", "admissibility verdicts and grid tests");
  auto* dual = app.add_subcommand("dual", "build forward + dual matrices, verify duality");
  auto* limits = app.add_subcommand("limits", "stationary/absorption limit laws over an n-ladder");
  auto* simulate = app.add_subcommand("simulate", "seeded Monte Carlo with duality estimator");
  auto* coalescent = app.add_subcommand("coalescent", "ancestral count matrices and mergers");
  for (auto* cmd : {check, dual, limits, simulate, coalescent}) add_common(cmd);

  CLI11_PARSE(app, argc, argv);

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    RunContext ctx = make_context(command, config_path, out_dir, mode_override,
                                  precision_override, seed_override);
    if (command == "check") return run_check(ctx);
    if (command == "dual") return run_dual(ctx);
    if (command == "limits") return run_limits(ctx);
    if (command == "simulate") return run_simulate(ctx);
    if (command == "coalescent") return run_coalescent(ctx);
    return 2;
  } catch (const CmViolation& e) {
    std::cerr << "inadmissible: " << e.what() << "\n";
    return command == "check" ? 1 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
