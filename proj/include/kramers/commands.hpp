#pragma once

// Subcommand back ends for the command-line front door. Each command turns a
// resolved configuration into an io::Table whose summary block is a pure
// function of the rows (see the summarize_* helpers), so re-reading a file and
// re-deriving the summary reproduces it exactly.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kramers/errors.hpp"
#include "kramers/lattice_model.hpp"
#include "kramers/report_io.hpp"
#include "kramers/sampling.hpp"
#include "kramers/spectral_solver.hpp"
#include "kramers/verify.hpp"

namespace kramers::cmd {

enum ExitCode : int { exit_ok = 0, exit_violation = 1, exit_inconclusive = 2 };

struct CommonConfig {
  double mu = 2.0;
  std::vector<double> h_list;
  std::vector<std::size_t> n_list;
  std::optional<double> mass;
  std::uint64_t seed = 0;
  std::string out = "-";
  std::string format = "csv";
};

struct CommandResult {
  io::Table table;
  int exit_code = exit_ok;
  std::vector<std::string> warnings;
};

// ---------------------------------------------------------------------------
// Parsing and output

namespace detail {

inline std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(text);
  while (std::getline(is, cur, ',')) {
    const auto b = cur.find_first_not_of(" \t");
    const auto e = cur.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? "" : cur.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace detail

/// "0.1,0.05" -> {0.1, 0.05}; an empty string is the empty list.
inline std::vector<double> parse_real_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  for (const auto& item : detail::split_commas(text)) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &pos);
    } catch (const std::exception&) {
      pos = std::string::npos;
    }
    if (item.empty() || pos != item.size()) throw ContractError(flag + ": cannot parse '" + item + "' as a number");
    out.push_back(v);
  }
  return out;
}

inline std::vector<std::size_t> parse_size_list(const std::string& text, const std::string& flag) {
  std::vector<std::size_t> out;
  for (double v : parse_real_list(text, flag)) {
    if (!(v >= 1.0) || v != std::floor(v)) throw ContractError(flag + ": expected positive integers");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

inline nlohmann::ordered_json common_json(const std::string& subcommand, const CommonConfig& c) {
  nlohmann::ordered_json j;
  j["subcommand"] = subcommand;
  j["mu"] = c.mu;
  j["h"] = c.h_list;
  j["n"] = c.n_list;
  j["mass"] = c.mass ? nlohmann::ordered_json(*c.mass) : nlohmann::ordered_json(nullptr);
  j["seed"] = c.seed;
  j["out"] = c.out;
  j["format"] = c.format;
  return j;
}

inline void write_table(const io::Table& t, const CommonConfig& c) {
  if (c.format != "csv" && c.format != "json") throw ContractError("--format must be csv or json");
  auto emit = [&](std::ostream& os) {
    if (c.format == "csv") io::write_csv(os, t);
    else io::write_json(os, t);
  };
  if (c.out.empty() || c.out == "-") {
    emit(std::cout);
    return;
  }
  std::ofstream os(c.out);
  if (!os) throw ContractError("--out: cannot open " + c.out);
  emit(os);
}

namespace detail {

inline nlohmann::ordered_json json_number(double v) { return io::finite_or_string(v); }

}  // namespace detail

// ---------------------------------------------------------------------------
// prefactor

inline nlohmann::ordered_json summarize_prefactor(const io::Table& t) {
  double worst = 0.0;
  for (std::size_t r = 0; r < t.rows.size(); ++r) worst = std::max(worst, std::abs(t.number(r, "relative_gap")));
  nlohmann::ordered_json s;
  s["rows"] = t.rows.size();
  s["p_limit"] = t.config.at("p_limit");
  s["max_abs_relative_gap"] = worst;
  return s;
}

inline CommandResult cmd_prefactor(const CommonConfig& c) {
  if (!(c.mu > 1.0)) throw DomainError("prefactor: mu must be > 1");
  const double limit = prefactor_limit(c.mu);
  CommandResult res;
  auto& t = res.table;
  t.config = common_json("prefactor", c);
  t.config["p_limit"] = limit;
  t.columns = {"N", "p_n", "p_limit", "relative_gap"};
  for (std::size_t n : c.n_list) {
    const double pn = prefactor(LatticeParams(n, c.mu, 1.0)).p_n;
    t.add_row({static_cast<std::int64_t>(n), pn, limit, (pn - limit) / limit});
  }
  t.summary = summarize_prefactor(t);
  return res;
}

// ---------------------------------------------------------------------------
// spectrum

struct SpectrumConfig {
  int points = 0;  // 0: default resolution for the dimension
  OperatorForm form = OperatorForm::generator;
};

inline nlohmann::ordered_json summarize_spectrum(const io::Table& t) {
  double eps_max = 0.0;
  double lam2_min = std::numeric_limits<double>::infinity();
  double res_max = 0.0;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    eps_max = std::max(eps_max, std::abs(t.number(r, "epsilon")));
    lam2_min = std::min(lam2_min, t.number(r, "lam2"));
    res_max = std::max(res_max, t.number(r, "residual_max"));
  }
  nlohmann::ordered_json s;
  s["rows"] = t.rows.size();
  s["max_abs_epsilon"] = t.rows.empty() ? nlohmann::ordered_json(nullptr) : detail::json_number(eps_max);
  s["min_lam2"] = t.rows.empty() ? nlohmann::ordered_json(nullptr) : detail::json_number(lam2_min);
  s["max_residual"] = t.rows.empty() ? nlohmann::ordered_json(nullptr) : detail::json_number(res_max);
  return s;
}

inline CommandResult cmd_spectrum(const CommonConfig& c, const SpectrumConfig& sc = {}) {
  for (std::size_t n : c.n_list)
    if (n > 3)
      throw ContractError("spectrum: N = " + std::to_string(n) +
                          " exceeds the tensor-grid limit N <= 3; use the `sample` subcommand for larger N");
  if (sc.points < 0) throw ContractError("--points must be >= 0");
  CommandResult res;
  auto& t = res.table;
  t.config = common_json("spectrum", c);
  t.config["points"] = sc.points;
  t.config["form"] = to_string(sc.form);
  t.columns = {"N", "h", "lam0", "lam1", "lam2", "kramers_rate", "epsilon", "residual_max", "points_per_dim",
               "half_width"};
  ResolutionPolicy policy;
  if (sc.points > 0) policy.points_1d = policy.points_2d = policy.points_3d = sc.points;
  for (std::size_t n : c.n_list) {
    for (double h : c.h_list) {
      const LatticeParams p(n, c.mu, h);
      const GridSpec g = policy.grid_for(p);
      const GridOperator op = sc.form == OperatorForm::generator ? build_generator_operator(p, g)
                                                                  : build_witten_operator(p, g);
      const SpectralReport r = lowest_eigenvalues(op, 3);
      const double rate = kramers_rate(p);
      const double res_max = *std::max_element(r.residual_norms.begin(), r.residual_norms.end());
      t.add_row({static_cast<std::int64_t>(n), h, r.lam0(), r.lam1(), r.lam2(), rate, r.lam1() / rate - 1.0, res_max,
                 static_cast<std::int64_t>(g.points_per_dim), g.half_width});
    }
  }
  t.summary = summarize_spectrum(t);
  return res;
}

// ---------------------------------------------------------------------------
// verify

inline nlohmann::ordered_json summarize_verify(const io::Table& t) {
  std::size_t failed = 0;
  std::vector<std::string> suites;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (t.number(r, "pass") == 0.0) ++failed;
    const auto& s = std::get<std::string>(t.rows[r][t.column("suite")]);
    if (std::find(suites.begin(), suites.end(), s) == suites.end()) suites.push_back(s);
  }
  nlohmann::ordered_json j;
  j["checks"] = t.rows.size();
  j["failed"] = failed;
  j["suites"] = suites;
  j["all_passed"] = failed == 0;
  return j;
}

inline CommandResult cmd_verify(const CommonConfig& c, VerifyOptions vo) {
  vo.seed = c.seed;
  vo.mu = c.mu;
  if (!(vo.tolerance_scale >= 0.0)) throw ContractError("--tolerance-scale must be >= 0");
  CommandResult res;
  auto& t = res.table;
  t.config = common_json("verify", c);
  t.config["only"] = std::vector<std::string>(vo.only.begin(), vo.only.end());
  t.config["tolerance_scale"] = vo.tolerance_scale;
  t.config["random_states"] = vo.random_states;
  t.config["mc_samples"] = vo.mc_samples;
  t.columns = {"suite", "check", "value", "bound", "pass"};
  for (const auto& r : run_verify(vo))
    t.add_row({r.suite, r.check, r.value, r.bound, static_cast<std::int64_t>(r.passed ? 1 : 0)});
  t.summary = summarize_verify(t);
  if (t.summary["failed"].get<std::size_t>() > 0) res.exit_code = exit_violation;
  return res;
}

// ---------------------------------------------------------------------------
// sample

struct SampleConfig {
  std::string mode = "both";  // rayleigh | relaxation | both
  ChainOptions chain;
  RelaxationOptions relax;
};

inline nlohmann::ordered_json summarize_sample(const io::Table& t) {
  std::size_t inconclusive = 0;
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    if (std::get<std::string>(t.rows[r][t.column("status")]) != "ok") ++inconclusive;
  nlohmann::ordered_json s;
  s["estimates"] = t.rows.size();
  s["inconclusive"] = inconclusive;
  return s;
}

inline CommandResult cmd_sample(const CommonConfig& c, SampleConfig sc) {
  if (sc.mode != "rayleigh" && sc.mode != "relaxation" && sc.mode != "both")
    throw ContractError("--mode must be rayleigh, relaxation or both");
  sc.chain.seed = c.seed;
  sc.relax.seed = c.seed;
  CommandResult res;
  auto& t = res.table;
  t.config = common_json("sample", c);
  t.config["mode"] = sc.mode;
  t.config["chains"] = sc.chain.chains;
  t.config["steps"] = sc.chain.steps;
  t.config["burn_in"] = sc.chain.burn_in;
  t.config["step_size"] = sc.chain.step_size;
  t.config["tune_step"] = sc.chain.tune_step;
  t.config["batches"] = sc.chain.batches;
  t.config["ess_floor"] = sc.chain.ess_floor;
  t.config["kernel"] = to_string(sc.relax.kernel);
  t.config["paths"] = sc.relax.paths;
  t.config["dt"] = sc.relax.dt;
  t.config["duration"] = sc.relax.duration;
  t.config["relax_burn_in"] = sc.relax.burn_in;
  t.config["sample_interval"] = sc.relax.sample_interval;
  t.config["max_lag"] = sc.relax.max_lag;
  t.config["r_squared_floor"] = sc.relax.r_squared_floor;
  t.columns = {"N", "h", "estimator", "value", "ci", "status", "ess", "acceptance_rate", "step_size", "r_squared",
               "chains", "n_steps"};
  for (std::size_t n : c.n_list) {
    for (double h : c.h_list) {
      const LatticeParams p(n, c.mu, h);
      if (sc.mode != "relaxation") {
        const RayleighEstimate e = rayleigh_upper_bound(p, sc.chain);
        const auto& d = e.diagnostics;
        t.add_row({static_cast<std::int64_t>(n), h, std::string("rayleigh"), e.upper_bound, e.ci,
                   std::string(to_string(e.status)), d.ess, d.acceptance_rate, d.step_size,
                   std::numeric_limits<double>::quiet_NaN(), static_cast<std::int64_t>(d.chains),
                   static_cast<std::int64_t>(d.n_steps)});
        if (e.status != RunStatus::ok)
          res.warnings.push_back("rayleigh N=" + std::to_string(n) + " h=" + io::format_double(h) +
                                 ": ESS below floor");
      }
      if (sc.mode != "rayleigh") {
        const RelaxationEstimate e = relaxation_rate_estimate(p, sc.relax);
        const auto& d = e.diagnostics;
        t.add_row({static_cast<std::int64_t>(n), h, std::string("relaxation"), e.lambda1_hat, 1.96 * e.fit.slope_se,
                   std::string(to_string(e.status)), d.ess, d.acceptance_rate, d.step_size, e.fit.r_squared,
                   static_cast<std::int64_t>(d.chains), static_cast<std::int64_t>(d.n_steps)});
        if (e.status != RunStatus::ok)
          res.warnings.push_back("relaxation N=" + std::to_string(n) + " h=" + io::format_double(h) +
                                 ": autocorrelation fit below R^2 floor");
      }
    }
  }
  t.summary = summarize_sample(t);
  if (t.summary["inconclusive"].get<std::size_t>() > 0) res.exit_code = exit_inconclusive;
  return res;
}

// ---------------------------------------------------------------------------
// hitting

struct HittingConfig {
  HittingOptions sim;
  std::string raw_prefix;  // non-empty: write <prefix>_N<n>_h<h>.csv with one time per line
};

/// Arrhenius fit of log(mean) against 1/h over rows with at least one completed path.
inline nlohmann::ordered_json summarize_hitting(const io::Table& t) {
  std::vector<HittingStats> cells;
  std::size_t censored_cells = 0;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    HittingStats s;
    s.h = t.number(r, "h");
    if (t.number(r, "completed") > 0.0) {
      s.mean = t.number(r, "mean");
      s.transition_times = {s.mean};
    } else {
      ++censored_cells;
    }
    cells.push_back(std::move(s));
  }
  nlohmann::ordered_json j;
  j["cells"] = t.rows.size();
  j["all_censored_cells"] = censored_cells;
  const std::size_t used = t.rows.size() - censored_cells;
  j["cells_in_fit"] = used;
  if (used >= 2) {
    const stats::LinearFit f = arrhenius_fit(cells);
    j["arrhenius_slope"] = detail::json_number(f.slope);
    j["arrhenius_intercept"] = detail::json_number(f.intercept);
    j["arrhenius_r_squared"] = detail::json_number(f.r_squared);
    j["arrhenius_slope_se"] = detail::json_number(f.slope_se);
  } else {
    j["arrhenius_slope"] = nullptr;
    j["arrhenius_intercept"] = nullptr;
    j["arrhenius_r_squared"] = nullptr;
    j["arrhenius_slope_se"] = nullptr;
  }
  return j;
}

inline std::string raw_times_path(const std::string& prefix, std::size_t n, double h) {
  return prefix + "_N" + std::to_string(n) + "_h" + io::format_double(h) + ".csv";
}

inline CommandResult cmd_hitting(const CommonConfig& c, HittingConfig hc) {
  hc.sim.seed = c.seed;
  CommandResult res;
  auto& t = res.table;
  t.config = common_json("hitting", c);
  t.config["paths"] = hc.sim.paths;
  t.config["dt"] = hc.sim.dt;
  t.config["target_radius"] = hc.sim.target_radius;
  t.config["max_steps"] = hc.sim.max_steps;
  t.config["raw_prefix"] = hc.raw_prefix;
  t.columns = {"N", "h", "paths", "completed", "censored", "mean", "std_err", "status"};
  for (std::size_t n : c.n_list) {
    for (double h : c.h_list) {
      const HittingStats s = hitting_time_run(LatticeParams(n, c.mu, h), hc.sim);
      const std::string status = s.all_censored() ? "all_censored" : (s.censored > 0 ? "partially_censored" : "ok");
      t.add_row({static_cast<std::int64_t>(n), h, static_cast<std::int64_t>(s.paths),
                 static_cast<std::int64_t>(s.transition_times.size()), static_cast<std::int64_t>(s.censored), s.mean,
                 s.std_err, status});
      if (s.all_censored()) {
        res.exit_code = exit_inconclusive;
        res.warnings.push_back("hitting N=" + std::to_string(n) + " h=" + io::format_double(h) +
                               ": every path censored; cell excluded from the fit");
      }
      if (!hc.raw_prefix.empty()) {
        std::ofstream os(raw_times_path(hc.raw_prefix, n, h));
        if (!os) throw ContractError("--raw-prefix: cannot write " + raw_times_path(hc.raw_prefix, n, h));
        os << "time\n";
        for (double v : s.transition_times) os << io::format_double(v) << "\n";
      }
    }
  }
  t.summary = summarize_hitting(t);
  return res;
}

/// Recomputes the summary of a table read back from disk.
inline nlohmann::ordered_json resummarize(const io::Table& t) {
  const std::string sub = t.config.at("subcommand").get<std::string>();
  if (sub == "prefactor") return summarize_prefactor(t);
  if (sub == "spectrum") return summarize_spectrum(t);
  if (sub == "verify") return summarize_verify(t);
  if (sub == "sample") return summarize_sample(t);
  if (sub == "hitting") return summarize_hitting(t);
  throw ContractError("resummarize: unknown subcommand " + sub);
}

}  // namespace kramers::cmd
