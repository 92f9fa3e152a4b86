#pragma once

// Oracle suites behind the `verify` subcommand. Each check compares a
// computed value against a bound; tolerances are multiplied by `tolerance_scale`,
// so a scale of zero demands exact agreement.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "kramers/gaussian_reference.hpp"
#include "kramers/grid.hpp"
#include "kramers/inequalities.hpp"
#include "kramers/lattice_model.hpp"
#include "kramers/potentials.hpp"
#include "kramers/rng.hpp"

namespace kramers {

struct CheckResult {
  std::string suite;
  std::string check;
  double value = 0.0;
  double bound = 0.0;
  bool passed = false;
};

struct VerifyOptions {
  std::set<std::string> only;  // empty: every suite
  double tolerance_scale = 1.0;
  std::uint64_t seed = 0;
  std::size_t random_states = 10000;
  std::size_t mc_samples = 1000000;
  double mu = 2.0;
};

inline const std::vector<std::string>& verify_suite_names() {
  static const std::vector<std::string> names = {"poincare", "sobolev",   "gamma",      "zratio",   "fourth_moment",
                                                 "ims",      "gst",       "covariance", "sigma_n",  "convexity",
                                                 "ngs",      "prefactor"};
  return names;
}

namespace detail {

struct CheckSink {
  std::vector<CheckResult>& out;
  std::string suite;

  /// value >= bound
  void at_least(const std::string& check, double value, double bound) {
    out.push_back({suite, check, value, bound, value >= bound});
  }
  /// value <= bound
  void at_most(const std::string& check, double value, double bound) {
    out.push_back({suite, check, value, bound, value <= bound});
  }
};

inline std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

inline std::vector<std::size_t> power_sizes(std::size_t lo, std::size_t hi) {
  std::vector<std::size_t> s;
  for (std::size_t n = lo; n <= hi; n *= 2) s.push_back(n);
  return s;
}

/// Monte Carlo mean and standard error of (1/N) sum_k y_k^4 under the mean-zero Gaussian.
inline std::pair<double, double> mc_fourth_moment(const LatticeParams& p, double t, std::size_t samples,
                                                  std::uint64_t seed) {
  const MeanZeroGaussianSampler sampler(MeanZeroGaussian(p, t));
  Philox rng(seed, p.n_sites() * 1000 + static_cast<std::uint64_t>(t * 10));
  const std::size_t batch = 20000;
  double s1 = 0.0, s2 = 0.0;
  std::size_t done = 0;
  while (done < samples) {
    const std::size_t b = std::min(batch, samples - done);
    const Eigen::MatrixXd y = sampler.draw_batch(rng, b);
    for (Eigen::Index c = 0; c < y.cols(); ++c) {
      const double v = y.col(c).array().pow(4).sum() / static_cast<double>(p.n_sites());
      s1 += v;
      s2 += v * v;
    }
    done += b;
  }
  const double n = static_cast<double>(samples);
  const double m = s1 / n;
  return {m, std::sqrt(std::max(0.0, s2 / n - m * m) / (n - 1.0))};
}

}  // namespace detail

inline std::vector<CheckResult> run_verify(const VerifyOptions& opt = {}) {
  std::vector<CheckResult> out;
  const double tol = opt.tolerance_scale;
  const double mu = opt.mu;
  auto want = [&](const std::string& s) { return opt.only.empty() || opt.only.count(s) > 0; };
  for (const auto& s : opt.only)
    if (std::find(verify_suite_names().begin(), verify_suite_names().end(), s) == verify_suite_names().end())
      throw ContractError("verify: unknown suite '" + s + "'");

  if (want("poincare")) {
    detail::CheckSink sink{out, "poincare"};
    for (std::size_t n : detail::power_sizes(2, 256)) {
      const auto rep = poincare_sweep(LatticeParams(n, mu, 1.0), {opt.random_states, opt.seed});
      sink.at_least("min_margin N=" + std::to_string(n), rep.min_margin, -1e-9 * tol);
    }
  }
  if (want("sobolev")) {
    detail::CheckSink sink{out, "sobolev"};
    for (std::size_t n : detail::power_sizes(2, 256)) {
      const auto rep = sobolev_sweep(LatticeParams(n, mu, 1.0), {opt.random_states, opt.seed});
      sink.at_least("min_margin N=" + std::to_string(n), rep.min_margin, -1e-9 * tol);
    }
  }
  if (want("gamma")) {
    detail::CheckSink sink{out, "gamma"};
    for (double alpha : {0.0, 1.0, -0.5 * mu}) {
      const double sup = gamma_sup(mu, alpha).value;
      double worst_step = 0.0;
      double worst_gap = -1e300;
      double prev = 0.0;
      for (std::size_t n = 2; n <= 1025; ++n) {
        const double g = gamma_alpha(LatticeParams(n, mu, 1.0), alpha);
        if (n > 2) worst_step = std::min(worst_step, g - prev);
        worst_gap = std::max(worst_gap, g - sup);
        prev = g;
      }
      const std::string a = "alpha=" + detail::label(alpha);
      sink.at_least("increasing_in_N " + a, worst_step, -1e-12 * tol);
      sink.at_most("bounded_by_sup " + a, worst_gap, 1e-8 * tol);
      sink.at_most("sup_vs_series " + a, std::abs(sup - gamma_limit(mu, alpha)), 1e-7 * tol);
    }
    sink.at_most("N=4 alpha=0 equals 1.25", std::abs(gamma_alpha(LatticeParams(4, 2.0, 1.0), 0.0) - 1.25), 1e-14 * tol);
  }
  if (want("zratio")) {
    detail::CheckSink sink{out, "zratio"};
    Philox rng(opt.seed, 77);
    double worst = 1e300;
    double worst_anti = 0.0;
    for (int i = 0; i < 100; ++i) {
      const auto n = static_cast<std::size_t>(2 + std::floor(rng.uniform() * 511.0));
      const LatticeParams p(n, mu, 1.0);
      const double lo = -(mu - 1.0);
      const double t = lo + 1e-3 + 6.0 * rng.uniform();
      const double t0 = lo + 1e-3 + 6.0 * rng.uniform();
      const double gamma_t0 = gamma_sup(mu, t0 - 1.0).value;
      worst = std::min(worst, log_z_ratio(p, t, t0) + 0.5 * gamma_t0 * std::abs(t - t0));
      worst_anti = std::max(worst_anti, std::abs(log_z_ratio(p, t, t0) + log_z_ratio(p, t0, t)));
    }
    sink.at_least("lower_bound_margin", worst, -1e-12 * tol);
    sink.at_most("antisymmetry", worst_anti, 1e-12 * tol);
    const double ref = -0.5 * (std::log(2.0) + std::log(4.0 / 3.0) + std::log(2.0));
    sink.at_most("N=4 t=1 t0=0", std::abs(log_z_ratio(LatticeParams(4, 2.0, 1.0), 1.0, 0.0) - ref), 1e-14 * tol);
  }
  if (want("fourth_moment")) {
    detail::CheckSink sink{out, "fourth_moment"};
    for (double m : {1.5, 2.0})
      for (std::size_t n : {4, 16, 64})
        for (double t : {0.0, 3.0}) {
          const LatticeParams p(n, m, 1.0);
          const auto [mean, se] = detail::mc_fourth_moment(p, t, opt.mc_samples, opt.seed);
          const double exact = fourth_moment_meanzero(p, t);
          sink.at_most("mc_z mu=" + detail::label(m) + " N=" + std::to_string(n) + " t=" + detail::label(t),
                       std::abs(mean - exact) / se, 4.0 * tol);
        }
    sink.at_most("N=4 t=0 equals 49/3", std::abs(fourth_moment_meanzero(LatticeParams(4, 2.0, 1.0), 0.0) - 49.0 / 3.0),
                 1e-12 * tol);
  }
  if (want("ims")) {
    detail::CheckSink sink{out, "ims"};
    {
      const LatticeParams p(1, mu, 0.2);
      const GridSpec g = make_grid(p, 4000);
      const ScalarField f = [](std::span<const double> x) { return x[0] * std::exp(-x[0] * x[0]); };
      const ScalarField theta = [](std::span<const double> x) { return smooth_cutoff(std::abs(x[0]), 0.3, 0.9); };
      const ImsReport r = ims_check(p, g, f, theta);
      sink.at_most("residual N=1 n=4000", r.residual(), 1e-8 * tol);
      sink.at_least("observed_order N=1", r.observed_order, 2.0);
    }
    {
      const LatticeParams p(2, mu, 0.2);
      const GridSpec g = make_grid(p, 400);
      const ScalarField f = [](std::span<const double> x) {
        return std::exp(-((x[0] - 0.5) * (x[0] - 0.5) + (x[1] - 0.3) * (x[1] - 0.3)));
      };
      const ScalarField theta = [](std::span<const double> x) {
        const double m = 0.5 * (x[0] + x[1]);
        const double q = 0.5 * ((x[0] - m) * (x[0] - m) + (x[1] - m) * (x[1] - m));
        return smooth_cutoff(q, 0.05, 0.4);
      };
      const ImsReport r = ims_check(p, g, f, theta);
      sink.at_most("residual N=2 n=400", r.residual(), 1e-6 * tol);
      sink.at_least("observed_order N=2", r.observed_order, 2.0);
    }
  }
  if (want("gst")) {
    detail::CheckSink sink{out, "gst"};
    Philox rng(opt.seed, 91);
    double worst_w = 0.0, worst_same = 0.0, worst_ho = 0.0;
    for (int i = 0; i < 100; ++i) {
      const std::size_t n = 1 + static_cast<std::size_t>(i % 3);
      const double h = 0.05 + 0.5 * rng.uniform();
      const LatticeParams p(n, mu, h);
      std::vector<double> x(n);
      for (double& v : x) v = 3.0 * (rng.uniform() - 0.5);
      const ScaledPotential<LatticeEnergy> u(LatticeEnergy(p), 1.0 / p.noise());
      const FlatPotential zero(n);
      const double m = gst_effective_potential(u, zero, x);
      const double w = witten_potential(p, x);
      worst_w = std::max(worst_w, std::abs(p.noise() * m - w) / std::max(1.0, std::abs(w)));
      worst_same = std::max(worst_same, std::abs(gst_effective_potential(u, u, x)));
      const double a = 0.5 + 2.0 * rng.uniform();
      const HarmonicWell ho(1, a);
      const double x0 = x[0];
      worst_ho = std::max(worst_ho, std::abs(gst_effective_potential(ho, FlatPotential(1), std::span<const double>(&x0, 1)) -
                                             (0.25 * a * a * x0 * x0 - 0.5 * a)));
    }
    sink.at_most("scaled_energy_recovers_witten", worst_w, 1e-8 * tol);
    sink.at_most("U_equals_W_vanishes", worst_same, 1e-15 * tol);
    sink.at_most("harmonic_identity", worst_ho, 1e-13 * tol);
  }
  if (want("covariance")) {
    detail::CheckSink sink{out, "covariance"};
    const LatticeParams p(9, 2.0, 0.1, 1.0);
    const LatticeGaussianSampler sampler(p);
    Philox rng(opt.seed, 9);
    const std::size_t batch = 20000;
    std::vector<double> s1(5, 0.0), s2(5, 0.0);
    std::size_t done = 0;
    while (done < opt.mc_samples) {
      const std::size_t b = std::min(batch, opt.mc_samples - done);
      const Eigen::MatrixXd x = sampler.draw_batch(rng, b);
      for (Eigen::Index c = 0; c < x.cols(); ++c)
        for (int k = 0; k < 5; ++k) {
          const double v = x(0, c) * x(k, c);
          s1[static_cast<std::size_t>(k)] += v;
          s2[static_cast<std::size_t>(k)] += v * v;
        }
      done += b;
    }
    const double n = static_cast<double>(opt.mc_samples);
    for (int k = 0; k < 5; ++k) {
      const double m = s1[static_cast<std::size_t>(k)] / n;
      const double se = std::sqrt((s2[static_cast<std::size_t>(k)] / n - m * m) / (n - 1.0));
      sink.at_most("mc_z k=" + std::to_string(k), std::abs(m - lattice_covariance(p, k)) / se, 4.0 * tol);
    }
    double asym = 0.0;
    for (long long k = 0; k < 9; ++k)
      asym = std::max({asym, std::abs(lattice_covariance(p, k) - lattice_covariance(p, -k)),
                       std::abs(lattice_covariance(p, k) - lattice_covariance(p, 9 - k))});
    sink.at_most("symmetry", asym, 1e-15 * tol);
  }
  if (want("sigma_n")) {
    detail::CheckSink sink{out, "sigma_n"};
    double prev = 0.0;
    double worst_step = 1e300;
    for (std::size_t n : {9, 33, 129, 513}) {
      const double s = sigma_n(2.0, 1.0, n, 3);
      if (n > 9) worst_step = std::min(worst_step, std::abs(prev - 1.0) - std::abs(s - 1.0));
      prev = s;
    }
    sink.at_least("k=3 approaches 1 monotonically", worst_step, 0.0);
    double peak = 0.0;
    for (double m : {1.0, 2.0, 10.0})
      for (double mu_s : {1.1, 2.0, 8.0})
        for (std::size_t n = 1; n <= 401; n += 8)
          for (long long k = -static_cast<long long>(n); k <= static_cast<long long>(n); ++k)
            peak = std::max(peak, sigma_n(mu_s, m, n, k));
    sink.at_most("bounded_by_pi_over_2", peak, std::numbers::pi / 2.0);
  }
  if (want("convexity")) {
    detail::CheckSink sink{out, "convexity"};
    for (std::size_t n : {8, 64, 256}) {
      const auto rep = convexity_scan(LatticeParams(n, mu, 1.0), 0.7, 0.05, 1000, {1.5, opt.seed});
      sink.at_least("min_hessian_eigenvalue N=" + std::to_string(n), rep.min_margin, 0.0);
    }
  }
  if (want("ngs")) {
    detail::CheckSink sink{out, "ngs"};
    sink.at_most("rho=1 Lambda=1", std::abs(ngs_constant(1.0, 1.0)), 1e-15 * tol);
    sink.at_most("rho=2 Lambda=e^-3", std::abs(ngs_constant(2.0, std::exp(-3.0)) - 3.0), 1e-14 * tol);
    sink.at_most("rho=0.5 Lambda=0.1", std::abs(ngs_constant(0.5, 0.1) + 0.25 * std::log(0.1)), 1e-15 * tol);
    sink.at_most("linear_in_rho", std::abs(ngs_constant(3.0, 0.2) - 3.0 * ngs_constant(1.0, 0.2)), 1e-14 * tol);
    sink.at_least("decreasing_in_Lambda", ngs_constant(1.0, 0.1) - ngs_constant(1.0, 0.2), 0.0);
  }
  if (want("prefactor")) {
    detail::CheckSink sink{out, "prefactor"};
    for (double m : {1.5, 2.0, 4.0}) {
      const double pn = prefactor(LatticeParams(4097, m, 1.0)).p_n;
      const double lim = prefactor_limit(m);
      sink.at_most("p(4097) relative gap mu=" + detail::label(m), std::abs(pn - lim) / lim, 1e-2 * tol);
    }
    double worst = 0.0;
    for (std::size_t n = 1; n <= 32; ++n) {
      const LatticeParams p(n, mu, 1.0);
      const double det_min = hessian(p, std::vector<double>(n, 1.0)).determinant();
      const double det_saddle = hessian(p, std::vector<double>(n, 0.0)).determinant();
      const double dense = std::sqrt(std::abs(det_min / det_saddle)) / std::numbers::pi;
      worst = std::max(worst, std::abs(dense / prefactor(p).p_n - 1.0));
    }
    sink.at_most("dense_determinant_agreement", worst, 1e-10 * tol);
  }
  return out;
}

}  // namespace kramers
