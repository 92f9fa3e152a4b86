#pragma once

// Numerical verifiers for the functional inequalities used around the double
// well: discrete Poincare and Sobolev-type bounds, trace sums gamma(alpha),
// convexity near the minima, the NGS constant, the ground-state effective
// potential and the IMS localisation identity.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "kramers/errors.hpp"
#include "kramers/grid.hpp"
#include "kramers/lattice_model.hpp"
#include "kramers/potentials.hpp"
#include "kramers/rng.hpp"

namespace kramers {

struct InequalityReport {
  std::string name;
  std::size_t samples_tested = 0;
  double min_margin = std::numeric_limits<double>::infinity();
  FieldState worst_witness;

  void observe(double margin, std::span<const double> x) {
    ++samples_tested;
    if (margin < min_margin) {
      min_margin = margin;
      worst_witness = FieldState(std::vector<double>(x.begin(), x.end()));
    }
  }
};

/// <x, Kx> - mu * sum (x_k - xbar)^2.
inline double poincare_margin(const LatticeParams& p, std::span<const double> x) {
  detail::check_dimension(p, x);
  detail::require(p.n_sites() >= 2, "poincare_margin: requires N >= 2");
  const double mean = FieldState(std::vector<double>(x.begin(), x.end())).mean();
  double spread = 0.0;
  for (double v : x) spread += (v - mean) * (v - mean);
  return k_quadratic_form(p, x) - p.mu() * spread;
}

/// <x, Kx> - N max_k |x_k - xbar|^2 / gamma0.
inline double sobolev_margin(const LatticeParams& p, std::span<const double> x, double gamma0) {
  detail::check_dimension(p, x);
  detail::require(gamma0 > 0.0, "sobolev_margin: gamma0 must be > 0");
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, (v - mean) * (v - mean));
  return k_quadratic_form(p, x) - static_cast<double>(p.n_sites()) * peak / gamma0;
}

/// gamma_N(alpha) = sum_{k=1}^{N-1} 1 / (nu_k + alpha).
inline double gamma_alpha(const LatticeParams& p, double alpha) {
  if (!(alpha > -p.mu())) throw DomainError("gamma_alpha: requires alpha > -mu");
  const KSpectrum spec = k_eigenvalues(p);
  double s = 0.0;
  for (std::size_t k = 1; k < spec.eigenvalues.size(); ++k) s += 1.0 / (spec.eigenvalues[k] + alpha);
  return s;
}

/// sum over k != 0 of 1 / (mu k^2 + alpha), the N -> infinity value of gamma_N(alpha).
inline double gamma_limit(double mu, double alpha) {
  if (!(alpha > -mu)) throw DomainError("gamma_limit: requires alpha > -mu");
  const double pi = std::numbers::pi;
  if (std::abs(alpha) < 1e-12 * mu) return pi * pi / (3.0 * mu);
  if (alpha > 0.0) {
    const double a = std::sqrt(alpha / mu);
    return (pi * a / std::tanh(pi * a) - 1.0) / (mu * a * a);
  }
  const double b = std::sqrt(-alpha / mu);
  return (1.0 - pi * b / std::tan(pi * b)) / (mu * b * b);
}

struct GammaSupResult {
  double value = 0.0;
  std::vector<std::size_t> sizes;
  std::vector<double> partial;  // gamma_N(alpha) at each size
};

/// sup_N gamma_N(alpha): gamma_N is evaluated at N = 2^j + 1 and the O(1/N^2)
/// tail removed by Richardson extrapolation between consecutive levels; the
/// doubling stops once successive extrapolants differ by less than tol.
inline GammaSupResult gamma_sup(double mu, double alpha, double tol = 1e-8) {
  detail::require(mu > 1.0, "gamma_sup: mu must be > 1");
  if (!(alpha > -mu)) throw DomainError("gamma_sup: requires alpha > -mu");
  GammaSupResult out;
  double prev_extrap = std::numeric_limits<double>::quiet_NaN();
  for (int j = 2; j <= 24; ++j) {
    const std::size_t n = (std::size_t{1} << j) + 1;
    const double g = gamma_alpha(LatticeParams(n, mu, 1.0), alpha);
    out.sizes.push_back(n);
    out.partial.push_back(g);
    if (out.partial.size() < 2) continue;
    const double n0 = static_cast<double>(out.sizes[out.sizes.size() - 2]);
    const double n1 = static_cast<double>(n);
    const double g0 = out.partial[out.partial.size() - 2];
    const double extrap = (n1 * n1 * g - n0 * n0 * g0) / (n1 * n1 - n0 * n0);
    const double best = std::max(extrap, g);
    if (std::isfinite(prev_extrap) && std::abs(best - prev_extrap) < tol) {
      out.value = best;
      return out;
    }
    prev_extrap = best;
  }
  out.value = prev_extrap;
  return out;
}

namespace detail {

/// Solve (H - shift I) y = b for H = diag(d) + K with K cyclic tridiagonal (c on
/// the diagonal pair, -c off diagonal); Sherman-Morrison on the wrap-around corner.
inline void solve_shifted_cyclic(std::span<const double> diag, double c, std::span<const double> b,
                                 std::span<double> y) {
  const std::size_t n = diag.size();
  if (n <= 2) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = diag[i];
    if (n == 2) {
      a(0, 0) += 2.0 * c;
      a(1, 1) += 2.0 * c;
      a(0, 1) -= 2.0 * c;
      a(1, 0) -= 2.0 * c;
    }
    const Eigen::Map<const Eigen::VectorXd> bv(b.data(), static_cast<Eigen::Index>(n));
    Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(n)) = a.ldlt().solve(bv);
    return;
  }
  // A = T + u v^T with u = (gamma, 0, ..., 0, -c), v = (1, 0, ..., 0, -c / gamma).
  const double off = -c;
  const double gamma = -diag[0] - 2.0 * c;
  std::vector<double> main(n);
  for (std::size_t i = 0; i < n; ++i) main[i] = diag[i] + 2.0 * c;
  main[0] -= gamma;
  main[n - 1] -= off * off / gamma;

  auto thomas = [&](std::span<const double> rhs, std::vector<double>& out) {
    std::vector<double> cp(n);
    std::vector<double> dp(n);
    cp[0] = off / main[0];
    dp[0] = rhs[0] / main[0];
    for (std::size_t i = 1; i < n; ++i) {
      const double m = main[i] - off * cp[i - 1];
      cp[i] = off / m;
      dp[i] = (rhs[i] - off * dp[i - 1]) / m;
    }
    out.assign(n, 0.0);
    out[n - 1] = dp[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) out[i] = dp[i] - cp[i] * out[i + 1];
  };

  std::vector<double> u(n, 0.0);
  u[0] = gamma;
  u[n - 1] = off;
  std::vector<double> yb;
  std::vector<double> zu;
  thomas(b, yb);
  thomas(u, zu);
  const double vy = yb[0] + off / gamma * yb[n - 1];
  const double vz = zu[0] + off / gamma * zu[n - 1];
  const double factor = vy / (1.0 + vz);
  for (std::size_t i = 0; i < n; ++i) y[i] = yb[i] - factor * zu[i];
}

}  // namespace detail

struct MinEigenResult {
  double value = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

/// lambda_min(Hess V_N(x)) by inverse iteration with a fixed shift just below the
/// Gershgorin bound min_k (3 x_k^2 - 1).
inline MinEigenResult min_hessian_eigenvalue(const LatticeParams& p, std::span<const double> x,
                                             double tol = 1e-11, int max_iterations = 50000) {
  const HessianOperator hess(p, x);
  const std::size_t n = hess.size();
  const double shift = hess.gershgorin_lower() - 1e-2;
  std::vector<double> shifted(n);
  for (std::size_t k = 0; k < n; ++k) shifted[k] = hess.local_diagonal()[k] - shift;

  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k) v[k] = 1.0 + 0.1 * std::cos(0.7 * static_cast<double>(k) + 0.3);
  std::vector<double> w(n);
  std::vector<double> hv(n);
  MinEigenResult res;
  double rq = 0.0;
  for (int it = 1; it <= max_iterations; ++it) {
    double nv = 0.0;
    for (double a : v) nv += a * a;
    nv = std::sqrt(nv);
    for (double& a : v) a /= nv;
    hess.apply(v, hv);
    rq = 0.0;
    for (std::size_t k = 0; k < n; ++k) rq += v[k] * hv[k];
    double r2 = 0.0;
    for (std::size_t k = 0; k < n; ++k) r2 += (hv[k] - rq * v[k]) * (hv[k] - rq * v[k]);
    res.iterations = it;
    res.residual = std::sqrt(r2);
    if (res.residual <= tol * std::max(1.0, std::abs(rq))) break;
    detail::solve_shifted_cyclic(shifted, p.coupling(), v, w);
    v.swap(w);
  }
  res.value = rq;
  return res;
}

struct ConvexityOptions {
  double max_mean = 1.5;  // |xbar| drawn from [r, max_mean]
  std::uint64_t seed = 0;
};

/// Scan the sector {|xbar| >= r, sum (x_k - xbar)^2 <= N alpha^2 xbar^2} for the
/// smallest Hessian eigenvalue. Random points fill the sector; a deterministic set
/// on its inner boundary (Fourier modes and single-site spikes at full radius)
/// is always included.
inline InequalityReport convexity_scan(const LatticeParams& p, double r, double alpha, std::size_t samples,
                                       const ConvexityOptions& opt = {}) {
  if (!(r > 1.0 / std::sqrt(3.0))) throw ContractError("convexity_scan: requires r > 1/sqrt(3)");
  detail::require(alpha >= 0.0, "convexity_scan: alpha must be >= 0");
  const std::size_t n = p.n_sites();
  InequalityReport rep;
  rep.name = "convexity";
  auto record = [&](const std::vector<double>& x) { rep.observe(min_hessian_eigenvalue(p, x).value, x); };

  const double radius_at_r = std::sqrt(static_cast<double>(n)) * alpha * r;
  for (double sign : {1.0, -1.0}) {
    record(std::vector<double>(n, sign * r));
    if (n < 2) continue;
    for (std::size_t mode = 1; mode <= n / 2; mode = mode * 2) {
      std::vector<double> x(n);
      double norm = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        x[k] = std::cos(2.0 * std::numbers::pi * static_cast<double>(mode * k) / static_cast<double>(n));
        norm += x[k] * x[k];
      }
      for (std::size_t k = 0; k < n; ++k) x[k] = sign * r + radius_at_r * x[k] / std::sqrt(norm);
      record(x);
    }
    std::vector<double> spike(n, -1.0 / static_cast<double>(n));
    spike[0] += 1.0;
    double norm = 0.0;
    for (double v : spike) norm += v * v;
    for (double& v : spike) v = sign * r - radius_at_r * v / std::sqrt(norm);
    record(spike);
  }

  Philox rng(opt.seed, n);
  std::vector<double> x(n);
  for (std::size_t s = 0; s < samples; ++s) {
    const double mean = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (r + (opt.max_mean - r) * rng.uniform());
    double avg = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      x[k] = rng.normal();
      avg += x[k];
    }
    avg /= static_cast<double>(n);
    double norm = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      x[k] -= avg;
      norm += x[k] * x[k];
    }
    const double radius = n > 1 ? std::sqrt(static_cast<double>(n)) * alpha * std::abs(mean) *
                                      std::pow(rng.uniform(), 1.0 / static_cast<double>(n - 1))
                                : 0.0;
    for (std::size_t k = 0; k < n; ++k) x[k] = mean + (norm > 0.0 ? radius * x[k] / std::sqrt(norm) : 0.0);
    record(x);
  }
  return rep;
}

/// C = -(rho/2) log(Lambda).
inline double ngs_constant(double rho, double lambda_bound) {
  detail::require(rho > 0.0 && lambda_bound > 0.0, "ngs_constant: inputs must be positive");
  return -0.5 * rho * std::log(lambda_bound);
}

/// M(x) = 1/4 (|grad U|^2 - |grad W|^2) - 1/2 Lap(U - W).
template <Potential U, Potential W>
double gst_effective_potential(const U& u, const W& w, std::span<const double> x) {
  detail::require(u.dimension() == x.size() && w.dimension() == x.size(),
                  "gst_effective_potential: dimension mismatch");
  std::vector<double> gu(x.size());
  std::vector<double> gw(x.size());
  u.gradient(x, gu);
  w.gradient(x, gw);
  double du = 0.0;
  double dw = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    du += gu[i] * gu[i];
    dw += gw[i] * gw[i];
  }
  return 0.25 * (du - dw) - 0.5 * (u.laplacian(x) - w.laplacian(x));
}

// ---------------------------------------------------------------------------
// IMS localisation identity

using ScalarField = std::function<double(std::span<const double>)>;

struct ImsTerms {
  double dirichlet_f = 0.0;         // E[f]
  double dirichlet_theta_f = 0.0;   // E[theta f]
  double dirichlet_comp_f = 0.0;    // E[theta~ f]
  double localisation_error = 0.0;  // F[f]
  double residual = 0.0;            // |E[f] - E[theta f] - E[theta~ f] - h F[f]|
};

enum class QuadratureStatus { ok, warning };

struct ImsReport {
  ImsTerms fine;
  ImsTerms coarse;
  int points_fine = 0;
  int points_coarse = 0;
  double observed_order = std::numeric_limits<double>::quiet_NaN();
  QuadratureStatus status = QuadratureStatus::ok;
  double residual() const { return fine.residual; }
};

namespace detail {

/// Terms of E[f] = E[theta f] + E[theta~ f] + h F[f] with E[g] = hN int |grad g|^2 w,
/// normalised by Z = int w, w = exp(-V_N / (hN)). Gradients are fourth-order central
/// differences; the functions are sampled on two ghost layers outside the box.
inline ImsTerms ims_terms(const LatticeParams& p, const GridSpec& grid, const ScalarField& f,
                          const ScalarField& theta) {
  const int d = grid.dims;
  const int n = grid.points_per_dim;
  const int ne = n + 4;
  const double dx = grid.spacing();
  const double eps = p.noise();
  std::size_t total = 1;
  for (int k = 0; k < d; ++k) total *= static_cast<std::size_t>(ne);

  std::vector<double> fv(total), tv(total), cv(total), wv(total);
  std::vector<double> x(static_cast<std::size_t>(d));
  const GridIndexer ext{d, ne};
  for (std::size_t flat = 0; flat < total; ++flat) {
    const auto idx = ext.unflatten(flat);
    for (int k = 0; k < d; ++k) x[static_cast<std::size_t>(k)] = grid.coordinate(idx[static_cast<std::size_t>(k)] - 2);
    fv[flat] = f(x);
    const double t = std::clamp(theta(x), 0.0, 1.0);
    tv[flat] = t;
    cv[flat] = std::sqrt(std::max(0.0, 1.0 - t * t));
    wv[flat] = std::exp(-energy(p, x) / eps);
  }

  std::size_t stride[3] = {1, 0, 0};
  for (int k = 1; k < d; ++k) stride[k] = stride[k - 1] * static_cast<std::size_t>(ne);
  auto deriv = [&](const std::vector<double>& a, std::size_t flat, int axis) {
    const std::size_t s = stride[axis];
    return (-a[flat + 2 * s] + 8.0 * a[flat + s] - 8.0 * a[flat - s] + a[flat - 2 * s]) / (12.0 * dx);
  };

  double z = 0.0, e_f = 0.0, e_t = 0.0, e_c = 0.0, loc = 0.0;
  for (std::size_t flat = 0; flat < total; ++flat) {
    const auto idx = ext.unflatten(flat);
    bool interior = true;
    for (int k = 0; k < d; ++k) interior = interior && idx[static_cast<std::size_t>(k)] >= 2 && idx[static_cast<std::size_t>(k)] < n + 2;
    if (!interior) continue;
    double gf = 0.0, gt = 0.0, gc = 0.0, gth = 0.0, gcomp = 0.0;
    for (int k = 0; k < d; ++k) {
      const double df = deriv(fv, flat, k);
      const double dt = deriv(tv, flat, k);
      const double dc = deriv(cv, flat, k);
      const double dtf = tv[flat] * df + fv[flat] * dt;
      const double dcf = cv[flat] * df + fv[flat] * dc;
      gf += df * df;
      gt += dtf * dtf;
      gc += dcf * dcf;
      gth += dt * dt;
      gcomp += dc * dc;
    }
    const double w = wv[flat];
    z += w;
    e_f += gf * w;
    e_t += gt * w;
    e_c += gc * w;
    loc += (gth + gcomp) * fv[flat] * fv[flat] * w;
  }
  ImsTerms t;
  t.dirichlet_f = eps * e_f / z;
  t.dirichlet_theta_f = eps * e_t / z;
  t.dirichlet_comp_f = eps * e_c / z;
  t.localisation_error = -static_cast<double>(p.n_sites()) * loc / z;
  t.residual = std::abs(t.dirichlet_f - t.dirichlet_theta_f - t.dirichlet_comp_f - p.h() * t.localisation_error);
  return t;
}

}  // namespace detail

/// IMS identity on `grid` and on the half-resolution grid. The observed order
/// log2(r_coarse / r_fine) must be >= 2 unless both residuals sit at roundoff
/// level; otherwise the report carries a warning status.
inline ImsReport ims_check(const LatticeParams& p, const GridSpec& grid, const ScalarField& f,
                           const ScalarField& theta) {
  if (p.n_sites() > 2) throw ContractError("ims_check: quadrature supports N <= 2 only");
  detail::require(grid.dims == static_cast<int>(p.n_sites()), "ims_check: grid dimension must equal N");
  detail::require(grid.points_per_dim >= 16, "ims_check: need at least 16 points per dimension");
  ImsReport rep;
  rep.points_fine = grid.points_per_dim;
  rep.fine = detail::ims_terms(p, grid, f, theta);
  GridSpec coarse = grid;
  coarse.points_per_dim = (grid.points_per_dim - 1) / 2;
  rep.points_coarse = coarse.points_per_dim;
  rep.coarse = detail::ims_terms(p, coarse, f, theta);
  const double scale = std::max({1.0, std::abs(rep.fine.dirichlet_f), std::abs(rep.fine.localisation_error)});
  const double floor = 1e-13 * scale;
  if (rep.coarse.residual <= floor && rep.fine.residual <= floor) {
    rep.observed_order = std::numeric_limits<double>::infinity();
  } else {
    const double ratio_h = static_cast<double>(rep.points_fine + 1) / static_cast<double>(rep.points_coarse + 1);
    rep.observed_order = std::log(std::max(rep.coarse.residual, floor) / std::max(rep.fine.residual, floor)) /
                         std::log(ratio_h);
    if (rep.observed_order < 2.0) rep.status = QuadratureStatus::warning;
  }
  return rep;
}

inline double ims_residual(const LatticeParams& p, const GridSpec& grid, const ScalarField& f,
                           const ScalarField& theta) {
  return ims_check(p, grid, f, theta).residual();
}

/// C-infinity step: 0 for s <= 0, 1 for s >= 1.
inline double smooth_step(double s) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / s);
  const double b = std::exp(-1.0 / (1.0 - s));
  return a / (a + b);
}

/// theta = cos(pi/2 s(q)) with s a smooth step from 0 at q <= inner to 1 at
/// q >= outer; theta~ = sin(pi/2 s(q)) is then smooth as well.
inline double smooth_cutoff(double q, double inner, double outer) {
  return std::cos(0.5 * std::numbers::pi * smooth_step((q - inner) / (outer - inner)));
}

// ---------------------------------------------------------------------------
// Random sweeps

struct SweepOptions {
  std::size_t random_states = 10000;
  std::uint64_t seed = 0;
  double gamma0 = 0.0;  // Sobolev constant; gamma_N(0) when zero
};

/// Random standard Gaussian states plus every single Fourier mode (cos and sin),
/// constants and single-site spikes.
template <class Margin>
InequalityReport margin_sweep(const LatticeParams& p, const std::string& name, Margin&& margin,
                              const SweepOptions& opt) {
  InequalityReport rep;
  rep.name = name;
  const std::size_t n = p.n_sites();
  std::vector<double> x(n);
  for (std::size_t mode = 0; mode <= n / 2; ++mode) {
    for (int phase = 0; phase < 2; ++phase) {
      for (std::size_t k = 0; k < n; ++k) {
        const double arg = 2.0 * std::numbers::pi * static_cast<double>(mode * k) / static_cast<double>(n);
        x[k] = phase == 0 ? std::cos(arg) : std::sin(arg);
      }
      rep.observe(margin(x), x);
    }
  }
  std::fill(x.begin(), x.end(), 0.0);
  x[0] = 1.0;
  rep.observe(margin(x), x);
  Philox rng(opt.seed, n);
  for (std::size_t s = 0; s < opt.random_states; ++s) {
    for (double& v : x) v = rng.normal();
    rep.observe(margin(x), x);
  }
  return rep;
}

inline InequalityReport poincare_sweep(const LatticeParams& p, const SweepOptions& opt = {}) {
  return margin_sweep(p, "poincare", [&](std::span<const double> x) { return poincare_margin(p, x); }, opt);
}

inline InequalityReport sobolev_sweep(const LatticeParams& p, const SweepOptions& opt = {}) {
  const double g0 = opt.gamma0 > 0.0 ? opt.gamma0 : gamma_alpha(p, 0.0);
  return margin_sweep(p, "sobolev", [&](std::span<const double> x) { return sobolev_margin(p, x, g0); }, opt);
}

}  // namespace kramers
