#pragma once

// Stochastic layer: MALA and Euler-Maruyama kernels for exp(-V/eps), the chi
// Rayleigh quotient estimator, autocorrelation-based relaxation rates and
// well-to-well hitting times. Every replica (chain or path) owns the Philox
// stream (seed, replica index), so results do not depend on thread count.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <thread>
#include <utility>
#include <vector>

#include "kramers/errors.hpp"
#include "kramers/grid.hpp"
#include "kramers/lattice_model.hpp"
#include "kramers/potentials.hpp"
#include "kramers/rng.hpp"
#include "kramers/stats.hpp"

namespace kramers {

enum class RunStatus { ok, inconclusive };

inline const char* to_string(RunStatus s) { return s == RunStatus::ok ? "ok" : "inconclusive"; }

enum class Kernel { mala, langevin };

inline const char* to_string(Kernel k) { return k == Kernel::mala ? "mala" : "langevin"; }

struct AutocorrFit {
  double rate = std::numeric_limits<double>::quiet_NaN();
  double r_squared = std::numeric_limits<double>::quiet_NaN();
};

struct ChainDiagnostics {
  std::size_t n_steps = 0;  // post burn-in steps summed over chains
  std::size_t burn_in = 0;  // per chain
  std::size_t accepted = 0;
  double acceptance_rate = 0.0;
  double ess = 0.0;
  AutocorrFit autocorr_fit;
  std::uint64_t seed = 0;
  std::size_t chains = 0;
  double step_size = 0.0;
  Kernel kernel = Kernel::mala;
};

/// Runs fn(i) for i in [0, count) on up to `threads` workers (0: hardware concurrency).
template <class Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < count; i += threads) fn(i);
    });
  for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------------------
// chi test function

struct ChiValue {
  double value = 0.0;
  double derivative = 0.0;
};

/// value = (2/sqrt(2 pi h)) int_0^xbar exp(-s^2/(2h)) ds = erf(xbar / sqrt(2h)),
/// derivative = (2/sqrt(2 pi h)) exp(-xbar^2/(2h)).
inline ChiValue chi_test_function(double h, double xbar) {
  detail::require(h > 0.0, "chi_test_function: h must be > 0");
  return {std::erf(xbar / std::sqrt(2.0 * h)),
          2.0 / std::sqrt(2.0 * std::numbers::pi * h) * std::exp(-xbar * xbar / (2.0 * h))};
}

// ---------------------------------------------------------------------------
// Kernels

namespace detail {

template <Potential P>
double mean_of(const P&, std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

/// log q(to | from) up to the common normalisation, for the MALA proposal
/// to = from - step grad V(from) + sqrt(2 step eps) xi.
inline double mala_log_proposal(std::span<const double> from, std::span<const double> grad_from,
                                std::span<const double> to, double step, double eps) {
  double s = 0.0;
  for (std::size_t i = 0; i < from.size(); ++i) {
    const double d = to[i] - from[i] + step * grad_from[i];
    s += d * d;
  }
  return -s / (4.0 * step * eps);
}

}  // namespace detail

/// Metropolis-Hastings log ratio log[pi(y) q(x|y) / (pi(x) q(y|x))] with pi = exp(-V/eps).
template <Potential P>
double mala_log_acceptance(const P& pot, double eps, std::span<const double> x, std::span<const double> y,
                           double step) {
  std::vector<double> gx(x.size());
  std::vector<double> gy(y.size());
  pot.gradient(x, gx);
  pot.gradient(y, gy);
  return -(pot.value(y) - pot.value(x)) / eps + detail::mala_log_proposal(y, gy, x, step, eps) -
         detail::mala_log_proposal(x, gx, y, step, eps);
}

inline double mala_log_acceptance(const LatticeParams& p, std::span<const double> x, std::span<const double> y,
                                  double step) {
  return mala_log_acceptance(LatticeEnergy(p), p.noise(), x, y, step);
}

struct MalaResult {
  FieldState state;
  bool accepted = false;
};

/// Reusable MALA workspace; caches V and grad V at the current state.
template <Potential P>
class MalaKernel {
 public:
  MalaKernel(const P& pot, double eps, std::span<const double> start)
      : pot_(pot), eps_(eps), x_(start.begin(), start.end()), gx_(start.size()), y_(start.size()), gy_(start.size()) {
    pot_.gradient(x_, gx_);
    vx_ = pot_.value(x_);
  }

  bool step(double step_size, Philox& rng) {
    const double noise = std::sqrt(2.0 * step_size * eps_);
    for (std::size_t i = 0; i < x_.size(); ++i) y_[i] = x_[i] - step_size * gx_[i] + noise * rng.normal();
    pot_.gradient(y_, gy_);
    const double vy = pot_.value(y_);
    const double log_ratio = -(vy - vx_) / eps_ + detail::mala_log_proposal(y_, gy_, x_, step_size, eps_) -
                             detail::mala_log_proposal(x_, gx_, y_, step_size, eps_);
    const double u = rng.uniform();
    if (std::isfinite(log_ratio) && std::log(u) < log_ratio) {
      x_.swap(y_);
      gx_.swap(gy_);
      vx_ = vy;
      return true;
    }
    return false;
  }

  const std::vector<double>& state() const { return x_; }

 private:
  const P& pot_;
  double eps_;
  std::vector<double> x_, gx_, y_, gy_;
  double vx_ = 0.0;
};

template <Potential P>
MalaResult mala_step(const P& pot, double eps, std::span<const double> x, double step_size, Philox& rng) {
  detail::require(step_size > 0.0, "mala_step: step_size must be > 0");
  MalaKernel<P> k(pot, eps, x);
  const bool acc = k.step(step_size, rng);
  return {FieldState(k.state()), acc};
}

inline MalaResult mala_step(const LatticeParams& p, const FieldState& x, double step_size, Philox& rng) {
  detail::check_dimension(p, x.values());
  const LatticeEnergy pot(p);
  return mala_step(pot, p.noise(), x.values(), step_size, rng);
}

/// x' = x - grad V(x) dt + sqrt(2 eps dt) xi, in place; `grad` is scratch of size N.
template <Potential P>
void euler_maruyama_update(const P& pot, double eps, std::span<double> x, std::span<double> grad, double dt,
                           Philox& rng) {
  pot.gradient(x, grad);
  const double noise = std::sqrt(2.0 * eps * dt);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += -grad[i] * dt + noise * rng.normal();
}

template <Potential P>
FieldState euler_maruyama_step(const P& pot, double eps, std::span<const double> x, double dt, Philox& rng) {
  detail::require(dt > 0.0, "euler_maruyama_step: dt must be > 0");
  std::vector<double> y(x.begin(), x.end());
  std::vector<double> g(x.size());
  euler_maruyama_update(pot, eps, std::span<double>(y), std::span<double>(g), dt, rng);
  return FieldState(std::move(y));
}

inline FieldState euler_maruyama_step(const LatticeParams& p, const FieldState& x, double dt, Philox& rng) {
  detail::check_dimension(p, x.values());
  return euler_maruyama_step(LatticeEnergy(p), p.noise(), x.values(), dt, rng);
}

// ---------------------------------------------------------------------------
// Rayleigh quotient of chi

struct ChainOptions {
  std::size_t chains = 8;        // half start at I_+, half at I_-
  std::size_t steps = 200000;    // per chain after burn-in
  std::size_t burn_in = 20000;   // per chain; MALA step tuned here when enabled
  double step_size = 0.01;
  bool tune_step = true;         // target acceptance in [0.5, 0.6]
  std::size_t batches = 20;      // per chain
  double ess_floor = 1000.0;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
};

struct RayleighEstimate {
  double upper_bound = std::numeric_limits<double>::quiet_NaN();
  double ci = std::numeric_limits<double>::quiet_NaN();  // 95% half-width (jackknife over batches)
  double numerator = 0.0;    // h E[chi'^2]
  double denominator = 0.0;  // Var(chi)
  double chi_mean = 0.0;
  double chi_mean_se = 0.0;
  RunStatus status = RunStatus::ok;
  ChainDiagnostics diagnostics;
};

namespace detail {

struct ChainTrace {
  std::vector<double> chi_prime_sq;  // per recorded step
  std::vector<double> chi;
  std::size_t accepted = 0;
  double step_size = 0.0;
};

template <Potential P>
ChainTrace run_chi_chain(const P& pot, double eps, double h, double start, const ChainOptions& opt,
                         std::uint64_t stream) {
  Philox rng(opt.seed, stream);
  std::vector<double> x0(pot.dimension(), start);
  MalaKernel<P> k(pot, eps, x0);
  double step = opt.step_size;
  std::size_t window_acc = 0;
  for (std::size_t s = 0; s < opt.burn_in; ++s) {
    window_acc += k.step(step, rng) ? 1 : 0;
    if (opt.tune_step && (s + 1) % 100 == 0) {
      const double rate = static_cast<double>(window_acc) / 100.0;
      if (rate > 0.6) step *= 1.1;
      if (rate < 0.5) step *= 0.9;
      window_acc = 0;
    }
  }
  ChainTrace tr;
  tr.step_size = step;
  tr.chi_prime_sq.reserve(opt.steps);
  tr.chi.reserve(opt.steps);
  for (std::size_t s = 0; s < opt.steps; ++s) {
    tr.accepted += k.step(step, rng) ? 1 : 0;
    const ChiValue c = chi_test_function(h, mean_of(pot, k.state()));
    tr.chi_prime_sq.push_back(c.derivative * c.derivative);
    tr.chi.push_back(c.value);
  }
  return tr;
}

}  // namespace detail

/// h E[chi'(xbar)^2] / Var(chi(xbar)) under exp(-V/eps), estimated from MALA chains.
/// The CI is a jackknife over all (chain, batch) blocks; the run is inconclusive
/// when the batch-means ESS of chi'^2, summed over chains, is below the floor.
template <Potential P>
RayleighEstimate rayleigh_upper_bound(const P& pot, double eps, double h, const ChainOptions& opt) {
  detail::require(opt.chains >= 2 && opt.chains % 2 == 0, "rayleigh_upper_bound: chains must be even and >= 2");
  detail::require(opt.steps >= opt.batches && opt.batches >= 2, "rayleigh_upper_bound: steps < batches");
  std::vector<detail::ChainTrace> traces(opt.chains);
  parallel_for(opt.chains, opt.threads, [&](std::size_t c) {
    traces[c] = detail::run_chi_chain(pot, eps, h, c % 2 == 0 ? 1.0 : -1.0, opt, c);
  });

  RayleighEstimate out;
  auto& d = out.diagnostics;
  d.chains = opt.chains;
  d.burn_in = opt.burn_in;
  d.seed = opt.seed;
  d.kernel = Kernel::mala;
  std::vector<double> ba, bb, bc;  // block means of chi'^2, chi, chi^2
  double step_sum = 0.0;
  for (const auto& tr : traces) {
    d.n_steps += tr.chi.size();
    d.accepted += tr.accepted;
    d.ess += stats::batch_ess(tr.chi_prime_sq, opt.batches);
    step_sum += tr.step_size;
    const std::size_t len = tr.chi.size() / opt.batches;
    for (std::size_t b = 0; b < opt.batches; ++b) {
      double sa = 0.0, sb = 0.0, sc = 0.0;
      for (std::size_t i = b * len; i < (b + 1) * len; ++i) {
        sa += tr.chi_prime_sq[i];
        sb += tr.chi[i];
        sc += tr.chi[i] * tr.chi[i];
      }
      ba.push_back(sa / static_cast<double>(len));
      bb.push_back(sb / static_cast<double>(len));
      bc.push_back(sc / static_cast<double>(len));
    }
  }
  d.acceptance_rate = static_cast<double>(d.accepted) / static_cast<double>(d.n_steps);
  d.step_size = step_sum / static_cast<double>(opt.chains);

  const std::size_t k = ba.size();
  const double ta = std::accumulate(ba.begin(), ba.end(), 0.0);
  const double tb = std::accumulate(bb.begin(), bb.end(), 0.0);
  const double tc = std::accumulate(bc.begin(), bc.end(), 0.0);
  auto ratio = [&](double a, double b, double c, double count) {
    const double mb = b / count;
    return h * (a / count) / (c / count - mb * mb);
  };
  const auto kd = static_cast<double>(k);
  out.numerator = h * ta / kd;
  out.denominator = tc / kd - (tb / kd) * (tb / kd);
  out.upper_bound = ratio(ta, tb, tc, kd);
  out.chi_mean = tb / kd;
  out.chi_mean_se = std::sqrt(stats::variance(bb) / kd);
  std::vector<double> jack(k);
  for (std::size_t i = 0; i < k; ++i) jack[i] = ratio(ta - ba[i], tb - bb[i], tc - bc[i], kd - 1.0);
  const double jm = stats::mean(jack);
  double ss = 0.0;
  for (double v : jack) ss += (v - jm) * (v - jm);
  out.ci = 1.96 * std::sqrt((kd - 1.0) / kd * ss);
  out.status = d.ess >= opt.ess_floor && std::isfinite(out.upper_bound) ? RunStatus::ok : RunStatus::inconclusive;
  return out;
}

inline RayleighEstimate rayleigh_upper_bound(const LatticeParams& p, const ChainOptions& opt) {
  return rayleigh_upper_bound(LatticeEnergy(p), p.noise(), p.h(), opt);
}

/// The same Rayleigh quotient by tensor trapezoid quadrature (N <= 3).
inline double rayleigh_quotient_quadrature(const LatticeParams& p, int points_per_dim) {
  const GridSpec g = make_grid(p, points_per_dim);
  const GridNodes nodes = enumerate_nodes(LatticeEnergy(p), p.noise(), g);
  double z = 0.0, a = 0.0, b = 0.0, c = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto pos = nodes.position(i);
    double xbar = 0.0;
    for (int k = 0; k < g.dims; ++k) xbar += pos[static_cast<std::size_t>(k)];
    xbar /= g.dims;
    const double w = std::exp(-nodes.potential[i] / p.noise());
    const ChiValue ch = chi_test_function(p.h(), xbar);
    z += w;
    a += w * ch.derivative * ch.derivative;
    b += w * ch.value;
    c += w * ch.value * ch.value;
  }
  return p.h() * (a / z) / (c / z - (b / z) * (b / z));
}

// ---------------------------------------------------------------------------
// Relaxation rate from the autocorrelation of xbar

struct RelaxationOptions {
  Kernel kernel = Kernel::langevin;
  std::size_t paths = 16;          // half start at +1, half at -1
  double dt = 0.005;               // EM time step or MALA step size
  double duration = 20000.0;       // simulated time per path after burn-in
  double burn_in = 50.0;
  double sample_interval = 0.1;    // time between recorded xbar values
  double max_lag = 200.0;          // largest lag time considered
  double window_upper = 0.8;       // fit rho from where it first drops below this ...
  double window_lower = 0.05;      // ... to where it first drops below this
  double r_squared_floor = 0.98;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
};

struct RelaxationEstimate {
  double lambda1_hat = std::numeric_limits<double>::quiet_NaN();
  stats::LinearFit fit;
  RunStatus status = RunStatus::ok;
  std::vector<double> lag_times;
  std::vector<double> autocorrelation;
  std::size_t window_begin = 0;
  std::size_t window_end = 0;
  ChainDiagnostics diagnostics;
};

/// Pooled autocorrelation of xbar over independent trajectories; log rho is
/// fitted by a line over the lag window and lambda1_hat is minus its slope.
/// For MALA the time per step is taken to be the step size.
template <Potential P>
RelaxationEstimate relaxation_rate_estimate(const P& pot, double eps, const RelaxationOptions& opt) {
  detail::require(opt.paths >= 1 && opt.dt > 0.0 && opt.duration > 0.0, "relaxation_rate_estimate: bad options");
  const auto every = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(opt.sample_interval / opt.dt)));
  const auto burn = static_cast<std::size_t>(std::llround(opt.burn_in / opt.dt));
  const auto records = static_cast<std::size_t>(std::llround(opt.duration / (opt.dt * static_cast<double>(every))));
  const double tau = opt.dt * static_cast<double>(every);
  const auto max_lag = std::min<std::size_t>(records - 1, static_cast<std::size_t>(std::llround(opt.max_lag / tau)));
  const std::size_t n = pot.dimension();

  std::vector<std::vector<double>> series(opt.paths);
  std::vector<std::size_t> accepted(opt.paths, 0);
  parallel_for(opt.paths, opt.threads, [&](std::size_t path) {
    Philox rng(opt.seed, path);
    std::vector<double> x(n, path % 2 == 0 ? 1.0 : -1.0);
    std::vector<double> g(n);
    auto& out = series[path];
    out.reserve(records);
    if (opt.kernel == Kernel::langevin) {
      for (std::size_t s = 0; s < burn; ++s) euler_maruyama_update(pot, eps, std::span<double>(x), std::span<double>(g), opt.dt, rng);
      for (std::size_t r = 0; r < records; ++r) {
        for (std::size_t s = 0; s < every; ++s)
          euler_maruyama_update(pot, eps, std::span<double>(x), std::span<double>(g), opt.dt, rng);
        out.push_back(detail::mean_of(pot, x));
      }
    } else {
      MalaKernel<P> k(pot, eps, x);
      for (std::size_t s = 0; s < burn; ++s) k.step(opt.dt, rng);
      for (std::size_t r = 0; r < records; ++r) {
        for (std::size_t s = 0; s < every; ++s) accepted[path] += k.step(opt.dt, rng) ? 1 : 0;
        out.push_back(detail::mean_of(pot, k.state()));
      }
    }
  });

  // pooled covariance around the pooled mean
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& s : series) {
    total += std::accumulate(s.begin(), s.end(), 0.0);
    count += s.size();
  }
  const double m = total / static_cast<double>(count);
  std::vector<double> cov(max_lag + 1, 0.0);
  for (std::size_t lag = 0; lag <= max_lag; ++lag) {
    double acc = 0.0;
    std::size_t terms = 0;
    for (const auto& s : series) {
      for (std::size_t i = 0; i + lag < s.size(); ++i) acc += (s[i] - m) * (s[i + lag] - m);
      terms += s.size() - lag;
    }
    cov[lag] = acc / static_cast<double>(terms);
  }

  RelaxationEstimate est;
  est.diagnostics.kernel = opt.kernel;
  est.diagnostics.chains = opt.paths;
  est.diagnostics.seed = opt.seed;
  est.diagnostics.step_size = opt.dt;
  est.diagnostics.burn_in = burn;
  est.diagnostics.n_steps = records * every * opt.paths;
  for (std::size_t a : accepted) est.diagnostics.accepted += a;
  est.diagnostics.acceptance_rate =
      opt.kernel == Kernel::mala ? static_cast<double>(est.diagnostics.accepted) / static_cast<double>(est.diagnostics.n_steps) : 1.0;
  est.autocorrelation.resize(max_lag + 1);
  est.lag_times.resize(max_lag + 1);
  for (std::size_t lag = 0; lag <= max_lag; ++lag) {
    est.autocorrelation[lag] = cov[0] > 0.0 ? cov[lag] / cov[0] : 0.0;
    est.lag_times[lag] = tau * static_cast<double>(lag);
  }
  std::size_t begin = 0;
  while (begin <= max_lag && est.autocorrelation[begin] >= opt.window_upper) ++begin;
  std::size_t end = begin;
  while (end <= max_lag && est.autocorrelation[end] >= opt.window_lower) ++end;
  est.window_begin = begin;
  est.window_end = end;
  if (end >= begin + 3) {
    std::vector<double> xs, ys;
    for (std::size_t lag = begin; lag < end; ++lag) {
      xs.push_back(est.lag_times[lag]);
      ys.push_back(std::log(est.autocorrelation[lag]));
    }
    est.fit = stats::linear_fit(xs, ys);
    est.lambda1_hat = -est.fit.slope;
  }
  est.diagnostics.autocorr_fit = {est.lambda1_hat, est.fit.r_squared};
  est.diagnostics.ess = 0.0;
  for (const auto& s : series) est.diagnostics.ess += stats::batch_ess(s, std::min<std::size_t>(20, s.size()));
  est.status = (end >= begin + 3 && est.fit.r_squared >= opt.r_squared_floor && est.lambda1_hat > 0.0)
                   ? RunStatus::ok
                   : RunStatus::inconclusive;
  return est;
}

inline RelaxationEstimate relaxation_rate_estimate(const LatticeParams& p, const RelaxationOptions& opt) {
  return relaxation_rate_estimate(LatticeEnergy(p), p.noise(), opt);
}

// ---------------------------------------------------------------------------
// Hitting times

struct HittingOptions {
  std::size_t paths = 2000;
  double dt = 0.005;
  double target_radius = 0.3;  // target {xbar >= 1 - r}
  std::uint64_t max_steps = 1000000000ULL;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
};

struct HittingStats {
  std::vector<double> transition_times;  // completed paths only
  std::size_t censored = 0;
  std::size_t paths = 0;
  double mean = std::numeric_limits<double>::quiet_NaN();
  double std_err = std::numeric_limits<double>::quiet_NaN();
  int start_sign = -1;  // start at I_-
  double target_radius = 0.3;
  double target_level = 0.7;  // xbar >= target_level
  double h = 0.0;
  double dt = 0.0;
  std::uint64_t seed = 0;

  bool all_censored() const { return transition_times.empty(); }
};

/// Euler-Maruyama from I_- until xbar >= 1 - r; paths exceeding max_steps are
/// counted as censored and excluded from mean and std_err.
inline HittingStats hitting_time_run(const LatticeParams& p, const HittingOptions& opt) {
  detail::require(opt.dt > 0.0 && opt.paths >= 1, "hitting_time_run: bad options");
  detail::require(opt.target_radius > 0.0 && opt.target_radius < 1.0, "hitting_time_run: radius must be in (0, 1)");
  const LatticeEnergy pot(p);
  const double eps = p.noise();
  const double level = 1.0 - opt.target_radius;
  const std::size_t n = p.n_sites();
  std::vector<double> times(opt.paths, -1.0);
  parallel_for(opt.paths, opt.threads, [&](std::size_t path) {
    Philox rng(opt.seed, path);
    std::vector<double> x(n, -1.0);
    std::vector<double> g(n);
    for (std::uint64_t s = 1; s <= opt.max_steps; ++s) {
      euler_maruyama_update(pot, eps, std::span<double>(x), std::span<double>(g), opt.dt, rng);
      double xbar = 0.0;
      for (double v : x) xbar += v;
      if (xbar / static_cast<double>(n) >= level) {
        times[path] = static_cast<double>(s) * opt.dt;
        return;
      }
    }
  });
  HittingStats st;
  st.paths = opt.paths;
  st.target_radius = opt.target_radius;
  st.target_level = level;
  st.h = p.h();
  st.dt = opt.dt;
  st.seed = opt.seed;
  for (double t : times) {
    if (t > 0.0) st.transition_times.push_back(t);
    else ++st.censored;
  }
  if (!st.transition_times.empty()) {
    st.mean = stats::mean(st.transition_times);
    st.std_err = st.transition_times.size() > 1 ? stats::standard_error(st.transition_times) : 0.0;
  }
  return st;
}

/// Least-squares slope of log(mean time) against 1/h; all-censored cells are skipped.
inline stats::LinearFit arrhenius_fit(const std::vector<HittingStats>& cells) {
  std::vector<double> inv_h, log_t;
  for (const auto& c : cells) {
    if (c.all_censored()) continue;
    inv_h.push_back(1.0 / c.h);
    log_t.push_back(std::log(c.mean));
  }
  return stats::linear_fit(inv_h, log_t);
}

}  // namespace kramers
