#pragma once

// Closed-form layer for the periodic N-site quartic double well
//
//   V_N(x) = sum_k 1/4 (x_k^2 - 1)^2 + mu / (8 sin^2(pi/N)) sum_k (x_k - x_{k+1})^2,
//
// with x_{N+1} = x_1. The interaction equals 1/2 <x, K x> where K is the
// normalised periodic discrete Laplacian with eigenvalues
// nu_k = mu sin^2(k pi/N) / sin^2(pi/N). For N = 1 the interaction is zero.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kramers/errors.hpp"
#include "kramers/potentials.hpp"
#include "kramers/rng.hpp"

namespace kramers {

/// (N, mu, h) and an optional mass m used only by the continuum-bridge Gaussian.
class LatticeParams {
 public:
  LatticeParams(std::size_t n_sites, double mu, double h, std::optional<double> mass = std::nullopt)
      : n_(n_sites), mu_(mu), h_(h), mass_(mass) {
    detail::require(n_sites >= 1, "LatticeParams: n_sites must be >= 1");
    detail::require(mu > 1.0, "LatticeParams: mu must be > 1");
    detail::require(h > 0.0, "LatticeParams: h must be > 0");
    detail::require(!mass || *mass > 0.0, "LatticeParams: mass must be > 0");
  }

  std::size_t n_sites() const { return n_; }
  double mu() const { return mu_; }
  double h() const { return h_; }
  std::optional<double> mass() const { return mass_; }

  /// Noise scale hN of the generator -hN Lap + grad V_N . grad.
  double noise() const { return h_ * static_cast<double>(n_); }

  /// Off-diagonal scale c of K: (Kx)_k = c (2 x_k - x_{k+1} - x_{k-1}); zero for N = 1.
  double coupling() const {
    if (n_ == 1) return 0.0;
    const double s = std::sin(std::numbers::pi / static_cast<double>(n_));
    return mu_ / (4.0 * s * s);
  }

  LatticeParams with_h(double h) const { return LatticeParams(n_, mu_, h, mass_); }

 private:
  std::size_t n_;
  double mu_;
  double h_;
  std::optional<double> mass_;
};

/// A lattice field configuration x in R^N.
class FieldState {
 public:
  FieldState() = default;
  explicit FieldState(std::vector<double> values) : values_(std::move(values)) {}

  static FieldState constant(std::size_t n, double value) {
    return FieldState(std::vector<double>(n, value));
  }

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  operator std::span<const double>() const { return values_; }  // NOLINT

  double mean() const {
    if (values_.empty()) return 0.0;
    return std::accumulate(values_.begin(), values_.end(), 0.0) / static_cast<double>(values_.size());
  }

  friend bool operator==(const FieldState&, const FieldState&) = default;

 private:
  std::vector<double> values_;
};

/// Eigenvalues nu_0..nu_{N-1} of K, in Fourier order (not sorted).
struct KSpectrum {
  std::vector<double> eigenvalues;

  /// min_{k>=1} nu_k; zero for N = 1.
  double smallest_nonzero() const {
    if (eigenvalues.size() < 2) return 0.0;
    return *std::min_element(eigenvalues.begin() + 1, eigenvalues.end());
  }
};

namespace detail {

inline void check_dimension(const LatticeParams& p, std::span<const double> x) {
  if (x.size() != p.n_sites())
    throw ContractError("dimension mismatch: state has " + std::to_string(x.size()) +
                        " sites, parameters have " + std::to_string(p.n_sites()));
}

inline double sum_quartic(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) {
    const double d = v * v - 1.0;
    s += 0.25 * d * d;
  }
  return s;
}

}  // namespace detail

/// nu_{k,N} for integer k (any sign); nu_{0,N} = 0 and N = 1 gives 0.
inline double k_eigenvalue(double mu, std::size_t n_sites, long long k) {
  if (n_sites == 1) return 0.0;
  const double n = static_cast<double>(n_sites);
  const double s1 = std::sin(std::numbers::pi / n);
  const double sk = std::sin(static_cast<double>(k) * std::numbers::pi / n);
  return mu * sk * sk / (s1 * s1);
}

inline KSpectrum k_eigenvalues(const LatticeParams& p) {
  KSpectrum spec;
  spec.eigenvalues.resize(p.n_sites());
  for (std::size_t k = 0; k < p.n_sites(); ++k)
    spec.eigenvalues[k] = k_eigenvalue(p.mu(), p.n_sites(), static_cast<long long>(k));
  spec.eigenvalues[0] = 0.0;
  return spec;
}

/// out = K x.
inline void apply_k(const LatticeParams& p, std::span<const double> x, std::span<double> out) {
  const std::size_t n = x.size();
  const double c = p.coupling();
  if (n == 1) {
    out[0] = 0.0;
    return;
  }
  for (std::size_t k = 0; k < n; ++k) {
    const double next = x[(k + 1) % n];
    const double prev = x[(k + n - 1) % n];
    out[k] = c * (2.0 * x[k] - next - prev);
  }
}

/// <x, K x> evaluated as the sum of squared nearest-neighbour differences.
inline double k_quadratic_form(const LatticeParams& p, std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 1) return 0.0;
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double d = x[k] - x[(k + 1) % n];
    s += d * d;
  }
  return p.coupling() * s;
}

inline double energy(const LatticeParams& p, std::span<const double> x) {
  detail::check_dimension(p, x);
  return detail::sum_quartic(x) + 0.5 * k_quadratic_form(p, x);
}

inline void gradient(const LatticeParams& p, std::span<const double> x, std::span<double> out) {
  detail::check_dimension(p, x);
  detail::require(out.size() == x.size(), "gradient: output size mismatch");
  apply_k(p, x, out);
  for (std::size_t k = 0; k < x.size(); ++k) out[k] += x[k] * x[k] * x[k] - x[k];
}

inline std::vector<double> gradient(const LatticeParams& p, std::span<const double> x) {
  std::vector<double> g(x.size());
  gradient(p, x, g);
  return g;
}

/// trace(K) = sum_k nu_k = 2 N c.
inline double k_trace(const LatticeParams& p) {
  return 2.0 * static_cast<double>(p.n_sites()) * p.coupling();
}

/// Lap V_N(x) = sum_k (3 x_k^2 - 1) + trace(K).
inline double energy_laplacian(const LatticeParams& p, std::span<const double> x) {
  detail::check_dimension(p, x);
  double s = 0.0;
  for (double v : x) s += 3.0 * v * v - 1.0;
  return s + k_trace(p);
}

/// Dense Hessian diag(3 x_k^2 - 1) + K.
inline Eigen::MatrixXd hessian(const LatticeParams& p, std::span<const double> x) {
  detail::check_dimension(p, x);
  const std::size_t n = x.size();
  detail::require(n <= 2048, "hessian: dense form limited to N <= 2048, use HessianOperator");
  const auto ni = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(ni, ni);
  const double c = p.coupling();
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    hess(i, i) += 3.0 * x[k] * x[k] - 1.0;
    if (n == 1) continue;
    hess(i, i) += 2.0 * c;
    hess(i, static_cast<Eigen::Index>((k + 1) % n)) -= c;
    hess(i, static_cast<Eigen::Index>((k + n - 1) % n)) -= c;
  }
  return hess;
}

/// Matrix-free Hessian at a fixed point; usable for any N.
class HessianOperator {
 public:
  HessianOperator(const LatticeParams& p, std::span<const double> x) : params_(p) {
    detail::check_dimension(p, x);
    diag_.resize(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) diag_[k] = 3.0 * x[k] * x[k] - 1.0;
  }

  std::size_t size() const { return diag_.size(); }

  void apply(std::span<const double> v, std::span<double> out) const {
    apply_k(params_, v, out);
    for (std::size_t k = 0; k < v.size(); ++k) out[k] += diag_[k] * v[k];
  }

  /// Local part 3 x_k^2 - 1 (K contributes a constant 2c on the diagonal).
  const std::vector<double>& local_diagonal() const { return diag_; }
  const LatticeParams& params() const { return params_; }

  /// Gershgorin lower bound on the spectrum: min_k (3 x_k^2 - 1) since K's rows sum to zero.
  double gershgorin_lower() const { return *std::min_element(diag_.begin(), diag_.end()); }

 private:
  LatticeParams params_;
  std::vector<double> diag_;
};

/// Witten potential W = |grad V|^2 / (4 eps) - Lap V / 2 for a generic potential and noise eps.
template <Potential P>
double witten_potential(const P& pot, double eps, std::span<const double> x) {
  std::vector<double> g(x.size());
  pot.gradient(x, g);
  double g2 = 0.0;
  for (double v : g) g2 += v * v;
  return g2 / (4.0 * eps) - 0.5 * pot.laplacian(x);
}

/// V_N packaged as a Potential.
class LatticeEnergy {
 public:
  explicit LatticeEnergy(LatticeParams p) : params_(std::move(p)) {}

  std::size_t dimension() const { return params_.n_sites(); }
  const LatticeParams& params() const { return params_; }

  double value(std::span<const double> x) const { return energy(params_, x); }
  void gradient(std::span<const double> x, std::span<double> g) const {
    kramers::gradient(params_, x, g);
  }
  double laplacian(std::span<const double> x) const { return energy_laplacian(params_, x); }

 private:
  LatticeParams params_;
};

/// W(x) = |grad V_N|^2 / (4hN) - Lap V_N / 2.
inline double witten_potential(const LatticeParams& p, std::span<const double> x) {
  return witten_potential(LatticeEnergy(p), p.noise(), x);
}

// ---------------------------------------------------------------------------
// Critical points

struct CriticalPoint {
  FieldState point;
  int morse_index = 0;
  double gradient_norm = 0.0;
};

struct MultistartOptions {
  int constant_starts = 41;            // c * (1,...,1), c uniform in [-2, 2]
  std::vector<double> mode_amplitudes = {0.25, 1.0};
  int modes = 3;                       // cos(2 pi j k / N), j = 1..modes
  int random_starts = 0;               // uniform in [-2, 2]^N
  std::uint64_t seed = 0;
  double gradient_tol = 1e-10;
  double dedup_tol = 1e-6;
  int max_iterations = 200;
};

struct StartStatus {
  FieldState start;
  bool converged = false;
  int iterations = 0;
  double final_gradient_norm = 0.0;
};

struct CriticalPointSet {
  std::vector<CriticalPoint> points;
  std::vector<StartStatus> starts;
  double dedup_tol = 0.0;
};

namespace detail {

inline double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

/// Damped Newton on grad V = 0 with merit |grad V|^2 / 2.
inline StartStatus newton_critical(const LatticeParams& p, FieldState& x, const MultistartOptions& opt) {
  StartStatus st;
  st.start = x;
  const auto n = static_cast<Eigen::Index>(x.size());
  std::vector<double> g = gradient(p, x.values());
  double gnorm = norm2(g);
  for (int it = 0; it < opt.max_iterations; ++it) {
    st.iterations = it;
    if (gnorm <= opt.gradient_tol) {
      st.converged = true;
      break;
    }
    if (!std::isfinite(gnorm) || gnorm > 1e12) break;
    const Eigen::MatrixXd hess = hessian(p, x.values());
    const Eigen::Map<const Eigen::VectorXd> gv(g.data(), n);
    Eigen::VectorXd step = -hess.colPivHouseholderQr().solve(gv);
    if (!step.allFinite()) step = -hess.transpose() * gv;
    double t = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 40; ++ls) {
      FieldState trial = x;
      for (Eigen::Index i = 0; i < n; ++i) trial[static_cast<std::size_t>(i)] += t * step(i);
      std::vector<double> gt = gradient(p, trial.values());
      const double tn = norm2(gt);
      if (tn < gnorm * (1.0 - 1e-4 * t) || tn <= opt.gradient_tol) {
        x = std::move(trial);
        g = std::move(gt);
        gnorm = tn;
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) break;
  }
  st.converged = gnorm <= opt.gradient_tol;
  st.final_gradient_norm = gnorm;
  return st;
}

}  // namespace detail

/// Number of negative eigenvalues of Hess V_N(x).
inline int morse_index(const LatticeParams& p, std::span<const double> x) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hessian(p, x), Eigen::EigenvaluesOnly);
  int neg = 0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()(i) < 0.0) ++neg;
  return neg;
}

/// Newton multistart over constant states, single Fourier-mode perturbations of
/// constant states and optional uniform random starts; converged endpoints are
/// deduplicated by Euclidean distance.
inline CriticalPointSet find_critical_points(const LatticeParams& p, const MultistartOptions& opt = {}) {
  const std::size_t n = p.n_sites();
  std::vector<FieldState> starts;
  for (int i = 0; i < opt.constant_starts; ++i) {
    const double c = opt.constant_starts == 1 ? 0.0 : -2.0 + 4.0 * i / (opt.constant_starts - 1);
    starts.push_back(FieldState::constant(n, c));
  }
  if (n > 1) {
    for (int j = 1; j <= opt.modes; ++j) {
      for (double amp : opt.mode_amplitudes) {
        for (double c : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
          FieldState s = FieldState::constant(n, c);
          for (std::size_t k = 0; k < n; ++k)
            s[k] += amp * std::cos(2.0 * std::numbers::pi * j * static_cast<double>(k) / static_cast<double>(n));
          starts.push_back(std::move(s));
        }
      }
    }
  }
  Philox rng(opt.seed, 0);
  for (int i = 0; i < opt.random_starts; ++i) {
    FieldState s = FieldState::constant(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) s[k] = -2.0 + 4.0 * rng.uniform();
    starts.push_back(std::move(s));
  }

  CriticalPointSet out;
  out.dedup_tol = opt.dedup_tol;
  for (const FieldState& s : starts) {
    FieldState endpoint = s;
    StartStatus st = detail::newton_critical(p, endpoint, opt);
    if (st.converged) {
      bool duplicate = false;
      for (const CriticalPoint& cp : out.points) {
        double d2 = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double d = cp.point[k] - endpoint[k];
          d2 += d * d;
        }
        if (std::sqrt(d2) < opt.dedup_tol) {
          duplicate = true;
          break;
        }
      }
      if (!duplicate) {
        CriticalPoint cp;
        cp.gradient_norm = st.final_gradient_norm;
        cp.morse_index = morse_index(p, endpoint.values());
        cp.point = std::move(endpoint);
        out.points.push_back(std::move(cp));
      }
    }
    out.starts.push_back(std::move(st));
  }
  std::sort(out.points.begin(), out.points.end(),
            [](const CriticalPoint& a, const CriticalPoint& b) { return a.point.mean() < b.point.mean(); });
  return out;
}

// ---------------------------------------------------------------------------
// Eyring-Kramers prefactor

struct PrefactorReport {
  double p_n = 0.0;
  std::vector<double> hessian_eigs_min;     // 2 + nu_k
  std::vector<double> hessian_eigs_saddle;  // nu_k - 1
  double p_limit = 0.0;
};

/// N -> infinity limit sinh(pi sqrt(2/mu)) / (pi sin(pi / sqrt(mu))).
inline double prefactor_limit(double mu) {
  if (!(mu > 1.0)) throw DomainError("prefactor_limit: requires mu > 1");
  const double pi = std::numbers::pi;
  return std::sinh(pi * std::sqrt(2.0 / mu)) / (pi * std::sin(pi / std::sqrt(mu)));
}

/// p(N) = (1/pi) |det Hess V_N(I_+) / det Hess V_N(O)|^{1/2}, accumulated in log space.
inline PrefactorReport prefactor(const LatticeParams& p) {
  const KSpectrum spec = k_eigenvalues(p);
  PrefactorReport rep;
  double log_ratio = 0.0;
  for (double nu : spec.eigenvalues) {
    const double at_min = 2.0 + nu;
    const double at_saddle = nu - 1.0;
    if (std::abs(at_saddle) < 1e-12)
      throw DegenerateSaddleError("prefactor: saddle Hessian has a zero eigenvalue (nu_k = 1)");
    rep.hessian_eigs_min.push_back(at_min);
    rep.hessian_eigs_saddle.push_back(at_saddle);
    log_ratio += std::log(at_min) - std::log(std::abs(at_saddle));
  }
  rep.p_n = std::exp(0.5 * log_ratio) / std::numbers::pi;
  rep.p_limit = prefactor_limit(p.mu());
  return rep;
}

/// Kramers rate p(N) e^{-1/(4h)}.
inline double kramers_rate(const LatticeParams& p) {
  return prefactor(p).p_n * std::exp(-0.25 / p.h());
}

}  // namespace kramers
