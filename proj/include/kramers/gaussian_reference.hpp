#pragma once

// Closed-form Gaussian layer: partition-function ratios and fourth moments on the
// mean-zero sector, the discrete lattice covariance with mass m, sigma_N(k), and
// exact Fourier-space samplers for both Gaussians.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <numbers>
#include <string>
#include <vector>

#include "kramers/errors.hpp"
#include "kramers/lattice_model.hpp"
#include "kramers/rng.hpp"

namespace kramers {

namespace detail {

/// Orthonormal real Fourier basis of R^N, column j = mode; column 0 is the constant.
/// Modes 1..N-1 are ordered (cos 1, sin 1, cos 2, sin 2, ..., [alternating if N even]),
/// and `wavenumber` reports k for each column.
struct RealFourierBasis {
  Eigen::MatrixXd vectors;
  std::vector<std::size_t> wavenumber;

  explicit RealFourierBasis(std::size_t n) : vectors(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) {
    const double nn = static_cast<double>(n);
    const auto ni = static_cast<Eigen::Index>(n);
    Eigen::Index col = 0;
    vectors.col(col++).setConstant(1.0 / std::sqrt(nn));
    wavenumber.push_back(0);
    for (std::size_t k = 1; 2 * k < n; ++k) {
      for (int phase = 0; phase < 2; ++phase) {
        for (Eigen::Index j = 0; j < ni; ++j) {
          const double arg = 2.0 * std::numbers::pi * static_cast<double>(k) * static_cast<double>(j) / nn;
          vectors(j, col) = std::sqrt(2.0 / nn) * (phase == 0 ? std::cos(arg) : std::sin(arg));
        }
        wavenumber.push_back(k);
        ++col;
      }
    }
    if (n % 2 == 0 && n > 1) {
      for (Eigen::Index j = 0; j < ni; ++j) vectors(j, col) = (j % 2 == 0 ? 1.0 : -1.0) / std::sqrt(nn);
      wavenumber.push_back(n / 2);
      ++col;
    }
  }
};

inline void check_shift(const LatticeParams& p, double t, const char* what) {
  if (!(t > -(p.mu() - 1.0))) throw DomainError(std::string(what) + ": shift must exceed -(mu - 1)");
}

}  // namespace detail

/// Centered Gaussian on {xbar = 0} with density proportional to
/// exp(-<y, (K - 1 + t) y> / (2N)), i.e. Fourier precisions (nu_k - 1 + t) / N.
class MeanZeroGaussian {
 public:
  MeanZeroGaussian(LatticeParams p, double t) : params_(std::move(p)), shift_(t) {
    detail::check_shift(params_, t, "MeanZeroGaussian");
    const KSpectrum spec = k_eigenvalues(params_);
    for (std::size_t k = 1; k < spec.eigenvalues.size(); ++k) precisions_.push_back(spec.eigenvalues[k] - 1.0 + t);
  }

  const LatticeParams& params() const { return params_; }
  double shift() const { return shift_; }
  /// nu_k - 1 + t for k = 1..N-1.
  const std::vector<double>& precision_eigenvalues() const { return precisions_; }

  /// S = sum_k 1 / (nu_k - 1 + t) = E[P_2 / N] = Var(y_j).
  double trace_sum() const {
    double s = 0.0;
    for (double q : precisions_) s += 1.0 / q;
    return s;
  }

 private:
  LatticeParams params_;
  double shift_;
  std::vector<double> precisions_;
};

/// log(Z_N(t) / Z_N(t0)) = -1/2 sum_{k>=1} log((nu_k - 1 + t) / (nu_k - 1 + t0)).
inline double log_z_ratio(const LatticeParams& p, double t, double t0) {
  detail::check_shift(p, t, "log_z_ratio");
  detail::check_shift(p, t0, "log_z_ratio");
  const KSpectrum spec = k_eigenvalues(p);
  double s = 0.0;
  for (std::size_t k = 1; k < spec.eigenvalues.size(); ++k) {
    const double nu = spec.eigenvalues[k];
    s += std::log1p((t - t0) / (nu - 1.0 + t0));
  }
  return -0.5 * s;
}

/// E[P_4 / N] = 3 (1 + S)^2 - 3 - 6 S, with P_4 = sum_k y_k^4.
inline double fourth_moment_meanzero(const LatticeParams& p, double t) {
  const double s = MeanZeroGaussian(p, t).trace_sum();
  return 3.0 * (1.0 + s) * (1.0 + s) - 3.0 - 6.0 * s;
}

/// Exact sampler: independent real Fourier coefficients, transformed back.
class MeanZeroGaussianSampler {
 public:
  explicit MeanZeroGaussianSampler(const MeanZeroGaussian& g)
      : n_(g.params().n_sites()), basis_(g.params().n_sites()) {
    const KSpectrum spec = k_eigenvalues(g.params());
    const double nn = static_cast<double>(n_);
    const auto ni = static_cast<Eigen::Index>(n_);
    scaled_ = Eigen::MatrixXd(ni, ni > 0 ? ni - 1 : 0);
    for (Eigen::Index c = 1; c < ni; ++c) {
      const double q = spec.eigenvalues[basis_.wavenumber[static_cast<std::size_t>(c)]] - 1.0 + g.shift();
      scaled_.col(c - 1) = basis_.vectors.col(c) * std::sqrt(nn / q);
    }
  }

  FieldState draw(Philox& rng) const {
    Eigen::VectorXd z(scaled_.cols());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
    Eigen::VectorXd y = scaled_ * z;
    return FieldState(std::vector<double>(y.data(), y.data() + y.size()));
  }

  /// count draws as the columns of an N x count matrix.
  Eigen::MatrixXd draw_batch(Philox& rng, std::size_t count) const {
    Eigen::MatrixXd z(scaled_.cols(), static_cast<Eigen::Index>(count));
    for (Eigen::Index c = 0; c < z.cols(); ++c)
      for (Eigen::Index i = 0; i < z.rows(); ++i) z(i, c) = rng.normal();
    return scaled_ * z;
  }

 private:
  std::size_t n_;
  detail::RealFourierBasis basis_;
  Eigen::MatrixXd scaled_;
};

inline FieldState sample_meanzero_gaussian(const LatticeParams& p, double t, Philox& rng) {
  return MeanZeroGaussianSampler(MeanZeroGaussian(p, t)).draw(rng);
}

// ---------------------------------------------------------------------------
// Lattice Gaussian with mass m (odd N)

namespace detail {

inline void check_odd_with_mass(const LatticeParams& p, const char* what) {
  if (p.n_sites() % 2 == 0) throw ContractError(std::string(what) + ": N must be odd");
  if (!p.mass()) throw ContractError(std::string(what) + ": mass m must be set");
}

}  // namespace detail

/// E[x_j x_{j+k}] = h sum_{|l| <= (N-1)/2} cos(2 pi l k / N) / (m + nu_l) under the
/// Gaussian with density proportional to exp(-<x, (m + K) x> / (2hN)).
inline double lattice_covariance(const LatticeParams& p, long long offset) {
  detail::check_odd_with_mass(p, "lattice_covariance");
  const double m = *p.mass();
  const auto n = static_cast<long long>(p.n_sites());
  const long long half = (n - 1) / 2;
  const long long k = ((offset % n) + n) % n;
  double s = 0.0;
  for (long long l = -half; l <= half; ++l) {
    const double nu = k_eigenvalue(p.mu(), p.n_sites(), l);
    s += std::cos(2.0 * std::numbers::pi * static_cast<double>(l * k) / static_cast<double>(n)) / (m + nu);
  }
  return p.h() * s;
}

class LatticeGaussianSampler {
 public:
  explicit LatticeGaussianSampler(const LatticeParams& p) : basis_(p.n_sites()) {
    detail::check_odd_with_mass(p, "LatticeGaussianSampler");
    const auto ni = static_cast<Eigen::Index>(p.n_sites());
    scaled_ = Eigen::MatrixXd(ni, ni);
    for (Eigen::Index c = 0; c < ni; ++c) {
      const double nu = k_eigenvalue(p.mu(), p.n_sites(), static_cast<long long>(basis_.wavenumber[static_cast<std::size_t>(c)]));
      scaled_.col(c) = basis_.vectors.col(c) * std::sqrt(p.noise() / (*p.mass() + nu));
    }
  }

  FieldState draw(Philox& rng) const {
    Eigen::VectorXd z(scaled_.cols());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
    Eigen::VectorXd x = scaled_ * z;
    return FieldState(std::vector<double>(x.data(), x.data() + x.size()));
  }

  Eigen::MatrixXd draw_batch(Philox& rng, std::size_t count) const {
    Eigen::MatrixXd z(scaled_.cols(), static_cast<Eigen::Index>(count));
    for (Eigen::Index c = 0; c < z.cols(); ++c)
      for (Eigen::Index i = 0; i < z.rows(); ++i) z(i, c) = rng.normal();
    return scaled_ * z;
  }

 private:
  detail::RealFourierBasis basis_;
  Eigen::MatrixXd scaled_;
};

/// sigma_N(k) = ((m + mu k^2) / (m + nu_{k,N}))^{1/2} for |k| <= (N-1)/2, else 0.
inline double sigma_n(double mu, double m, std::size_t n_sites, long long k) {
  if (n_sites % 2 == 0) throw ContractError("sigma_n: N must be odd");
  detail::require(m > 0.0, "sigma_n: m must be > 0");
  detail::require(mu > 1.0, "sigma_n: mu must be > 1");
  const long long half = (static_cast<long long>(n_sites) - 1) / 2;
  if (std::llabs(k) > half) return 0.0;
  const double kk = static_cast<double>(k);
  return std::sqrt((m + mu * kk * kk) / (m + k_eigenvalue(mu, n_sites, k)));
}

}  // namespace kramers
