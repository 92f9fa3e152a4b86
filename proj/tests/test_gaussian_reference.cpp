#include <catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "kramers/gaussian_reference.hpp"
#include "kramers/inequalities.hpp"

using namespace kramers;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Eigen::MatrixXd dense_coupling(std::size_t n, double mu) {
  const auto ni = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(ni, ni);
  if (n == 1) return k;
  const double s = std::sin(std::numbers::pi / static_cast<double>(n));
  const double c = mu / (4.0 * s * s);
  for (Eigen::Index i = 0; i < ni; ++i) {
    k(i, i) += 2.0 * c;
    k(i, (i + 1) % ni) -= c;
    k(i, (i + ni - 1) % ni) -= c;
  }
  return k;
}

// Precision of the mean-zero Gaussian, padded with the identity on constants.
Eigen::MatrixXd padded_precision(std::size_t n, double mu, double t) {
  const auto ni = static_cast<Eigen::Index>(n);
  const Eigen::MatrixXd proj = Eigen::MatrixXd::Constant(ni, ni, 1.0 / static_cast<double>(n));
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(ni, ni);
  return (eye - proj) * (dense_coupling(n, mu) + (t - 1.0) * eye) * (eye - proj) + proj;
}

// Covariance N * (K - 1 + t)^+ on the mean-zero sector.
Eigen::MatrixXd meanzero_covariance(std::size_t n, double mu, double t) {
  const auto ni = static_cast<Eigen::Index>(n);
  const Eigen::MatrixXd proj = Eigen::MatrixXd::Constant(ni, ni, 1.0 / static_cast<double>(n));
  const Eigen::MatrixXd inv = padded_precision(n, mu, t).inverse();
  return static_cast<double>(n) * (inv - proj);
}

}  // namespace

TEST_CASE("log Z ratio matches dense determinants", "[gaussian]") {
  for (std::size_t n : {2, 4, 7, 20}) {
    const LatticeParams p(n, 2.0, 1.0);
    for (auto [t, t0] : {std::pair{1.0, 0.0}, std::pair{-0.5, 2.0}, std::pair{3.0, 3.0}}) {
      const double oracle =
          -0.5 * (std::log(padded_precision(n, 2.0, t).determinant()) - std::log(padded_precision(n, 2.0, t0).determinant()));
      CHECK_THAT(log_z_ratio(p, t, t0), WithinAbs(oracle, 1e-11));
    }
  }
  const double ref = -0.5 * (std::log(2.0) + std::log(4.0 / 3.0) + std::log(2.0));
  CHECK_THAT(log_z_ratio(LatticeParams(4, 2.0, 1.0), 1.0, 0.0), WithinAbs(ref, 1e-14));
  CHECK(log_z_ratio(LatticeParams(9, 2.0, 1.0), 0.7, 0.7) == 0.0);
  CHECK_THROWS_AS(log_z_ratio(LatticeParams(4, 2.0, 1.0), -1.0, 0.0), DomainError);
}

TEST_CASE("log Z ratio: antisymmetry and the gamma lower bound", "[gaussian][property]") {
  Philox rng(13, 0);
  for (int i = 0; i < 100; ++i) {
    const auto n = static_cast<std::size_t>(2 + std::floor(rng.uniform() * 511.0));
    const double mu = 1.2 + 3.0 * rng.uniform();
    const LatticeParams p(n, mu, 1.0);
    const double lo = -(mu - 1.0);
    const double t = lo + 1e-3 + 5.0 * rng.uniform();
    const double t0 = lo + 1e-3 + 5.0 * rng.uniform();
    CHECK_THAT(log_z_ratio(p, t, t0), WithinAbs(-log_z_ratio(p, t0, t), 1e-12));
    const double gamma_t0 = gamma_sup(mu, t0 - 1.0).value;
    CHECK(log_z_ratio(p, t, t0) >= -0.5 * gamma_t0 * std::abs(t - t0) - 1e-12);
  }
}

TEST_CASE("fourth moment closed form against dense covariance", "[gaussian]") {
  CHECK_THAT(fourth_moment_meanzero(LatticeParams(4, 2.0, 1.0), 0.0), WithinAbs(49.0 / 3.0, 1e-12));
  CHECK_THAT(fourth_moment_meanzero(LatticeParams(4, 2.0, 1.0), 1e12), WithinAbs(0.0, 1e-9));
  for (std::size_t n : {3, 8, 25}) {
    for (double t : {0.0, 3.0}) {
      const Eigen::MatrixXd c = meanzero_covariance(n, 1.5, t);
      const double oracle = 3.0 * c.diagonal().array().square().mean();
      CHECK_THAT(fourth_moment_meanzero(LatticeParams(n, 1.5, 1.0), t), WithinRel(oracle, 1e-10));
      CHECK_THAT(MeanZeroGaussian(LatticeParams(n, 1.5, 1.0), t).trace_sum(), WithinRel(c.diagonal().mean(), 1e-10));
    }
  }
}

TEST_CASE("fourth moment decreases in t", "[gaussian][property]") {
  const LatticeParams p(16, 2.0, 1.0);
  double prev = 1e300;
  for (double t = -0.9; t <= 10.0; t += 0.1) {
    const double v = fourth_moment_meanzero(p, t);
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("mean-zero sampler: exact centring and second moments", "[gaussian]") {
  const std::size_t n = 8;
  const LatticeParams p(n, 2.0, 1.0);
  const MeanZeroGaussianSampler sampler(MeanZeroGaussian(p, 0.5));
  Philox rng(17, 0);
  const std::size_t draws = 100000;
  const Eigen::MatrixXd y = sampler.draw_batch(rng, draws);
  for (Eigen::Index c = 0; c < 50; ++c) CHECK(std::abs(y.col(c).mean()) <= 1e-12);
  const Eigen::MatrixXd cov = meanzero_covariance(n, 2.0, 0.5);
  const Eigen::MatrixXd emp = y * y.transpose() / static_cast<double>(draws);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
    const Eigen::VectorXd row_mean = y.rowwise().mean();
    CHECK(std::abs(row_mean(i)) <= 4.0 * std::sqrt(cov(i, i) / static_cast<double>(draws)));
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(n); ++j) {
      const double se = std::sqrt((cov(i, i) * cov(j, j) + cov(i, j) * cov(i, j)) / static_cast<double>(draws));
      CHECK(std::abs(emp(i, j) - cov(i, j)) <= 3.0 * se + 1e-12);
    }
  }
  const FieldState one = sample_meanzero_gaussian(p, 0.5, rng);
  CHECK(std::abs(one.mean()) <= 1e-12);
}

TEST_CASE("lattice covariance matches h N (m + K)^{-1}", "[gaussian]") {
  for (std::size_t n : {1, 3, 9, 21}) {
    const LatticeParams p(n, 2.0, 0.1, 1.0);
    const auto ni = static_cast<Eigen::Index>(n);
    const Eigen::MatrixXd inv = (dense_coupling(n, 2.0) + Eigen::MatrixXd::Identity(ni, ni)).inverse();
    for (long long k = 0; k < static_cast<long long>(n); ++k) {
      CHECK_THAT(lattice_covariance(p, k), WithinAbs(0.1 * static_cast<double>(n) * inv(0, k), 1e-13));
      CHECK_THAT(lattice_covariance(p, k), WithinAbs(lattice_covariance(p, -k), 1e-15));
      CHECK_THAT(lattice_covariance(p, k), WithinAbs(lattice_covariance(p, static_cast<long long>(n) - k), 1e-15));
    }
  }
  CHECK_THROWS_AS(lattice_covariance(LatticeParams(8, 2.0, 0.1, 1.0), 0), ContractError);
  CHECK_THROWS_AS(lattice_covariance(LatticeParams(9, 2.0, 0.1), 0), ContractError);
}

TEST_CASE("lattice Gaussian sampler reproduces the covariance", "[gaussian]") {
  const LatticeParams p(9, 2.0, 0.1, 1.0);
  const LatticeGaussianSampler sampler(p);
  Philox rng(19, 0);
  const std::size_t draws = 200000;
  const Eigen::MatrixXd x = sampler.draw_batch(rng, draws);
  for (int k = 0; k < 5; ++k) {
    const Eigen::ArrayXd prod = x.row(0).array() * x.row(k).array();
    const double m = prod.mean();
    const double se = std::sqrt((prod - m).square().sum() / static_cast<double>(draws - 1) / static_cast<double>(draws));
    CHECK(std::abs(m - lattice_covariance(p, k)) <= 4.0 * se);
  }
}

TEST_CASE("sigma_N", "[gaussian]") {
  CHECK(sigma_n(2.0, 1.0, 9, 0) == 1.0);
  CHECK(sigma_n(2.0, 1.0, 9, 5) == 0.0);
  CHECK(sigma_n(2.0, 1.0, 9, -5) == 0.0);
  CHECK(sigma_n(2.0, 1.0, 9, 4) > 1.0);
  double prev = 1e300;
  for (std::size_t n : {9, 33, 129, 513}) {
    const double s = sigma_n(2.0, 1.0, n, 3);
    CHECK(std::abs(s - 1.0) < prev);
    prev = std::abs(s - 1.0);
  }
  CHECK(prev < 1e-3);
  double peak = 0.0;
  for (double m : {1.0, 5.0})
    for (double mu : {1.01, 2.0, 10.0})
      for (std::size_t n = 1; n <= 301; n += 10)
        for (long long k = -150; k <= 150; ++k) peak = std::max(peak, sigma_n(mu, m, n, k));
  CHECK(peak <= std::numbers::pi / 2.0);
  CHECK_THROWS_AS(sigma_n(2.0, 1.0, 8, 1), ContractError);
}
