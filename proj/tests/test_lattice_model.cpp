#include <catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <vector>

#include "kramers/lattice_model.hpp"
#include "kramers/rng.hpp"

using namespace kramers;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Dense circulant coupling matrix built entry by entry.
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

double oracle_energy(const std::vector<double>& x, double mu) {
  const Eigen::MatrixXd k = dense_coupling(x.size(), mu);
  const Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
  double quartic = 0.0;
  for (double xi : x) quartic += 0.25 * (xi * xi - 1.0) * (xi * xi - 1.0);
  return quartic + 0.5 * v.dot(k * v);
}

std::vector<double> random_state(std::size_t n, Philox& rng, double scale = 1.0) {
  std::vector<double> x(n);
  for (double& v : x) v = scale * rng.normal();
  return x;
}

}  // namespace

TEST_CASE("coupling eigenvalues match a dense circulant diagonalisation", "[lattice]") {
  for (std::size_t n : {1, 2, 3, 4, 7, 16, 33}) {
    const double mu = 2.5;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense_coupling(n, mu));
    std::vector<double> got = k_eigenvalues(LatticeParams(n, mu, 1.0)).eigenvalues;
    std::sort(got.begin(), got.end());
    REQUIRE(got.size() == n);
    for (std::size_t i = 0; i < n; ++i) CHECK_THAT(got[i], WithinAbs(es.eigenvalues()(static_cast<Eigen::Index>(i)), 1e-10));
  }
  CHECK_THAT(k_eigenvalue(2.0, 9, 1), WithinAbs(2.0, 1e-14));
  CHECK_THAT(k_eigenvalue(2.0, 9, 0), WithinAbs(0.0, 1e-14));
  CHECK_THAT(k_eigenvalue(2.0, 9, 4), WithinAbs(k_eigenvalue(2.0, 9, -4), 1e-14));
}

TEST_CASE("N = 4, mu = 2 coupling spectrum is (0, 2, 4, 2)", "[lattice]") {
  const auto ev = k_eigenvalues(LatticeParams(4, 2.0, 1.0)).eigenvalues;
  REQUIRE(ev.size() == 4);
  CHECK_THAT(ev[0], WithinAbs(0.0, 1e-14));
  CHECK_THAT(ev[1], WithinAbs(2.0, 1e-14));
  CHECK_THAT(ev[2], WithinAbs(4.0, 1e-14));
  CHECK_THAT(ev[3], WithinAbs(2.0, 1e-14));
  CHECK_THAT(k_eigenvalues(LatticeParams(4, 2.0, 1.0)).smallest_nonzero(), WithinAbs(2.0, 1e-14));
}

TEST_CASE("energy, gradient and Laplacian agree with dense and finite-difference oracles", "[lattice]") {
  Philox rng(3, 0);
  for (std::size_t n : {1, 2, 5, 12}) {
    const LatticeParams p(n, 1.7, 0.1);
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<double> x = random_state(n, rng);
      CHECK_THAT(energy(p, x), WithinRel(oracle_energy(x, 1.7), 1e-12));
      const std::vector<double> g = gradient(p, x);
      const double step = 1e-6;
      double lap_fd = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> up = x, dn = x;
        up[i] += step;
        dn[i] -= step;
        CHECK_THAT(g[i], WithinAbs((oracle_energy(up, 1.7) - oracle_energy(dn, 1.7)) / (2 * step), 1e-6));
        const double wide = 1e-4;
        up[i] = x[i] + wide;
        dn[i] = x[i] - wide;
        lap_fd += (oracle_energy(up, 1.7) - 2.0 * oracle_energy(x, 1.7) + oracle_energy(dn, 1.7)) / (wide * wide);
      }
      CHECK_THAT(energy_laplacian(p, x), WithinAbs(lap_fd, 1e-5 * std::max(1.0, std::abs(lap_fd))));
      const Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(n));
      CHECK_THAT(k_quadratic_form(p, x), WithinAbs(v.dot(dense_coupling(n, 1.7) * v), 1e-10));
    }
  }
}

TEST_CASE("k_trace is the trace of the coupling matrix", "[lattice]") {
  for (std::size_t n : {1, 2, 8, 31}) CHECK_THAT(k_trace(LatticeParams(n, 3.0, 1.0)), WithinAbs(dense_coupling(n, 3.0).trace(), 1e-10));
}

TEST_CASE("dense Hessian and matvec operator match the oracle", "[lattice]") {
  Philox rng(4, 0);
  const std::size_t n = 9;
  const LatticeParams p(n, 2.0, 0.1);
  const std::vector<double> x = random_state(n, rng);
  Eigen::MatrixXd oracle = dense_coupling(n, 2.0);
  for (std::size_t i = 0; i < n; ++i) oracle(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += 3.0 * x[i] * x[i] - 1.0;
  const Eigen::MatrixXd h = hessian(p, x);
  CHECK((h - oracle).cwiseAbs().maxCoeff() < 1e-12);
  const HessianOperator op(p, x);
  const std::vector<double> v = random_state(n, rng);
  std::vector<double> out(n);
  op.apply(v, out);
  const Eigen::VectorXd ref = oracle * Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) CHECK_THAT(out[i], WithinAbs(ref(static_cast<Eigen::Index>(i)), 1e-12));
}

TEST_CASE("energy is invariant under reflection and cyclic shift", "[lattice][property]") {
  Philox rng(5, 0);
  for (std::size_t n : {2, 3, 10, 64}) {
    const LatticeParams p(n, 4.0, 0.2);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> x = random_state(n, rng, 1.5);
      std::vector<double> neg(n), shifted(n);
      for (std::size_t i = 0; i < n; ++i) {
        neg[i] = -x[i];
        shifted[i] = x[(i + 1) % n];
      }
      CHECK_THAT(energy(p, neg), WithinRel(energy(p, x), 1e-13));
      CHECK_THAT(energy(p, shifted), WithinRel(energy(p, x), 1e-12));
    }
  }
}

TEST_CASE("wells and saddle values", "[lattice]") {
  for (std::size_t n : {1, 4, 17}) {
    const LatticeParams p(n, 2.0, 0.1);
    CHECK_THAT(energy(p, FieldState::constant(n, 1.0)), WithinAbs(0.0, 1e-14));
    CHECK_THAT(energy(p, FieldState::constant(n, -1.0)), WithinAbs(0.0, 1e-14));
    CHECK_THAT(energy(p, FieldState::constant(n, 0.0)), WithinAbs(0.25 * static_cast<double>(n), 1e-14));
    CHECK_THAT(p.noise(), WithinAbs(0.1 * static_cast<double>(n), 1e-15));
  }
}

TEST_CASE("Witten potential matches |grad V|^2/(4 eps) - Lap V/2", "[lattice]") {
  Philox rng(6, 0);
  const LatticeParams p(3, 2.0, 0.1);
  const double eps = 0.3;
  for (int trial = 0; trial < 10; ++trial) {
    const std::vector<double> x = random_state(3, rng);
    const std::vector<double> g = gradient(p, x);
    double g2 = 0.0;
    for (double v : g) g2 += v * v;
    const double lap = hessian(p, x).trace();
    CHECK_THAT(witten_potential(p, x), WithinAbs(g2 / (4.0 * eps) - 0.5 * lap, 1e-10));
  }
}

TEST_CASE("critical points: three constants for mu > 1", "[lattice]") {
  SECTION("N = 1") {
    const auto set = find_critical_points(LatticeParams(1, 2.0, 0.1));
    REQUIRE(set.points.size() == 3);
    CHECK_THAT(set.points[0].point[0], WithinAbs(-1.0, 1e-10));
    CHECK_THAT(set.points[1].point[0], WithinAbs(0.0, 1e-10));
    CHECK_THAT(set.points[2].point[0], WithinAbs(1.0, 1e-10));
    CHECK(set.points[0].morse_index == 0);
    CHECK(set.points[1].morse_index == 1);
    CHECK(set.points[2].morse_index == 0);
  }
  SECTION("N = 8, mu = 2") {
    const auto set = find_critical_points(LatticeParams(8, 2.0, 0.1));
    REQUIRE(set.points.size() == 3);
    CHECK_THAT(set.points[0].point.mean(), WithinAbs(-1.0, 1e-10));
    CHECK(set.points[1].morse_index == 1);
    for (const auto& cp : set.points) CHECK(cp.gradient_norm <= 1e-10);
  }
}

TEST_CASE("prefactor equals the dense determinant ratio", "[lattice]") {
  for (std::size_t n : {1, 2, 3, 6, 20}) {
    const LatticeParams p(n, 2.0, 0.1);
    const double det_min = hessian(p, std::vector<double>(n, 1.0)).determinant();
    const double det_saddle = hessian(p, std::vector<double>(n, 0.0)).determinant();
    CHECK_THAT(prefactor(p).p_n, WithinRel(std::sqrt(std::abs(det_min / det_saddle)) / std::numbers::pi, 1e-10));
  }
  CHECK_THAT(prefactor(LatticeParams(1, 2.0, 0.1)).p_n, WithinRel(std::sqrt(2.0) / std::numbers::pi, 1e-14));
  CHECK_THAT(kramers_rate(LatticeParams(1, 2.0, 0.1)), WithinRel(std::sqrt(2.0) / std::numbers::pi * std::exp(-2.5), 1e-14));
}

TEST_CASE("prefactor converges to its limit", "[lattice]") {
  for (double mu : {1.5, 2.0, 4.0}) {
    const double lim = prefactor_limit(mu);
    double prev_gap = 1e300;
    for (std::size_t n : {16, 64, 256, 1024, 4097}) {
      const double gap = std::abs(prefactor(LatticeParams(n, mu, 1.0)).p_n - lim) / lim;
      CHECK(gap < prev_gap);
      prev_gap = gap;
    }
    CHECK(prev_gap <= 1e-2);
  }
}

TEST_CASE("parameter validation", "[lattice][errors]") {
  CHECK_THROWS_AS(LatticeParams(4, 1.0, 0.1), ContractError);
  CHECK_THROWS_AS(LatticeParams(4, 0.5, 0.1), ContractError);
  CHECK_THROWS_AS(LatticeParams(0, 2.0, 0.1), ContractError);
  CHECK_THROWS_AS(LatticeParams(4, 2.0, 0.0), ContractError);
  CHECK_THROWS_AS(LatticeParams(4, 2.0, 0.1, -1.0), ContractError);
  CHECK_THROWS_AS(energy(LatticeParams(4, 2.0, 0.1), std::vector<double>(3, 0.0)), ContractError);
  CHECK_THROWS_AS(prefactor_limit(1.0), DomainError);
}
