#include <catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <numbers>
#include <vector>

#include "kramers/potentials.hpp"
#include "kramers/spectral_solver.hpp"

using namespace kramers;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Dense fourth-order finite-difference Witten operator for the scalar double well,
// diagonalised directly.
std::vector<double> dense_witten_oracle(double h, double half_width, int n) {
  const double eps = h;
  const double dx = 2.0 * half_width / (n + 1);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  const double c0 = 30.0 / 12.0, c1 = -16.0 / 12.0, c2 = 1.0 / 12.0;
  for (int i = 0; i < n; ++i) {
    const double x = -half_width + (i + 1) * dx;
    const double g = x * x * x - x;
    const double lap = 3.0 * x * x - 1.0;
    a(i, i) = eps * c0 / (dx * dx) + g * g / (4.0 * eps) - 0.5 * lap;
    if (i + 1 < n) a(i, i + 1) = a(i + 1, i) = eps * c1 / (dx * dx);
    if (i + 2 < n) a(i, i + 2) = a(i + 2, i) = eps * c2 / (dx * dx);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
  return {es.eigenvalues()(0), es.eigenvalues()(1), es.eigenvalues()(2)};
}

SparseMatrix dirichlet_laplacian(int n) {
  std::vector<Eigen::Triplet<double>> t;
  for (int i = 0; i < n; ++i) {
    t.emplace_back(i, i, 2.0);
    if (i + 1 < n) {
      t.emplace_back(i, i + 1, -1.0);
      t.emplace_back(i + 1, i, -1.0);
    }
  }
  SparseMatrix a(n, n);
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

}  // namespace

TEST_CASE("Lanczos recovers the Dirichlet Laplacian spectrum", "[spectral]") {
  const int n = 500;
  const auto rep = lowest_eigenvalues(dirichlet_laplacian(n), 4);
  for (int k = 1; k <= 4; ++k)
    CHECK_THAT(rep.eigenvalues[static_cast<std::size_t>(k - 1)],
               WithinRel(2.0 - 2.0 * std::cos(k * std::numbers::pi / (n + 1)), 1e-9));
  for (double r : rep.residual_norms) CHECK(r < 1e-8);
}

TEST_CASE("Lanczos reports non-convergence", "[spectral][errors]") {
  LanczosOptions opt;
  opt.max_iterations = 3;
  opt.tol = 1e-15;
  CHECK_THROWS_AS(lowest_eigenvalues(dirichlet_laplacian(400), 3, opt), SolverError);
}

TEST_CASE("Ornstein-Uhlenbeck generator has eigenvalues k a", "[spectral]") {
  const double a = 1.5, eps = 0.2;
  const HarmonicWell ou(1, a);
  const GridSpec g = make_grid(ou, eps, 1000);
  const auto ex = extrapolated_spectrum([&](const GridSpec& s) { return build_generator_operator(ou, eps, s); }, g, 3);
  CHECK_THAT(ex.eigenvalues[0], WithinAbs(0.0, 1e-8));
  CHECK_THAT(ex.eigenvalues[1], WithinRel(a, 1e-6));
  CHECK_THAT(ex.eigenvalues[2], WithinRel(2.0 * a, 1e-6));
  const auto w = extrapolated_spectrum([&](const GridSpec& s) { return build_witten_operator(ou, eps, s); }, g, 3);
  CHECK_THAT(w.eigenvalues[1], WithinRel(a, 1e-6));
}

TEST_CASE("two-dimensional OU spectrum is {0, a, a, 2a}", "[spectral]") {
  const double a = 1.0, eps = 0.3;
  const HarmonicWell ou(2, a);
  const GridSpec g = make_grid(ou, eps, 120);
  const auto ex = extrapolated_spectrum([&](const GridSpec& s) { return build_generator_operator(ou, eps, s); }, g, 4);
  CHECK_THAT(ex.eigenvalues[1], WithinRel(a, 1e-4));
  CHECK_THAT(ex.eigenvalues[2], WithinRel(a, 1e-4));
  CHECK_THAT(ex.eigenvalues[3], WithinRel(2.0 * a, 1e-4));
}

TEST_CASE("scalar double well agrees with a dense fourth-order oracle", "[spectral]") {
  for (double h : {0.14, 0.1}) {
    const LatticeParams p(1, 2.0, h);
    const GridSpec g = make_grid(p, 2000);
    const auto rep = lowest_eigenvalues(build_generator_operator(p, g), 3);
    const auto oracle = dense_witten_oracle(h, g.half_width, 1500);
    CHECK(std::abs(rep.lam0()) <= 1e-8);
    CHECK_THAT(rep.lam1(), WithinRel(oracle[1], 1e-4));
    CHECK_THAT(rep.lam2(), WithinRel(oracle[2], 1e-4));
  }
}

TEST_CASE("generator and Witten forms agree after extrapolation", "[spectral]") {
  const LatticeParams p(1, 2.0, 0.1);
  const GridSpec g = make_grid(p, 2000);
  const auto gen = extrapolated_spectrum([&](const GridSpec& s) { return build_generator_operator(p, s); }, g, 3);
  const auto wit = extrapolated_spectrum([&](const GridSpec& s) { return build_witten_operator(p, s); }, g, 3);
  CHECK_THAT(gen.eigenvalues[1], WithinRel(wit.eigenvalues[1], 1e-6));
  CHECK_THAT(gen.eigenvalues[2], WithinRel(wit.eigenvalues[2], 1e-6));
}

TEST_CASE("generator structure: zero row sums, detailed balance, parity", "[spectral][property]") {
  const LatticeParams p(2, 2.0, 0.1);
  const GridOperator op = build_generator_operator(p, make_grid(p, 60));
  const SparseMatrix l = op.generator_matrix();
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(l.cols());
  CHECK((l * ones).cwiseAbs().maxCoeff() < 1e-9 * (op.eps / std::pow(op.nodes.grid.spacing(), 2)));
  CHECK((SparseMatrix(op.matrix.transpose()) - op.matrix).norm() == 0.0);

  LanczosOptions opt;
  opt.want_vectors = true;
  const auto rep = lowest_eigenvalues(op, 3, opt);
  CHECK(std::abs(rep.lam0()) < 1e-8);
  CHECK_THAT(reflection_parity(op, rep.eigenvectors[0]), WithinAbs(1.0, 1e-6));
  CHECK_THAT(reflection_parity(op, rep.eigenvectors[1]), WithinAbs(-1.0, 1e-6));
}

TEST_CASE("Kramers comparison and grid policy", "[spectral]") {
  const LatticeParams p(1, 2.0, 0.1);
  const auto rep = double_well_spectrum(p);
  CHECK_THAT(kramers_compare(p, rep), WithinAbs(rep.lam1() / kramers_rate(p) - 1.0, 1e-15));
  CHECK(std::abs(kramers_compare(p, rep)) < 0.15);
  CHECK(rep.grid.has_value());
  CHECK(rep.grid->points_per_dim == 2000);
  const auto rows = gap_uniformity_scan(2.0, {0.2, 0.1}, {1});
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].lam1 < rows[0].lam1);
  CHECK(rows[0].lam2 > 0.5);
}

TEST_CASE("grid contracts and memory budget", "[spectral][errors]") {
  CHECK_THROWS_AS(build_generator_operator(LatticeParams(4, 2.0, 0.1), GridSpec{3, 2.0, 10, std::nullopt}), ContractError);
  CHECK_THROWS_AS(ResolutionPolicy{}.grid_for(LatticeParams(5, 2.0, 0.1)), ContractError);
  const LatticeParams p3(3, 2.0, 0.1);
  CHECK_THROWS_AS(build_generator_operator(p3, make_grid(p3, 2000)), SizeError);
  MemoryBudget tiny{1e5};
  const LatticeParams p2(2, 2.0, 0.1);
  CHECK_THROWS_AS(build_witten_operator(p2, make_grid(p2, 200), tiny), SizeError);
}

TEST_CASE("grid half-width meets the face condition", "[spectral]") {
  for (std::size_t n : {1, 2, 3}) {
    const LatticeParams p(n, 2.0, 0.1);
    const GridSpec g = make_grid(p, 50);
    std::vector<double> corner(n, 0.0);
    corner[0] = g.half_width;
    CHECK(energy(p, corner) / p.noise() >= kFaceExponent - 1e-6);
    corner[0] = g.half_width * 0.98;
    if (n == 1) CHECK(energy(p, corner) / p.noise() < kFaceExponent);
  }
}
