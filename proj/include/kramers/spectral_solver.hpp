#pragma once

// Tensor-grid discretisations of the diffusion generator -eps Lap + grad V . grad
// (finite-volume, symmetrised) and of the Witten operator -eps Lap + W, with
// eps = hN, plus a shift-invert Lanczos solver for the bottom of the spectrum.

#include <Eigen/CholmodSupport>
#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "kramers/errors.hpp"
#include "kramers/grid.hpp"
#include "kramers/lattice_model.hpp"
#include "kramers/potentials.hpp"
#include "kramers/rng.hpp"

namespace kramers {

enum class OperatorForm { generator, witten };

inline const char* to_string(OperatorForm f) { return f == OperatorForm::generator ? "generator" : "witten"; }

using SparseMatrix = Eigen::SparseMatrix<double>;

/// A discretised operator in symmetric form together with its grid.
/// For the generator, `matrix` is S = D^{1/2} L D^{-1/2} with D = diag(e^{-V/eps});
/// `sqrt_weight` holds D^{1/2} so that L itself can be recovered.
struct GridOperator {
  SparseMatrix matrix;
  OperatorForm form = OperatorForm::generator;
  GridNodes nodes;
  double eps = 0.0;
  std::vector<double> sqrt_weight;

  std::size_t size() const { return static_cast<std::size_t>(matrix.rows()); }

  /// The unsymmetrised generator L = D^{-1/2} S D^{1/2} (rows sum to zero).
  SparseMatrix generator_matrix() const {
    detail::require(form == OperatorForm::generator, "generator_matrix: operator is not a generator");
    SparseMatrix l = matrix;
    for (Eigen::Index col = 0; col < l.outerSize(); ++col)
      for (SparseMatrix::InnerIterator it(l, col); it; ++it)
        it.valueRef() *= sqrt_weight[static_cast<std::size_t>(it.col())] / sqrt_weight[static_cast<std::size_t>(it.row())];
    return l;
  }
};

struct MemoryBudget {
  double bytes = 3.0e9;
};

/// Rough peak memory of assembling and factorising a (2d+1)-point operator on
/// `unknowns` nodes, calibrated on nested-dissection fill for 7-point stencils.
inline double estimate_factor_bytes(int dims, std::size_t unknowns) {
  const double n = static_cast<double>(unknowns);
  switch (dims) {
    case 1: return 200.0 * n;
    case 2: return 8.0 * n * (40.0 + 4.0 * std::log2(std::max(n, 2.0)));
    default: return 80.0 * std::pow(n, 4.0 / 3.0);
  }
}

namespace detail {

inline void check_budget(const GridSpec& grid, std::size_t unknowns, const MemoryBudget& budget) {
  const double need = estimate_factor_bytes(grid.dims, unknowns);
  if (need > budget.bytes)
    throw SizeError("grid with " + std::to_string(unknowns) + " unknowns needs about " +
                    std::to_string(static_cast<long long>(need / 1e6)) + " MB, budget is " +
                    std::to_string(static_cast<long long>(budget.bytes / 1e6)) + " MB");
}

/// Node enumeration itself stores ~24 bytes per full-grid node.
inline void check_index_budget(const GridSpec& grid, const MemoryBudget& budget) {
  const double need = 24.0 * static_cast<double>(grid.full_size());
  if (need > budget.bytes)
    throw SizeError("grid with " + std::to_string(grid.full_size()) + " nodes exceeds the memory budget");
}

inline void check_grid(int dims, const GridSpec& grid) {
  detail::require(grid.dims >= 1 && grid.dims <= 3, "grid: dims must be 1, 2 or 3");
  detail::require(grid.dims == dims, "grid: dims must equal the potential's dimension");
  detail::require(grid.points_per_dim >= 3 && grid.half_width > 0.0, "grid: invalid resolution or width");
}

/// Calls fn(active_i, active_j) for each grid edge with both ends active, j > i along axis.
template <class Fn>
void for_each_edge(const GridNodes& nodes, Fn&& fn) {
  const GridIndexer ix{nodes.grid.dims, nodes.grid.points_per_dim};
  for (std::size_t a = 0; a < nodes.size(); ++a) {
    auto idx = ix.unflatten(nodes.full_index[a]);
    for (int k = 0; k < nodes.grid.dims; ++k) {
      auto& c = idx[static_cast<std::size_t>(k)];
      if (c + 1 >= nodes.grid.points_per_dim) continue;
      ++c;
      const std::int64_t b = nodes.active_index[ix.flatten(idx)];
      --c;
      if (b >= 0) fn(a, static_cast<std::size_t>(b));
    }
  }
}

}  // namespace detail

/// Generator -eps Lap + grad V . grad as a finite-volume Markov generator:
/// edge conductances exp(-(V_i + V_j) / (2 eps)), no flux across the box faces
/// or into pruned nodes. Symmetric form: off-diagonal -eps/dx^2, diagonal
/// (eps/dx^2) sum_j exp(-(V_j - V_i) / (2 eps)).
template <Potential P>
GridOperator build_generator_operator(const P& pot, double eps, const GridSpec& grid,
                                      const MemoryBudget& budget = {}) {
  detail::require(eps > 0.0, "build_generator_operator: eps must be > 0");
  detail::check_grid(static_cast<int>(pot.dimension()), grid);
  detail::check_index_budget(grid, budget);
  GridOperator op;
  op.form = OperatorForm::generator;
  op.eps = eps;
  op.nodes = enumerate_nodes(pot, eps, grid);
  detail::check_budget(grid, op.nodes.size(), budget);
  const double dx = grid.spacing();
  const double scale = eps / (dx * dx);
  const auto& v = op.nodes.potential;
  std::vector<double> diag(op.nodes.size(), 0.0);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(op.nodes.size() * static_cast<std::size_t>(2 * grid.dims + 1));
  detail::for_each_edge(op.nodes, [&](std::size_t a, std::size_t b) {
    trip.emplace_back(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b), -scale);
    trip.emplace_back(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a), -scale);
    diag[a] += scale * std::exp(-(v[b] - v[a]) / (2.0 * eps));
    diag[b] += scale * std::exp(-(v[a] - v[b]) / (2.0 * eps));
  });
  for (std::size_t a = 0; a < diag.size(); ++a)
    trip.emplace_back(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a), diag[a]);
  const auto n = static_cast<Eigen::Index>(op.nodes.size());
  op.matrix.resize(n, n);
  op.matrix.setFromTriplets(trip.begin(), trip.end());
  op.sqrt_weight.resize(op.nodes.size());
  for (std::size_t a = 0; a < v.size(); ++a) op.sqrt_weight[a] = std::exp(-v[a] / (2.0 * eps));
  return op;
}

/// Witten operator -eps Lap + W, W = |grad V|^2 / (4 eps) - Lap V / 2, second-order
/// central differences with zero Dirichlet data outside the active nodes.
template <Potential P>
GridOperator build_witten_operator(const P& pot, double eps, const GridSpec& grid,
                                   const MemoryBudget& budget = {}) {
  detail::require(eps > 0.0, "build_witten_operator: eps must be > 0");
  detail::check_grid(static_cast<int>(pot.dimension()), grid);
  detail::check_index_budget(grid, budget);
  GridOperator op;
  op.form = OperatorForm::witten;
  op.eps = eps;
  op.nodes = enumerate_nodes(pot, eps, grid);
  detail::check_budget(grid, op.nodes.size(), budget);
  const double dx = grid.spacing();
  const double scale = eps / (dx * dx);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(op.nodes.size() * static_cast<std::size_t>(2 * grid.dims + 1));
  detail::for_each_edge(op.nodes, [&](std::size_t a, std::size_t b) {
    trip.emplace_back(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b), -scale);
    trip.emplace_back(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a), -scale);
  });
  std::vector<double> x(static_cast<std::size_t>(grid.dims));
  for (std::size_t a = 0; a < op.nodes.size(); ++a) {
    const auto pos = op.nodes.position(a);
    for (int k = 0; k < grid.dims; ++k) x[static_cast<std::size_t>(k)] = pos[static_cast<std::size_t>(k)];
    const double w = witten_potential(pot, eps, x);
    trip.emplace_back(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a), 2.0 * grid.dims * scale + w);
  }
  const auto n = static_cast<Eigen::Index>(op.nodes.size());
  op.matrix.resize(n, n);
  op.matrix.setFromTriplets(trip.begin(), trip.end());
  return op;
}

inline GridOperator build_generator_operator(const LatticeParams& p, const GridSpec& grid,
                                             const MemoryBudget& budget = {}) {
  if (p.n_sites() > 3) throw ContractError("build_generator_operator: N must be 1, 2 or 3");
  return build_generator_operator(LatticeEnergy(p), p.noise(), grid, budget);
}

inline GridOperator build_witten_operator(const LatticeParams& p, const GridSpec& grid,
                                          const MemoryBudget& budget = {}) {
  if (p.n_sites() > 3) throw ContractError("build_witten_operator: N must be 1, 2 or 3");
  return build_witten_operator(LatticeEnergy(p), p.noise(), grid, budget);
}

// ---------------------------------------------------------------------------
// Shift-invert Lanczos

struct LanczosOptions {
  double shift = -1e-8;
  double tol = 1e-10;          // relative accuracy of each Ritz value of (A - shift)^{-1}
  int max_iterations = 120;    // Krylov dimension cap
  bool want_vectors = false;
  std::uint64_t seed = 0x5eedULL;
};

struct SpectralReport {
  std::vector<double> eigenvalues;     // ascending
  std::vector<double> residual_norms;  // |A y - lambda y| / |A|_inf
  std::vector<Eigen::VectorXd> eigenvectors;
  std::optional<GridSpec> grid;
  OperatorForm operator_form = OperatorForm::generator;
  double shift = 0.0;
  int iterations = 0;
  std::size_t unknowns = 0;

  double lam(std::size_t i) const {
    return i < eigenvalues.size() ? eigenvalues[i] : std::numeric_limits<double>::quiet_NaN();
  }
  double lam0() const { return lam(0); }
  double lam1() const { return lam(1); }
  double lam2() const { return lam(2); }
};

namespace detail {

inline double inf_norm(const SparseMatrix& a) {
  Eigen::VectorXd rows = Eigen::VectorXd::Zero(a.rows());
  for (Eigen::Index col = 0; col < a.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(a, col); it; ++it) rows(it.row()) += std::abs(it.value());
  return rows.size() ? rows.maxCoeff() : 0.0;
}

}  // namespace detail

/// The `count` smallest eigenvalues of a symmetric sparse matrix. Lanczos with full
/// reorthogonalisation runs on (A - shift I)^{-1}, factorised by supernodal
/// Cholesky; if A - shift I is not positive definite the shift is lowered to
/// shift - 1e-6 * 10^k, k = 0, 1, ... The start vector is drawn from Philox(seed).
inline SpectralReport lowest_eigenvalues(const SparseMatrix& a, int count, const LanczosOptions& opt = {}) {
  detail::require(a.rows() == a.cols(), "lowest_eigenvalues: matrix must be square");
  detail::require(count >= 1 && count <= a.rows(), "lowest_eigenvalues: count out of range");
  const Eigen::Index n = a.rows();

  SparseMatrix id(n, n);
  id.setIdentity();
  Eigen::CholmodSupernodalLLT<SparseMatrix> chol;
  chol.cholmod().print = 0;
  double shift = opt.shift;
  bool factored = false;
  for (int k = -1; k < 12 && !factored; ++k) {
    shift = k < 0 ? opt.shift : opt.shift - 1e-6 * std::pow(10.0, k);
    const SparseMatrix shifted = a - shift * id;
    chol.compute(shifted);
    factored = chol.info() == Eigen::Success;
  }
  if (!factored) throw SolverError("lowest_eigenvalues: no positive definite shift found", {}, {});

  const int m_max = static_cast<int>(std::min<Eigen::Index>(n, opt.max_iterations));
  Eigen::MatrixXd basis(n, m_max);
  std::vector<double> alpha;
  std::vector<double> beta;  // beta[j] couples basis j and j+1
  Philox rng(opt.seed, 0);
  auto random_unit = [&](int filled) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.uniform() - 0.5;
    for (int pass = 0; pass < 2; ++pass)
      for (int j = 0; j < filled; ++j) v -= basis.col(j).dot(v) * basis.col(j);
    return Eigen::VectorXd(v / v.norm());
  };

  basis.col(0) = random_unit(0);
  const double a_norm = std::max(detail::inf_norm(a), std::numeric_limits<double>::min());
  Eigen::VectorXd theta;
  Eigen::MatrixXd ritz;
  std::vector<double> estimates;
  int m = 0;
  bool converged = false;
  for (int j = 0; j < m_max; ++j) {
    Eigen::VectorXd w = chol.solve(basis.col(j));
    const double aj = basis.col(j).dot(w);
    alpha.push_back(aj);
    for (int pass = 0; pass < 2; ++pass)
      for (int i = 0; i <= j; ++i) w -= basis.col(i).dot(w) * basis.col(i);
    double bj = w.norm();
    m = j + 1;

    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) t(i, i) = alpha[static_cast<std::size_t>(i)];
    for (int i = 0; i + 1 < m; ++i) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    theta = es.eigenvalues();
    ritz = es.eigenvectors();

    const bool breakdown = bj <= 1e-12 * std::abs(aj);
    if (m >= count) {
      estimates.assign(static_cast<std::size_t>(count), 0.0);
      converged = true;
      for (int i = 0; i < count; ++i) {
        const Eigen::Index col = m - 1 - i;
        const double est = breakdown ? 0.0 : std::abs(bj * ritz(m - 1, col));
        estimates[static_cast<std::size_t>(i)] = est / std::abs(theta(col));
        if (estimates[static_cast<std::size_t>(i)] > opt.tol) converged = false;
      }
      if (converged) break;
    }
    if (j + 1 >= m_max) break;
    if (breakdown) {
      // invariant subspace: continue in a fresh direction
      basis.col(j + 1) = random_unit(j + 1);
      beta.push_back(0.0);
    } else {
      basis.col(j + 1) = w / bj;
      beta.push_back(bj);
    }
  }

  SpectralReport rep;
  rep.shift = shift;
  rep.iterations = m;
  rep.unknowns = static_cast<std::size_t>(n);
  const int found = std::min(count, m);
  for (int i = 0; i < found; ++i) {
    const Eigen::Index col = m - 1 - i;
    const double lambda = shift + 1.0 / theta(col);
    Eigen::VectorXd y = basis.leftCols(m) * ritz.col(col);
    y.normalize();
    const double res = (a * y - lambda * y).norm() / a_norm;
    rep.eigenvalues.push_back(lambda);
    rep.residual_norms.push_back(res);
    if (opt.want_vectors) rep.eigenvectors.push_back(std::move(y));
  }
  if (!converged || found < count)
    throw SolverError("lowest_eigenvalues: Lanczos did not converge in " + std::to_string(m) + " steps",
                      rep.eigenvalues, estimates);
  return rep;
}

inline SpectralReport lowest_eigenvalues(const GridOperator& op, int count, const LanczosOptions& opt = {}) {
  SpectralReport rep = lowest_eigenvalues(op.matrix, count, opt);
  rep.grid = op.nodes.grid;
  rep.operator_form = op.form;
  return rep;
}

/// Eigenvalues on `grid` and on the grid with 2n+1 points (spacing halved),
/// combined as (4 fine - coarse) / 3 to cancel the O(dx^2) error.
struct ExtrapolatedSpectrum {
  SpectralReport coarse;
  SpectralReport fine;
  std::vector<double> eigenvalues;
};

template <class Build>
ExtrapolatedSpectrum extrapolated_spectrum(Build&& build, const GridSpec& grid, int count,
                                           const LanczosOptions& opt = {}) {
  ExtrapolatedSpectrum out;
  out.coarse = lowest_eigenvalues(build(grid), count, opt);
  GridSpec fine = grid;
  fine.points_per_dim = 2 * grid.points_per_dim + 1;
  out.fine = lowest_eigenvalues(build(fine), count, opt);
  for (int i = 0; i < count; ++i)
    out.eigenvalues.push_back((4.0 * out.fine.lam(static_cast<std::size_t>(i)) - out.coarse.lam(static_cast<std::size_t>(i))) / 3.0);
  return out;
}

/// <v, Rv> / <v, v> for the reflection R: x -> -x of the grid; +1 for even and -1
/// for odd grid functions.
inline double reflection_parity(const GridOperator& op, const Eigen::VectorXd& v) {
  const auto& nodes = op.nodes;
  const GridIndexer ix{nodes.grid.dims, nodes.grid.points_per_dim};
  double num = 0.0;
  for (std::size_t a = 0; a < nodes.size(); ++a) {
    auto idx = ix.unflatten(nodes.full_index[a]);
    for (int k = 0; k < nodes.grid.dims; ++k)
      idx[static_cast<std::size_t>(k)] = nodes.grid.points_per_dim - 1 - idx[static_cast<std::size_t>(k)];
    const std::int64_t b = nodes.active_index[ix.flatten(idx)];
    if (b >= 0) num += v(static_cast<Eigen::Index>(a)) * v(static_cast<Eigen::Index>(b));
  }
  return num / v.squaredNorm();
}

// ---------------------------------------------------------------------------
// Kramers law

/// epsilon with lambda1 = p(N) exp(-1/(4h)) (1 + epsilon).
inline double kramers_compare(const LatticeParams& p, double lambda1) {
  return lambda1 / kramers_rate(p) - 1.0;
}

inline double kramers_compare(const LatticeParams& p, const SpectralReport& report) {
  return kramers_compare(p, report.lam1());
}

/// Default resolution per dimension for the double-well tables; the 3D grid is
/// pruned where V/(hN) > 40.
struct ResolutionPolicy {
  int points_1d = 2000;
  int points_2d = 300;
  int points_3d = 48;
  double prune_level_3d = 40.0;

  GridSpec grid_for(const LatticeParams& p) const {
    switch (p.n_sites()) {
      case 1: return make_grid(p, points_1d);
      case 2: return make_grid(p, points_2d);
      case 3: return make_grid(p, points_3d, prune_level_3d);
      default: throw ContractError("grid_for: tensor grids support N <= 3 only");
    }
  }
};

/// lambda_0..2 of the generator for V_N on the policy grid.
inline SpectralReport double_well_spectrum(const LatticeParams& p, const ResolutionPolicy& res = {},
                                           const LanczosOptions& opt = {}) {
  return lowest_eigenvalues(build_generator_operator(p, res.grid_for(p)), 3, opt);
}

struct GapRow {
  std::size_t n_sites = 0;
  double h = 0.0;
  double lam0 = 0.0;
  double lam1 = 0.0;
  double lam2 = 0.0;
};

inline std::vector<GapRow> gap_uniformity_scan(double mu, const std::vector<double>& h_list,
                                               const std::vector<std::size_t>& n_list,
                                               const ResolutionPolicy& res = {},
                                               const LanczosOptions& opt = {}) {
  for (std::size_t n : n_list)
    if (n < 1 || n > 3) throw ContractError("gap_uniformity_scan: N must be 1, 2 or 3");
  std::vector<GapRow> rows;
  for (std::size_t n : n_list) {
    for (double h : h_list) {
      const LatticeParams p(n, mu, h);
      const SpectralReport r = double_well_spectrum(p, res, opt);
      rows.push_back({n, h, r.lam0(), r.lam1(), r.lam2()});
    }
  }
  return rows;
}

}  // namespace kramers
