#pragma once

// Tensor grids on [-L, L]^d with homogeneous Dirichlet data on the box faces.
// Nodes are interior: x_i = -L + (i + 1) dx, dx = 2L / (n + 1), i = 0..n-1.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "kramers/errors.hpp"
#include "kramers/lattice_model.hpp"
#include "kramers/potentials.hpp"

namespace kramers {

// e^{-37} < 1e-16: the Gibbs weight on the box faces is negligible against its peak.
inline constexpr double kFaceExponent = 37.0;

struct GridSpec {
  int dims = 1;
  double half_width = 0.0;
  int points_per_dim = 0;
  /// Nodes with V/eps above this level are treated as outside the domain (Dirichlet).
  std::optional<double> prune_level;

  double spacing() const { return 2.0 * half_width / (points_per_dim + 1); }
  double coordinate(int i) const { return -half_width + (i + 1) * spacing(); }
  std::size_t full_size() const {
    std::size_t s = 1;
    for (int k = 0; k < dims; ++k) s *= static_cast<std::size_t>(points_per_dim);
    return s;
  }
};

namespace detail {

/// min over the face x_0 = L of V/eps, sampled on a (d-1)-dimensional grid.
template <Potential P>
double face_minimum(const P& pot, double eps, double half_width) {
  const auto d = static_cast<int>(pot.dimension());
  constexpr int kSamples = 81;
  std::vector<double> x(static_cast<std::size_t>(d));
  x[0] = half_width;
  double best = std::numeric_limits<double>::infinity();
  std::size_t total = 1;
  for (int k = 1; k < d; ++k) total *= kSamples;
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t r = flat;
    for (int k = 1; k < d; ++k) {
      x[static_cast<std::size_t>(k)] = -half_width + 2.0 * half_width * static_cast<double>(r % kSamples) / (kSamples - 1);
      r /= kSamples;
    }
    best = std::min(best, pot.value(x) / eps);
  }
  return best;
}

}  // namespace detail

/// Smallest L (to 1e-6) with V/eps >= level on every face of [-L, L]^d. The
/// potential is assumed symmetric under permutations and reflections of the
/// coordinates, so one face suffices.
template <Potential P>
double fit_half_width(const P& pot, double eps, double level = kFaceExponent) {
  detail::require(eps > 0.0, "fit_half_width: eps must be > 0");
  double lo = 0.0;
  double hi = 1.0;
  while (detail::face_minimum(pot, eps, hi) < level) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e6) throw ContractError("fit_half_width: potential does not grow at infinity");
  }
  while (hi - lo > 1e-6) {
    const double mid = 0.5 * (lo + hi);
    (detail::face_minimum(pot, eps, mid) >= level ? hi : lo) = mid;
  }
  return hi;
}

/// GridSpec for V_N with dims = N and the face condition V/(hN) >= kFaceExponent.
inline GridSpec make_grid(const LatticeParams& p, int points_per_dim,
                          std::optional<double> prune_level = std::nullopt) {
  if (p.n_sites() > 3) throw ContractError("make_grid: tensor grids support N <= 3 only");
  detail::require(points_per_dim >= 3, "make_grid: need at least 3 points per dimension");
  GridSpec g;
  g.dims = static_cast<int>(p.n_sites());
  g.half_width = fit_half_width(LatticeEnergy(p), p.noise());
  g.points_per_dim = points_per_dim;
  g.prune_level = prune_level;
  return g;
}

template <Potential P>
GridSpec make_grid(const P& pot, double eps, int points_per_dim,
                   std::optional<double> prune_level = std::nullopt) {
  detail::require(pot.dimension() >= 1 && pot.dimension() <= 3, "make_grid: dimension must be 1, 2 or 3");
  detail::require(points_per_dim >= 3, "make_grid: need at least 3 points per dimension");
  GridSpec g;
  g.dims = static_cast<int>(pot.dimension());
  g.half_width = fit_half_width(pot, eps);
  g.points_per_dim = points_per_dim;
  g.prune_level = prune_level;
  return g;
}

/// Multi-index <-> flat index on the full tensor grid (first axis fastest).
struct GridIndexer {
  int dims;
  int n;

  std::array<int, 3> unflatten(std::size_t flat) const {
    std::array<int, 3> idx{0, 0, 0};
    for (int k = 0; k < dims; ++k) {
      idx[static_cast<std::size_t>(k)] = static_cast<int>(flat % static_cast<std::size_t>(n));
      flat /= static_cast<std::size_t>(n);
    }
    return idx;
  }
  std::size_t flatten(const std::array<int, 3>& idx) const {
    std::size_t flat = 0;
    for (int k = dims - 1; k >= 0; --k) flat = flat * static_cast<std::size_t>(n) + static_cast<std::size_t>(idx[static_cast<std::size_t>(k)]);
    return flat;
  }
};

/// Active nodes of a grid: every node, or those below the prune level.
struct GridNodes {
  GridSpec grid;
  std::vector<std::size_t> full_index;   // active -> full
  std::vector<std::int64_t> active_index;  // full -> active or -1
  std::vector<double> potential;         // V at each active node

  std::size_t size() const { return full_index.size(); }

  std::array<double, 3> position(std::size_t active) const {
    const GridIndexer ix{grid.dims, grid.points_per_dim};
    const auto idx = ix.unflatten(full_index[active]);
    std::array<double, 3> x{0, 0, 0};
    for (int k = 0; k < grid.dims; ++k) x[static_cast<std::size_t>(k)] = grid.coordinate(idx[static_cast<std::size_t>(k)]);
    return x;
  }
};

template <Potential P>
GridNodes enumerate_nodes(const P& pot, double eps, const GridSpec& grid) {
  detail::require(static_cast<int>(pot.dimension()) == grid.dims, "enumerate_nodes: dimension mismatch");
  GridNodes nodes;
  nodes.grid = grid;
  const std::size_t total = grid.full_size();
  nodes.active_index.assign(total, -1);
  const GridIndexer ix{grid.dims, grid.points_per_dim};
  std::vector<double> x(static_cast<std::size_t>(grid.dims));
  for (std::size_t flat = 0; flat < total; ++flat) {
    const auto idx = ix.unflatten(flat);
    for (int k = 0; k < grid.dims; ++k) x[static_cast<std::size_t>(k)] = grid.coordinate(idx[static_cast<std::size_t>(k)]);
    const double v = pot.value(x);
    if (grid.prune_level && v / eps > *grid.prune_level) continue;
    nodes.active_index[flat] = static_cast<std::int64_t>(nodes.full_index.size());
    nodes.full_index.push_back(flat);
    nodes.potential.push_back(v);
  }
  return nodes;
}

}  // namespace kramers
