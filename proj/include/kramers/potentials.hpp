#pragma once

// Potential concept shared by the spectral and stochastic layers, plus the two
// analytic test hooks (harmonic well, flat potential).

#include <concepts>
#include <cstddef>
#include <span>
#include <utility>

#include "kramers/errors.hpp"

namespace kramers {

template <class P>
concept Potential = requires(const P& p, std::span<const double> x, std::span<double> g) {
  { p.dimension() } -> std::convertible_to<std::size_t>;
  { p.value(x) } -> std::convertible_to<double>;
  { p.gradient(x, g) };
  { p.laplacian(x) } -> std::convertible_to<double>;
};

/// V(x) = a/2 |x|^2. Its generator -eps*Lap + grad V . grad is Ornstein-Uhlenbeck
/// with spectrum {0, a, 2a, ...} independently of eps.
class HarmonicWell {
 public:
  HarmonicWell(std::size_t dimension, double stiffness) : dim_(dimension), a_(stiffness) {
    detail::require(dimension >= 1, "HarmonicWell: dimension must be >= 1");
    detail::require(stiffness > 0.0, "HarmonicWell: stiffness must be > 0");
  }

  std::size_t dimension() const { return dim_; }
  double stiffness() const { return a_; }

  double value(std::span<const double> x) const {
    double s = 0.0;
    for (double v : x) s += v * v;
    return 0.5 * a_ * s;
  }
  void gradient(std::span<const double> x, std::span<double> g) const {
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = a_ * x[i];
  }
  double laplacian(std::span<const double>) const { return a_ * static_cast<double>(dim_); }

 private:
  std::size_t dim_;
  double a_;
};

/// V == 0: pure diffusion.
class FlatPotential {
 public:
  explicit FlatPotential(std::size_t dimension) : dim_(dimension) {}
  std::size_t dimension() const { return dim_; }
  double value(std::span<const double>) const { return 0.0; }
  void gradient(std::span<const double> x, std::span<double> g) const {
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = 0.0;
  }
  double laplacian(std::span<const double>) const { return 0.0; }

 private:
  std::size_t dim_;
};

/// c * P, e.g. V / (hN) as the ground-state exponent.
template <Potential P>
class ScaledPotential {
 public:
  ScaledPotential(P base, double factor) : base_(std::move(base)), factor_(factor) {}

  std::size_t dimension() const { return base_.dimension(); }
  double value(std::span<const double> x) const { return factor_ * base_.value(x); }
  void gradient(std::span<const double> x, std::span<double> g) const {
    base_.gradient(x, g);
    for (double& v : g) v *= factor_;
  }
  double laplacian(std::span<const double> x) const { return factor_ * base_.laplacian(x); }

 private:
  P base_;
  double factor_;
};

}  // namespace kramers
