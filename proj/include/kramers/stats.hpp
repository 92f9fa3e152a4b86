#pragma once

// Small statistics toolkit: moments, batch means, autocorrelation, least squares.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "kramers/errors.hpp"

namespace kramers::stats {

inline double mean(std::span<const double> x) {
  if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Unbiased sample variance.
inline double variance(std::span<const double> x) {
  if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

inline double standard_error(std::span<const double> x) {
  return std::sqrt(variance(x) / static_cast<double>(x.size()));
}

/// Means of `batches` equal consecutive blocks (the tail remainder is dropped).
inline std::vector<double> batch_means(std::span<const double> x, std::size_t batches) {
  detail::require(batches >= 1 && x.size() >= batches, "batch_means: not enough samples");
  const std::size_t len = x.size() / batches;
  std::vector<double> out(batches);
  for (std::size_t b = 0; b < batches; ++b) out[b] = mean(x.subspan(b * len, len));
  return out;
}

/// Effective sample size n * Var(x) / (len * Var(batch means)), capped at n.
inline double batch_ess(std::span<const double> x, std::size_t batches) {
  const std::vector<double> bm = batch_means(x, batches);
  const std::size_t len = x.size() / batches;
  const double vb = variance(bm);
  const double vx = variance(x);
  const double n = static_cast<double>(len * batches);
  if (!(vb > 0.0) || !(vx > 0.0)) return vx > 0.0 ? n : 0.0;
  return std::min(n, n * vx / (static_cast<double>(len) * vb));
}

/// Normalised autocorrelation rho(0..max_lag) of a series.
inline std::vector<double> autocorrelation(std::span<const double> x, std::size_t max_lag) {
  const std::size_t n = x.size();
  detail::require(n >= 2, "autocorrelation: need at least two samples");
  max_lag = std::min(max_lag, n - 1);
  const double m = mean(x);
  std::vector<double> c(max_lag + 1, 0.0);
  for (std::size_t lag = 0; lag <= max_lag; ++lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += (x[i] - m) * (x[i + lag] - m);
    c[lag] = s / static_cast<double>(n);
  }
  const double c0 = c[0];
  for (double& v : c) v = c0 > 0.0 ? v / c0 : 0.0;
  return c;
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double slope_se = 0.0;
  std::size_t points = 0;
};

/// Ordinary least squares y = intercept + slope x.
inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  detail::require(x.size() == y.size() && x.size() >= 2, "linear_fit: need >= 2 paired points");
  const double mx = mean(x);
  const double my = mean(y);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  detail::require(sxx > 0.0, "linear_fit: abscissae are all equal");
  LinearFit f;
  f.points = x.size();
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  const double sse = std::max(0.0, syy - f.slope * sxy);
  f.r_squared = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  f.slope_se = x.size() > 2 ? std::sqrt(sse / static_cast<double>(x.size() - 2) / sxx) : 0.0;
  return f;
}

}  // namespace kramers::stats
