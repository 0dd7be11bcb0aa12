#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "gridflex/error.hpp"

namespace gridflex {

/// Second-order finite-difference derivative of a uniformly sampled series.
/// Central differences in the interior, one-sided second-order stencils at
/// both ends.
inline std::vector<double> derivative(std::span<const double> x, double dt) {
  if (x.size() < 3)
    throw SeriesTooShort("derivative needs at least 3 samples, got " +
                         std::to_string(x.size()));
  if (!(dt > 0.0))
    throw InvalidArgument("sample spacing must be positive");
  const std::size_t n = x.size();
  std::vector<double> d(n);
  const double inv2h = 1.0 / (2.0 * dt);
  d[0] = (-3.0 * x[0] + 4.0 * x[1] - x[2]) * inv2h;
  for (std::size_t k = 1; k + 1 < n; ++k)
    d[k] = (x[k + 1] - x[k - 1]) * inv2h;
  d[n - 1] = (3.0 * x[n - 1] - 4.0 * x[n - 2] + x[n - 3]) * inv2h;
  return d;
}

/// Running trapezoidal integral, starting at zero.
inline std::vector<double> cumulative_trapezoid(std::span<const double> y,
                                                double dt) {
  std::vector<double> out(y.size(), 0.0);
  for (std::size_t k = 1; k < y.size(); ++k)
    out[k] = out[k - 1] + 0.5 * dt * (y[k] + y[k - 1]);
  return out;
}

inline double mean(std::span<const double> y) {
  if (y.empty())
    return 0.0;
  double s = 0.0;
  for (double v : y)
    s += v;
  return s / static_cast<double>(y.size());
}

inline double rms(std::span<const double> y) {
  if (y.empty())
    return 0.0;
  double s = 0.0;
  for (double v : y)
    s += v * v;
  return std::sqrt(s / static_cast<double>(y.size()));
}

inline double sign(double x) { return (x > 0.0) - (x < 0.0); }

inline void require_finite(double x, const char *what) {
  if (!std::isfinite(x))
    throw InvalidArgument(std::string(what) + " must be finite");
}

} // namespace gridflex
