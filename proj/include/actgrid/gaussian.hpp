#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace actgrid {

inline constexpr double kInvSqrt2 = 0.70710678118654752440;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

inline void require_positive_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("sigma must be a positive finite number");
}

/// Standard normal density.
inline double standard_normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

inline double gaussian_pdf(double x, double mu, double sigma) {
  require_positive_sigma(sigma);
  return standard_normal_pdf((x - mu) / sigma) / sigma;
}

inline double gaussian_cdf(double x, double mu, double sigma) {
  require_positive_sigma(sigma);
  return 0.5 * std::erfc(-(x - mu) / sigma * kInvSqrt2);
}

/// Upper tail 1 - cdf, accurate far above the mean.
inline double gaussian_sf(double x, double mu, double sigma) {
  require_positive_sigma(sigma);
  return 0.5 * std::erfc((x - mu) / sigma * kInvSqrt2);
}

namespace detail {

// Bisection for an increasing f on [lo, hi] with f(lo) <= target <= f(hi).
// Runs until the bracket is a pair of adjacent doubles, then returns the
// endpoint whose value is closer to target.
template <typename F>
double bisect_increasing(F&& f, double target, double lo, double hi) {
  double f_lo = f(lo);
  double f_hi = f(hi);
  for (int iter = 0; iter < 2200; ++iter) {
    const double mid = lo + 0.5 * (hi - lo);
    if (!(mid > lo && mid < hi)) break;
    const double f_mid = f(mid);
    if (f_mid < target) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
      f_hi = f_mid;
    }
  }
  return (target - f_lo <= f_hi - target) ? lo : hi;
}

}  // namespace detail

/// Inverse of gaussian_cdf by bracketed bisection on the erf-based CDF, so
/// the pair is consistent to rounding. Bracket starts at mu +- 12 sigma and
/// widens for probabilities further in the tails.
inline double gaussian_ppf(double p, double mu, double sigma) {
  require_positive_sigma(sigma);
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("probability must lie in (0, 1)");
  double lo = mu - 12.0 * sigma;
  double hi = mu + 12.0 * sigma;
  for (int i = 0; i < 8 && gaussian_cdf(lo, mu, sigma) > p; ++i) lo -= 12.0 * sigma;
  for (int i = 0; i < 8 && gaussian_cdf(hi, mu, sigma) < p; ++i) hi += 12.0 * sigma;
  return detail::bisect_increasing([&](double x) { return gaussian_cdf(x, mu, sigma); }, p, lo, hi);
}

}  // namespace actgrid
