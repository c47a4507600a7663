#pragma once

// Equal-probability partition of one bounded axis under a Gaussian.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "actgrid/gaussian.hpp"

namespace actgrid {

/// How a bin is mapped back to a single value when decoding.
enum class RepresentativeMode { truncated_mean, midpoint };

inline std::string_view to_string(RepresentativeMode m) {
  return m == RepresentativeMode::truncated_mean ? "truncmean" : "midpoint";
}

inline RepresentativeMode parse_representative_mode(std::string_view s) {
  if (s == "truncmean") return RepresentativeMode::truncated_mean;
  if (s == "midpoint") return RepresentativeMode::midpoint;
  throw std::invalid_argument("unknown representative mode '" + std::string(s) + "' (expected truncmean|midpoint)");
}

/// M bins over [range_lo, range_hi]. Bins are half-open [b_i, b_i+1) except
/// the last, which is closed.
struct AxisPartition {
  double range_lo = 0;
  double range_hi = 1;
  double mu = 0;
  double sigma = 1;
  std::vector<double> boundaries;       // M + 1, strictly increasing
  std::vector<double> representatives;  // M, strictly inside their bins

  std::size_t bins() const noexcept { return representatives.size(); }
  bool operator==(const AxisPartition&) const = default;
};

namespace detail {

// Probability mass below x, expressed so that it stays well-resolved for the
// given range: when the whole range sits above the mean the (negated) upper
// tail is used instead of the CDF, which would round to 1.
struct MassCoordinate {
  double mu;
  double sigma;
  bool upper_tail;

  double operator()(double x) const {
    return upper_tail ? -gaussian_sf(x, mu, sigma) : gaussian_cdf(x, mu, sigma);
  }
};

}  // namespace detail

/// Throws std::invalid_argument unless the partition is structurally sound:
/// M >= 1, boundaries strictly increasing from range_lo to range_hi, every
/// representative strictly inside its bin.
inline void validate_partition(const AxisPartition& p) {
  const std::size_t m = p.representatives.size();
  if (m == 0) throw std::invalid_argument("partition has no bins");
  if (p.boundaries.size() != m + 1) throw std::invalid_argument("partition needs M + 1 boundaries");
  if (p.boundaries.front() != p.range_lo || p.boundaries.back() != p.range_hi) {
    throw std::invalid_argument("partition boundaries must span the axis range");
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (!(p.boundaries[i] < p.boundaries[i + 1])) throw std::invalid_argument("partition boundaries not increasing");
    if (!(p.boundaries[i] < p.representatives[i] && p.representatives[i] < p.boundaries[i + 1])) {
      throw std::invalid_argument("representative outside its bin");
    }
  }
}

inline AxisPartition build_axis_partition(double mu, double sigma, double range_lo, double range_hi, std::size_t m,
                                          RepresentativeMode mode = RepresentativeMode::truncated_mean) {
  require_positive_sigma(sigma);
  if (!(range_lo < range_hi)) throw std::invalid_argument("axis range must satisfy lo < hi");
  if (m == 0) throw std::invalid_argument("bin count must be positive");

  const detail::MassCoordinate mass{mu, sigma, range_lo >= mu};
  const double p_lo = mass(range_lo);
  const double p_hi = mass(range_hi);
  if (!(p_hi > p_lo)) {
    throw std::invalid_argument("axis range carries no resolvable probability mass under the Gaussian");
  }

  AxisPartition part;
  part.range_lo = range_lo;
  part.range_hi = range_hi;
  part.mu = mu;
  part.sigma = sigma;
  part.boundaries.resize(m + 1);
  part.boundaries.front() = range_lo;
  part.boundaries.back() = range_hi;
  for (std::size_t i = 1; i < m; ++i) {
    const double target = p_lo + (p_hi - p_lo) * static_cast<double>(i) / static_cast<double>(m);
    part.boundaries[i] = detail::bisect_increasing(mass, target, range_lo, range_hi);
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (!(part.boundaries[i] < part.boundaries[i + 1])) {
      throw std::invalid_argument("Gaussian too narrow to separate " + std::to_string(m) + " bins on this axis");
    }
  }

  part.representatives.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double a = part.boundaries[i];
    const double b = part.boundaries[i + 1];
    const double mid = a + 0.5 * (b - a);
    double rep = mid;
    if (mode == RepresentativeMode::truncated_mean) {
      // E[X | a <= X < b] = mu + sigma (pdf(alpha) - pdf(beta)) / Z
      const double z = mass(b) - mass(a);
      const double alpha = (a - mu) / sigma;
      const double beta = (b - mu) / sigma;
      if (z > 0.0) rep = mu + sigma * (standard_normal_pdf(alpha) - standard_normal_pdf(beta)) / z;
      if (!(rep > a && rep < b)) rep = mid;
    }
    if (!(rep > a && rep < b)) throw std::invalid_argument("bin too narrow to hold an interior representative");
    part.representatives[i] = rep;
  }
  return part;
}

/// Bin index i with boundaries[i] <= value < boundaries[i+1]; out-of-range
/// values clamp to the first / last bin.
inline std::size_t digitize(double value, const AxisPartition& p) {
  const auto it = std::upper_bound(p.boundaries.begin(), p.boundaries.end(), value);
  const auto pos = static_cast<std::ptrdiff_t>(it - p.boundaries.begin()) - 1;
  const auto last = static_cast<std::ptrdiff_t>(p.bins()) - 1;
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(pos, 0, last));
}

}  // namespace actgrid
