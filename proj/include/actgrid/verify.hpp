#pragma once

// Self-checks run against a grid: Monte-Carlo equal-mass test per axis,
// PPF/CDF consistency, linearization bijectivity and codec idempotence.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "actgrid/action_grid.hpp"
#include "actgrid/gaussian.hpp"

namespace actgrid {

struct VerifyConfig {
  std::uint64_t seed = 0;
  std::size_t samples = 200'000;
  double max_binomial_z = 4.0;
  double ppf_tolerance = 1e-10;
  std::size_t random_triples = 10'000;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  double statistic = 0;  // check-specific; compared against `threshold`
  double threshold = 0;
  std::string detail;
};

/// Draws from N(mu, sigma) truncated to [lo, hi]. Rejection sampling when the
/// range holds enough mass, inverse-CDF otherwise.
class TruncatedGaussianSampler {
 public:
  TruncatedGaussianSampler(double mu, double sigma, double lo, double hi)
      : mu_(mu), sigma_(sigma), lo_(lo), hi_(hi), normal_(mu, sigma) {
    p_lo_ = gaussian_cdf(lo, mu, sigma);
    p_hi_ = gaussian_cdf(hi, mu, sigma);
    rejection_ = (p_hi_ - p_lo_) > 0.05;
  }

  template <typename Rng>
  double operator()(Rng& rng) {
    if (rejection_) {
      for (;;) {
        const double x = normal_(rng);
        if (x >= lo_ && x <= hi_) return x;
      }
    }
    std::uniform_real_distribution<double> u(p_lo_, p_hi_);
    const double p = std::clamp(u(rng), std::nextafter(0.0, 1.0), std::nextafter(1.0, 0.0));
    return std::clamp(gaussian_ppf(p, mu_, sigma_), lo_, hi_);
  }

 private:
  double mu_, sigma_, lo_, hi_;
  double p_lo_ = 0, p_hi_ = 1;
  bool rejection_ = true;
  std::normal_distribution<double> normal_;
};

/// Largest |z| over bins of (count - n/M) / sqrt(n (1/M)(1 - 1/M)) for draws
/// from the partition's own truncated Gaussian.
inline double equal_mass_z(const AxisPartition& p, std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  TruncatedGaussianSampler draw(p.mu, p.sigma, p.range_lo, p.range_hi);
  std::vector<std::size_t> counts(p.bins(), 0);
  for (std::size_t i = 0; i < samples; ++i) ++counts[digitize(draw(rng), p)];
  const double n = static_cast<double>(samples);
  const double q = 1.0 / static_cast<double>(p.bins());
  const double sd = std::sqrt(n * q * (1.0 - q));
  double worst = 0.0;
  for (auto c : counts) {
    const double dev = std::abs(static_cast<double>(c) - n * q);
    worst = std::max(worst, sd > 0.0 ? dev / sd : dev);
  }
  return worst;
}

/// 2 * half probabilities: `half` log-spaced values in [1e-6, 0.5] and their mirrors 1 - p.
inline std::vector<double> probability_grid(std::size_t half = 500) {
  std::vector<double> ps;
  ps.reserve(2 * half);
  const double lo = std::log(1e-6), hi = std::log(0.5);
  for (std::size_t i = 0; i < half; ++i) {
    const double t = half == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(half - 1);
    const double p = std::exp(lo + t * (hi - lo));
    ps.push_back(p);
    ps.push_back(1.0 - p);
  }
  return ps;
}

inline double max_ppf_roundtrip_error(double mu, double sigma, const std::vector<double>& ps) {
  double worst = 0.0;
  for (double p : ps) worst = std::max(worst, std::abs(gaussian_cdf(gaussian_ppf(p, mu, sigma), mu, sigma) - p));
  return worst;
}

inline CheckResult check_equal_mass(const ActionGrid& grid, const VerifyConfig& cfg) {
  CheckResult r{"equal_mass", true, 0.0, cfg.max_binomial_z, ""};
  for (std::size_t a = 0; a < kAxisCount; ++a) {
    const double z = equal_mass_z(grid.partitions[a], cfg.samples, cfg.seed + 0x9e3779b97f4a7c15ULL * (a + 1));
    if (z > r.statistic) {
      r.statistic = z;
      r.detail = "worst axis " + std::string(kAxisNames[a]);
    }
    if (!(z <= cfg.max_binomial_z)) r.passed = false;
  }
  return r;
}

inline CheckResult check_ppf_roundtrip(const ActionGrid& grid, const VerifyConfig& cfg) {
  const auto ps = probability_grid();
  CheckResult r{"ppf_cdf_roundtrip", true, max_ppf_roundtrip_error(0.0, 1.0, ps), cfg.ppf_tolerance, "standard normal"};
  for (std::size_t a = 0; a < kAxisCount; ++a) {
    const auto& p = grid.partitions[a];
    const double e = max_ppf_roundtrip_error(p.mu, p.sigma, ps);
    if (e > r.statistic) {
      r.statistic = e;
      r.detail = "worst axis " + std::string(kAxisNames[a]);
    }
  }
  r.passed = r.statistic < cfg.ppf_tolerance;
  return r;
}

/// Exhaustive over both blocks; statistic = number of ids that fail.
inline CheckResult check_bijectivity(const GridSpec& spec) {
  CheckResult r{"linearize_bijectivity", true, 0.0, 0.0, ""};
  std::size_t failures = 0;
  const auto run = [&](const std::array<Axis, 3>& order) {
    const auto counts = block_counts(spec, order);
    std::size_t expected = 0;
    for (std::size_t i = 0; i < counts[0]; ++i) {
      for (std::size_t j = 0; j < counts[1]; ++j) {
        for (std::size_t k = 0; k < counts[2]; ++k, ++expected) {
          const auto id = linearize({i, j, k}, counts);
          if (id != expected || delinearize(id, counts) != IndexTriple{i, j, k}) ++failures;
        }
      }
    }
  };
  run(kTranslationOrder);
  run(kRotationOrder);
  r.statistic = static_cast<double>(failures);
  r.passed = failures == 0;
  r.detail = std::to_string(spec.translation_tokens() + spec.rotation_tokens()) + " ids checked";
  return r;
}

/// encode(decode(t)) == t and decode(encode(decode(t))) == decode(t), over
/// every translation id, every rotation id and `random_triples` random triples.
inline CheckResult check_codec_idempotence(const ActionGrid& grid, const VerifyConfig& cfg) {
  CheckResult r{"codec_idempotence", true, 0.0, 0.0, ""};
  std::size_t failures = 0;
  std::size_t checked = 0;
  const auto test = [&](const TokenTriple& t) {
    ++checked;
    const auto d = decode_tokens(t, grid);
    const auto back = encode_action(d, grid);
    if (!(back == t) || decode_tokens(back, grid) != d) {
      if (failures == 0) {
        r.detail = "first failure at (" + std::to_string(t.trans) + ", " + std::to_string(t.rot) + ", " +
                   std::to_string(t.grip) + ")";
      }
      ++failures;
    }
  };
  const auto rot0 = static_cast<std::uint32_t>(grid.rotation_offset());
  const auto grip0 = static_cast<std::uint32_t>(grid.gripper_offset());
  for (std::size_t id = 0; id < grid.spec.translation_tokens(); ++id) test({static_cast<std::uint32_t>(id), rot0, grip0});
  for (std::size_t id = 0; id < grid.spec.rotation_tokens(); ++id) {
    test({0, static_cast<std::uint32_t>(rot0 + id), grip0 + 1});
  }
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::uint32_t> trans(0, static_cast<std::uint32_t>(grid.spec.translation_tokens() - 1));
  std::uniform_int_distribution<std::uint32_t> rot(rot0, grip0 - 1);
  std::uniform_int_distribution<std::uint32_t> grip(grip0, grip0 + 1);
  for (std::size_t i = 0; i < cfg.random_triples; ++i) test({trans(rng), rot(rng), grip(rng)});
  r.statistic = static_cast<double>(failures);
  r.passed = failures == 0;
  if (r.passed) r.detail = std::to_string(checked) + " triples checked";
  return r;
}

inline std::vector<CheckResult> verify_grid(const ActionGrid& grid, const VerifyConfig& cfg = {}) {
  return {check_equal_mass(grid, cfg), check_ppf_roundtrip(grid, cfg), check_bijectivity(grid.spec),
          check_codec_idempotence(grid, cfg)};
}

}  // namespace actgrid
