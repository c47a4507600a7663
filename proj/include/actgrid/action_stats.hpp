#pragma once

// Episode ingestion, quantile normalization to [-1, 1], spherical translation
// coordinates and per-axis Gaussian fitting.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "actgrid/error.hpp"

namespace actgrid {

/// One 7-DoF delta action step as recorded in an episode log.
struct ActionSample {
  double x = 0, y = 0, z = 0;
  double roll = 0, pitch = 0, yaw = 0;
  double grip = 0;
  std::string episode_id;
  std::uint64_t step = 0;

  std::array<double, 7> values() const { return {x, y, z, roll, pitch, yaw, grip}; }
};

/// Normalized action: x, y, z, roll, pitch, yaw in [-1, 1], grip in [0, 1].
using NormalizedAction = std::array<double, 7>;

inline constexpr std::size_t kScaledVars = 6;
inline constexpr std::array<std::string_view, kScaledVars> kScaledVarNames = {"x", "y", "z", "roll", "pitch", "yaw"};

/// Per-variable raw-unit clipping bounds mapped onto [-1, 1].
struct NormalizationSpec {
  double q_low = 0.01;
  double q_high = 0.99;
  std::array<double, kScaledVars> lo{};
  std::array<double, kScaledVars> hi{};
};

/// Translation in spherical form. phi in (-pi, pi], theta in [0, pi], r >= 0.
struct PolarTranslation {
  double phi = 0;
  double theta = 0;
  double r = 0;
};

/// Grid axes in the order the Gaussian parameters are stored.
enum class Axis : std::size_t { phi = 0, theta, r, roll, pitch, yaw };
inline constexpr std::size_t kAxisCount = 6;
inline constexpr std::array<std::string_view, kAxisCount> kAxisNames = {"phi", "theta", "r", "roll", "pitch", "yaw"};

constexpr std::size_t axis_index(Axis a) noexcept { return static_cast<std::size_t>(a); }

struct AxisGaussian {
  double mu = 0;
  double sigma = 1;

  bool operator==(const AxisGaussian&) const = default;
};

/// Diagonal Gaussian fit over {phi, theta, r, roll, pitch, yaw}.
struct GaussianParams {
  std::array<AxisGaussian, kAxisCount> axes{};
  std::uint64_t sample_count = 0;

  const AxisGaussian& operator[](Axis a) const { return axes[axis_index(a)]; }
  AxisGaussian& operator[](Axis a) { return axes[axis_index(a)]; }
  bool operator==(const GaussianParams&) const = default;
};

inline constexpr double kSigmaFloor = 1e-6;
inline constexpr double kDegenerateWidening = 1e-6;
inline constexpr double kPolarEpsilon = 1e-9;

namespace detail {

inline double json_number(const nlohmann::json& v, std::string_view field, std::size_t line) {
  if (!v.is_number()) throw InputError("field '" + std::string(field) + "' must be a number", line);
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw InputError("field '" + std::string(field) + "' is not finite", line);
  return d;
}

inline bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

// Neumaier-compensated running sum; order-dependent only in the last bits.
struct CompensatedSum {
  double sum = 0;
  double carry = 0;
  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      carry += (sum - t) + v;
    } else {
      carry += (v - t) + sum;
    }
    sum = t;
  }
  double value() const { return sum + carry; }
};

}  // namespace detail

/// Parses one dataset record. Throws InputError tagged with `line`.
inline ActionSample parse_action_record(std::string_view text, std::size_t line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("malformed record: ") + e.what(), line);
  } catch (const nlohmann::json::out_of_range&) {
    throw InputError("record contains a non-finite (overflowing) number", line);
  }
  if (!j.is_object()) throw InputError("record must be a JSON object", line);
  for (const char* key : {"episode_id", "step", "action"}) {
    if (!j.contains(key)) throw InputError(std::string("missing required field '") + key + "'", line);
  }

  ActionSample s;
  if (!j["episode_id"].is_string()) throw InputError("field 'episode_id' must be a string", line);
  s.episode_id = j["episode_id"].get<std::string>();

  const auto& step = j["step"];
  // nlohmann stores non-negative integer literals as unsigned.
  if (!step.is_number_unsigned()) throw InputError("field 'step' must be a non-negative integer", line);
  s.step = step.get<std::uint64_t>();

  const auto& a = j["action"];
  if (!a.is_array() || a.size() != 7) throw InputError("field 'action' must be an array of 7 numbers", line);
  static constexpr std::array<std::string_view, 7> names = {"action[x]",     "action[y]",   "action[z]",  "action[roll]",
                                                            "action[pitch]", "action[yaw]", "action[grip]"};
  std::array<double, 7> v{};
  for (std::size_t i = 0; i < 7; ++i) v[i] = detail::json_number(a[i], names[i], line);
  if (v[6] < 0.0 || v[6] > 1.0) throw InputError("field 'action[grip]' must lie in [0, 1]", line);

  s.x = v[0];
  s.y = v[1];
  s.z = v[2];
  s.roll = v[3];
  s.pitch = v[4];
  s.yaw = v[5];
  s.grip = v[6];
  return s;
}

/// Reads line-delimited records; blank lines are skipped but still counted.
inline std::vector<ActionSample> load_dataset(std::istream& in) {
  std::vector<ActionSample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::blank(line)) continue;
    out.push_back(parse_action_record(line, line_no));
  }
  if (in.bad()) throw InputError("read failure");
  return out;
}

inline std::vector<ActionSample> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open dataset '" + path.string() + "'");
  try {
    return load_dataset(in);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what(), 0);
  }
}

/// Empirical quantile with linear interpolation between order statistics
/// (h = (n-1)q). `sorted` must be ascending and non-empty.
inline double empirical_quantile(std::span<const double> sorted, double q) {
  const std::size_t n = sorted.size();
  if (n == 1 || q <= 0.0) return sorted.front();
  if (q >= 1.0) return sorted.back();
  const double h = static_cast<double>(n - 1) * q;
  const auto i = static_cast<std::size_t>(std::floor(h));
  const double frac = h - static_cast<double>(i);
  if (i + 1 >= n) return sorted.back();
  return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

inline NormalizationSpec compute_normalizer(std::span<const ActionSample> samples, double q_low = 0.01,
                                            double q_high = 0.99) {
  if (samples.empty()) throw std::invalid_argument("empty dataset");
  if (!(q_low >= 0.0 && q_low < q_high && q_high <= 1.0)) {
    throw std::invalid_argument("quantiles must satisfy 0 <= q_low < q_high <= 1");
  }
  NormalizationSpec spec;
  spec.q_low = q_low;
  spec.q_high = q_high;
  std::vector<double> column(samples.size());
  for (std::size_t v = 0; v < kScaledVars; ++v) {
    for (std::size_t i = 0; i < samples.size(); ++i) column[i] = samples[i].values()[v];
    std::sort(column.begin(), column.end());
    double lo = empirical_quantile(column, q_low);
    double hi = empirical_quantile(column, q_high);
    if (!(lo < hi)) {
      const double mid = 0.5 * (lo + hi);
      lo = mid - kDegenerateWidening;
      hi = mid + kDegenerateWidening;
    }
    spec.lo[v] = lo;
    spec.hi[v] = hi;
  }
  return spec;
}

inline double normalize_value(double v, double lo, double hi) {
  return std::clamp(2.0 * (v - lo) / (hi - lo) - 1.0, -1.0, 1.0);
}

inline double denormalize_value(double v, double lo, double hi) { return lo + (v + 1.0) * (hi - lo) / 2.0; }

inline NormalizedAction normalize(const ActionSample& s, const NormalizationSpec& spec) {
  const auto raw = s.values();
  NormalizedAction out{};
  for (std::size_t v = 0; v < kScaledVars; ++v) out[v] = normalize_value(raw[v], spec.lo[v], spec.hi[v]);
  out[6] = raw[6];
  return out;
}

/// Raw-unit action from a normalized vector. Identifiers are left empty.
inline ActionSample denormalize(const NormalizedAction& a, const NormalizationSpec& spec) {
  std::array<double, 7> raw{};
  for (std::size_t v = 0; v < kScaledVars; ++v) raw[v] = denormalize_value(a[v], spec.lo[v], spec.hi[v]);
  raw[6] = a[6];
  ActionSample s;
  s.x = raw[0];
  s.y = raw[1];
  s.z = raw[2];
  s.roll = raw[3];
  s.pitch = raw[4];
  s.yaw = raw[5];
  s.grip = raw[6];
  return s;
}

/// Angles default to 0 where undefined (origin, poles).
inline PolarTranslation cartesian_to_polar(double x, double y, double z) {
  PolarTranslation p;
  const double rxy = std::hypot(x, y);
  p.r = std::hypot(rxy, z);
  if (p.r > kPolarEpsilon) p.theta = std::atan2(rxy, z);
  if (rxy > kPolarEpsilon) {
    p.phi = std::atan2(y, x);
    if (p.phi <= -std::numbers::pi) p.phi = std::numbers::pi;
  }
  return p;
}

inline std::array<double, 3> polar_to_cartesian(const PolarTranslation& p) {
  const double s = std::sin(p.theta);
  return {p.r * s * std::cos(p.phi), p.r * s * std::sin(p.phi), p.r * std::cos(p.theta)};
}

/// Axis coordinates {phi, theta, r, roll, pitch, yaw} of a normalized action.
inline std::array<double, kAxisCount> axis_coordinates(const NormalizedAction& a) {
  const auto p = cartesian_to_polar(a[0], a[1], a[2]);
  return {p.phi, p.theta, p.r, a[3], a[4], a[5]};
}

/// Population mean / standard deviation per axis after normalization and
/// polar conversion. Saturated (clipped) values are included.
inline GaussianParams fit_gaussians(std::span<const ActionSample> samples, const NormalizationSpec& spec) {
  if (samples.empty()) throw std::invalid_argument("empty dataset");
  std::vector<std::array<double, kAxisCount>> coords;
  coords.reserve(samples.size());
  for (const auto& s : samples) coords.push_back(axis_coordinates(normalize(s, spec)));

  const double n = static_cast<double>(samples.size());
  GaussianParams params;
  params.sample_count = samples.size();
  for (std::size_t a = 0; a < kAxisCount; ++a) {
    detail::CompensatedSum sum;
    for (const auto& c : coords) sum.add(c[a]);
    const double mu = sum.value() / n;
    detail::CompensatedSum sq;
    for (const auto& c : coords) sq.add((c[a] - mu) * (c[a] - mu));
    const double sigma = std::sqrt(sq.value() / n);
    params.axes[a] = {mu, std::max(sigma, kSigmaFloor)};
  }
  return params;
}

}  // namespace actgrid
