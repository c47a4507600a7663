#pragma once

// Adaptive action grid: six equal-probability axis partitions linearized into
// one token vocabulary of translation, rotation and gripper blocks.
//
// Token layout (V = M_trans + M_rot + 2):
//   [0, M_trans)                 translation, id = (i_theta * M_phi + i_phi) * M_r + i_r
//   [M_trans, M_trans + M_rot)   rotation,    id = (i_roll * M_pitch + i_pitch) * M_yaw + i_yaw
//   M_trans + M_rot + {0, 1}     gripper closed / open

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "actgrid/action_stats.hpp"
#include "actgrid/axis_partition.hpp"

namespace actgrid {

/// Bin counts per axis. Defaults give V = 8194.
struct GridSpec {
  std::size_t m_phi = 32;
  std::size_t m_theta = 16;
  std::size_t m_r = 8;
  std::size_t m_roll = 16;
  std::size_t m_pitch = 16;
  std::size_t m_yaw = 16;

  static constexpr std::size_t kGripperTokens = 2;

  std::size_t count(Axis a) const {
    switch (a) {
      case Axis::phi: return m_phi;
      case Axis::theta: return m_theta;
      case Axis::r: return m_r;
      case Axis::roll: return m_roll;
      case Axis::pitch: return m_pitch;
      case Axis::yaw: return m_yaw;
    }
    return 0;
  }
  std::size_t translation_tokens() const { return m_phi * m_theta * m_r; }
  std::size_t rotation_tokens() const { return m_roll * m_pitch * m_yaw; }
  std::size_t vocab_size() const { return translation_tokens() + rotation_tokens() + kGripperTokens; }

  void validate() const {
    for (std::size_t a = 0; a < kAxisCount; ++a) {
      if (count(static_cast<Axis>(a)) == 0) {
        throw std::invalid_argument("bin count for axis " + std::string(kAxisNames[a]) + " must be positive");
      }
    }
    if (vocab_size() > UINT32_MAX) throw std::invalid_argument("vocabulary does not fit 32-bit token ids");
  }

  bool operator==(const GridSpec&) const = default;
};

/// Parses "mphi,mtheta,mr,mroll,mpitch,myaw".
inline GridSpec parse_grid_spec(std::string_view text) {
  std::array<std::size_t, 6> v{};
  std::stringstream ss{std::string(text)};
  std::string item;
  std::size_t n = 0;
  while (std::getline(ss, item, ',')) {
    if (n == 6) throw std::invalid_argument("grid spec needs exactly 6 comma-separated counts");
    std::size_t used = 0;
    long long parsed = 0;
    try {
      parsed = std::stoll(item, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("grid spec entry '" + item + "' is not an integer");
    }
    if (used != item.size() || parsed <= 0) throw std::invalid_argument("grid spec entry '" + item + "' must be a positive integer");
    v[n++] = static_cast<std::size_t>(parsed);
  }
  if (n != 6) throw std::invalid_argument("grid spec needs exactly 6 comma-separated counts");
  GridSpec spec{v[0], v[1], v[2], v[3], v[4], v[5]};
  spec.validate();
  return spec;
}

/// Fixed axis ranges in normalized / polar units.
inline std::pair<double, double> axis_range(Axis a) {
  switch (a) {
    case Axis::phi: return {-std::numbers::pi, std::numbers::pi};
    case Axis::theta: return {0.0, std::numbers::pi};
    case Axis::r: return {0.0, std::sqrt(3.0)};
    default: return {-1.0, 1.0};
  }
}

using IndexTriple = std::array<std::size_t, 3>;

/// Translation, rotation and gripper token ids, each from its own block.
struct TokenTriple {
  std::uint32_t trans = 0;
  std::uint32_t rot = 0;
  std::uint32_t grip = 0;

  bool operator==(const TokenTriple&) const = default;
};

/// Row-major flattening of a 3-index into [0, n0*n1*n2).
inline std::size_t linearize(const IndexTriple& idx, const IndexTriple& counts) {
  for (std::size_t k = 0; k < 3; ++k) {
    if (idx[k] >= counts[k]) throw std::out_of_range("grid index out of range");
  }
  return (idx[0] * counts[1] + idx[1]) * counts[2] + idx[2];
}

inline IndexTriple delinearize(std::size_t id, const IndexTriple& counts) {
  if (id >= counts[0] * counts[1] * counts[2]) throw std::out_of_range("local token id out of range");
  IndexTriple idx{};
  idx[2] = id % counts[2];
  id /= counts[2];
  idx[1] = id % counts[1];
  idx[0] = id / counts[1];
  return idx;
}

/// Axes making up each 3D block, in linearization order.
inline constexpr std::array<Axis, 3> kTranslationOrder = {Axis::theta, Axis::phi, Axis::r};
inline constexpr std::array<Axis, 3> kRotationOrder = {Axis::roll, Axis::pitch, Axis::yaw};

inline IndexTriple block_counts(const GridSpec& spec, const std::array<Axis, 3>& order) {
  return {spec.count(order[0]), spec.count(order[1]), spec.count(order[2])};
}

inline std::size_t linearize_trans(const GridSpec& spec, std::size_t i_theta, std::size_t i_phi, std::size_t i_r) {
  return linearize({i_theta, i_phi, i_r}, block_counts(spec, kTranslationOrder));
}
inline IndexTriple delinearize_trans(const GridSpec& spec, std::size_t id) {
  return delinearize(id, block_counts(spec, kTranslationOrder));
}
inline std::size_t linearize_rot(const GridSpec& spec, std::size_t i_roll, std::size_t i_pitch, std::size_t i_yaw) {
  return linearize({i_roll, i_pitch, i_yaw}, block_counts(spec, kRotationOrder));
}
inline IndexTriple delinearize_rot(const GridSpec& spec, std::size_t id) {
  return delinearize(id, block_counts(spec, kRotationOrder));
}

/// Immutable codec instance.
struct ActionGrid {
  GridSpec spec;
  RepresentativeMode mode = RepresentativeMode::truncated_mean;
  GaussianParams gaussians;
  std::array<AxisPartition, kAxisCount> partitions;

  const AxisPartition& partition(Axis a) const { return partitions[axis_index(a)]; }

  std::size_t translation_offset() const { return 0; }
  std::size_t rotation_offset() const { return spec.translation_tokens(); }
  std::size_t gripper_offset() const { return spec.translation_tokens() + spec.rotation_tokens(); }
  std::size_t vocab_size() const { return spec.vocab_size(); }

  bool operator==(const ActionGrid&) const = default;
};

inline ActionGrid build_action_grid(const GaussianParams& params, const GridSpec& spec,
                                    RepresentativeMode mode = RepresentativeMode::truncated_mean) {
  spec.validate();
  ActionGrid grid;
  grid.spec = spec;
  grid.mode = mode;
  grid.gaussians = params;
  for (std::size_t a = 0; a < kAxisCount; ++a) {
    const auto axis = static_cast<Axis>(a);
    const auto [lo, hi] = axis_range(axis);
    try {
      grid.partitions[a] = build_axis_partition(params.axes[a].mu, params.axes[a].sigma, lo, hi, spec.count(axis), mode);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("axis " + std::string(kAxisNames[a]) + ": " + e.what());
    }
  }
  return grid;
}

/// Per-axis bin indices {phi, theta, r, roll, pitch, yaw} of a normalized action.
inline std::array<std::size_t, kAxisCount> axis_bins(const NormalizedAction& a, const ActionGrid& grid) {
  const auto c = axis_coordinates(a);
  std::array<std::size_t, kAxisCount> bins{};
  for (std::size_t k = 0; k < kAxisCount; ++k) bins[k] = digitize(c[k], grid.partitions[k]);
  return bins;
}

inline TokenTriple encode_action(const NormalizedAction& a, const ActionGrid& grid) {
  const auto b = axis_bins(a, grid);
  const auto at = [&](Axis x) { return b[axis_index(x)]; };
  TokenTriple t;
  t.trans = static_cast<std::uint32_t>(grid.translation_offset() +
                                       linearize_trans(grid.spec, at(Axis::theta), at(Axis::phi), at(Axis::r)));
  t.rot = static_cast<std::uint32_t>(grid.rotation_offset() +
                                     linearize_rot(grid.spec, at(Axis::roll), at(Axis::pitch), at(Axis::yaw)));
  t.grip = static_cast<std::uint32_t>(grid.gripper_offset() + (a[6] > 0.5 ? 1 : 0));
  return t;
}

/// Throws std::out_of_range naming the offending slot when a token does not
/// belong to its block.
inline void check_token_layout(const TokenTriple& t, const ActionGrid& grid) {
  if (t.trans >= grid.rotation_offset()) {
    throw std::out_of_range("translation token " + std::to_string(t.trans) + " outside [0, " +
                            std::to_string(grid.rotation_offset()) + ")");
  }
  if (t.rot < grid.rotation_offset() || t.rot >= grid.gripper_offset()) {
    throw std::out_of_range("rotation token " + std::to_string(t.rot) + " outside [" +
                            std::to_string(grid.rotation_offset()) + ", " + std::to_string(grid.gripper_offset()) + ")");
  }
  if (t.grip < grid.gripper_offset() || t.grip >= grid.vocab_size()) {
    throw std::out_of_range("gripper token " + std::to_string(t.grip) + " outside [" +
                            std::to_string(grid.gripper_offset()) + ", " + std::to_string(grid.vocab_size()) + ")");
  }
}

/// Representative coordinates {phi, theta, r, roll, pitch, yaw} of a token triple.
inline std::array<double, kAxisCount> decode_axis_coordinates(const TokenTriple& t, const ActionGrid& grid) {
  check_token_layout(t, grid);
  const auto tr = delinearize_trans(grid.spec, t.trans - grid.translation_offset());
  const auto rt = delinearize_rot(grid.spec, t.rot - grid.rotation_offset());
  std::array<double, kAxisCount> c{};
  const auto rep = [&](Axis a, std::size_t i) { return grid.partition(a).representatives[i]; };
  c[axis_index(Axis::theta)] = rep(Axis::theta, tr[0]);
  c[axis_index(Axis::phi)] = rep(Axis::phi, tr[1]);
  c[axis_index(Axis::r)] = rep(Axis::r, tr[2]);
  c[axis_index(Axis::roll)] = rep(Axis::roll, rt[0]);
  c[axis_index(Axis::pitch)] = rep(Axis::pitch, rt[1]);
  c[axis_index(Axis::yaw)] = rep(Axis::yaw, rt[2]);
  return c;
}

inline NormalizedAction decode_tokens(const TokenTriple& t, const ActionGrid& grid) {
  const auto c = decode_axis_coordinates(t, grid);
  const auto xyz = polar_to_cartesian(
      {c[axis_index(Axis::phi)], c[axis_index(Axis::theta)], c[axis_index(Axis::r)]});
  return {xyz[0],
          xyz[1],
          xyz[2],
          c[axis_index(Axis::roll)],
          c[axis_index(Axis::pitch)],
          c[axis_index(Axis::yaw)],
          t.grip == grid.gripper_offset() + 1 ? 1.0 : 0.0};
}

/// Quantization error of decode(encode(a)) in normalized units over
/// x, y, z, roll, pitch, yaw, plus token occupancy.
struct QuantizationReport {
  static constexpr std::array<std::string_view, kScaledVars> kAxes = kScaledVarNames;

  std::uint64_t sample_count = 0;
  std::array<double, kScaledVars> mse{};
  std::array<double, kScaledVars> max_squared_error{};
  std::uint64_t gripper_mismatches = 0;  // grip != decoded {0, 1}
  std::vector<std::uint64_t> occupancy;  // indexed by token id, size V
};

inline QuantizationReport quantization_report(std::span<const ActionSample> samples, const NormalizationSpec& norm,
                                              const ActionGrid& grid) {
  if (samples.empty()) throw std::invalid_argument("empty dataset");
  QuantizationReport rep;
  rep.sample_count = samples.size();
  rep.occupancy.assign(grid.vocab_size(), 0);
  std::array<detail::CompensatedSum, kScaledVars> sums{};
  for (const auto& s : samples) {
    const auto a = normalize(s, norm);
    const auto t = encode_action(a, grid);
    const auto d = decode_tokens(t, grid);
    ++rep.occupancy[t.trans];
    ++rep.occupancy[t.rot];
    ++rep.occupancy[t.grip];
    for (std::size_t k = 0; k < kScaledVars; ++k) {
      const double e2 = (a[k] - d[k]) * (a[k] - d[k]);
      sums[k].add(e2);
      rep.max_squared_error[k] = std::max(rep.max_squared_error[k], e2);
    }
    if (a[6] != d[6]) ++rep.gripper_mismatches;
  }
  for (std::size_t k = 0; k < kScaledVars; ++k) rep.mse[k] = sums[k].value() / static_cast<double>(samples.size());
  return rep;
}

}  // namespace actgrid
