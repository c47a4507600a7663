#pragma once

// Grid artifact: a self-describing JSON document holding the normalizer, the
// fitted Gaussians, every axis partition and the token layout. Doubles are
// written in shortest round-trip form, so write -> read -> write is bit-exact.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "actgrid/action_grid.hpp"
#include "actgrid/error.hpp"

namespace actgrid {

inline constexpr std::string_view kGridFormat = "actgrid.grid";
inline constexpr int kGridFormatVersion = 1;

struct GridArtifact {
  NormalizationSpec normalizer;
  ActionGrid grid;
};

/// FNV-1a 64-bit hash as 16 lowercase hex digits; identifies artifact bytes.
inline std::string content_hash(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline nlohmann::ordered_json artifact_to_json(const GridArtifact& art) {
  using nlohmann::ordered_json;
  const auto& g = art.grid;
  ordered_json j;
  j["format"] = kGridFormat;
  j["version"] = kGridFormatVersion;
  j["grid_spec"] = {{"m_phi", g.spec.m_phi},   {"m_theta", g.spec.m_theta}, {"m_r", g.spec.m_r},
                    {"m_roll", g.spec.m_roll}, {"m_pitch", g.spec.m_pitch}, {"m_yaw", g.spec.m_yaw}};
  j["representative"] = to_string(g.mode);

  ordered_json norm;
  norm["q_low"] = art.normalizer.q_low;
  norm["q_high"] = art.normalizer.q_high;
  for (std::size_t v = 0; v < kScaledVars; ++v) {
    norm["bounds"][std::string(kScaledVarNames[v])] = {art.normalizer.lo[v], art.normalizer.hi[v]};
  }
  j["normalization"] = norm;

  ordered_json gauss;
  gauss["sample_count"] = g.gaussians.sample_count;
  for (std::size_t a = 0; a < kAxisCount; ++a) {
    gauss["axes"][std::string(kAxisNames[a])] = {{"mu", g.gaussians.axes[a].mu}, {"sigma", g.gaussians.axes[a].sigma}};
  }
  j["gaussians"] = gauss;

  for (std::size_t a = 0; a < kAxisCount; ++a) {
    const auto& p = g.partitions[a];
    ordered_json pj;
    pj["range"] = {p.range_lo, p.range_hi};
    pj["mu"] = p.mu;
    pj["sigma"] = p.sigma;
    pj["boundaries"] = p.boundaries;
    pj["representatives"] = p.representatives;
    j["partitions"][std::string(kAxisNames[a])] = pj;
  }

  ordered_json layout;
  layout["translation"] = {{"offset", g.translation_offset()},
                           {"size", g.spec.translation_tokens()},
                           {"order", {"theta", "phi", "r"}}};
  layout["rotation"] = {
      {"offset", g.rotation_offset()}, {"size", g.spec.rotation_tokens()}, {"order", {"roll", "pitch", "yaw"}}};
  layout["gripper"] = {{"offset", g.gripper_offset()}, {"size", GridSpec::kGripperTokens}, {"symbols", {"closed", "open"}}};
  j["token_layout"] = layout;
  j["vocab_size"] = g.vocab_size();
  return j;
}

inline std::string serialize_artifact(const GridArtifact& art) { return artifact_to_json(art).dump(2) + "\n"; }

namespace detail {

template <typename T>
T field(const nlohmann::json& j, std::string_view key) {
  const std::string k(key);
  if (!j.is_object() || !j.contains(k)) throw InputError("grid artifact: missing field '" + k + "'");
  try {
    return j.at(k).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InputError("grid artifact: field '" + k + "' has the wrong type");
  }
}

inline void expect(bool ok, const std::string& what) {
  if (!ok) throw InputError("grid artifact: " + what);
}

}  // namespace detail

inline GridArtifact artifact_from_json(const nlohmann::json& j) {
  using detail::expect;
  using detail::field;
  expect(field<std::string>(j, "format") == kGridFormat, "unknown format tag");
  expect(field<int>(j, "version") == kGridFormatVersion,
         "unsupported version (expected " + std::to_string(kGridFormatVersion) + ")");

  GridArtifact art;
  auto& g = art.grid;
  const auto sj = field<nlohmann::json>(j, "grid_spec");
  g.spec = {field<std::size_t>(sj, "m_phi"),  field<std::size_t>(sj, "m_theta"), field<std::size_t>(sj, "m_r"),
            field<std::size_t>(sj, "m_roll"), field<std::size_t>(sj, "m_pitch"), field<std::size_t>(sj, "m_yaw")};
  try {
    g.spec.validate();
    g.mode = parse_representative_mode(field<std::string>(j, "representative"));
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("grid artifact: ") + e.what());
  }

  const auto norm = field<nlohmann::json>(j, "normalization");
  art.normalizer.q_low = field<double>(norm, "q_low");
  art.normalizer.q_high = field<double>(norm, "q_high");
  const auto bounds = field<nlohmann::json>(norm, "bounds");
  for (std::size_t v = 0; v < kScaledVars; ++v) {
    const auto b = field<std::vector<double>>(bounds, kScaledVarNames[v]);
    expect(b.size() == 2 && b[0] < b[1], "normalization bounds for " + std::string(kScaledVarNames[v]) + " invalid");
    art.normalizer.lo[v] = b[0];
    art.normalizer.hi[v] = b[1];
  }

  const auto gauss = field<nlohmann::json>(j, "gaussians");
  g.gaussians.sample_count = field<std::uint64_t>(gauss, "sample_count");
  const auto gaxes = field<nlohmann::json>(gauss, "axes");
  const auto parts = field<nlohmann::json>(j, "partitions");
  for (std::size_t a = 0; a < kAxisCount; ++a) {
    const auto name = kAxisNames[a];
    const auto ga = field<nlohmann::json>(gaxes, name);
    g.gaussians.axes[a] = {field<double>(ga, "mu"), field<double>(ga, "sigma")};
    expect(g.gaussians.axes[a].sigma > 0.0, "sigma for " + std::string(name) + " must be positive");

    const auto pj = field<nlohmann::json>(parts, name);
    auto& p = g.partitions[a];
    const auto range = field<std::vector<double>>(pj, "range");
    expect(range.size() == 2, "range for " + std::string(name) + " must have 2 entries");
    p.range_lo = range[0];
    p.range_hi = range[1];
    p.mu = field<double>(pj, "mu");
    p.sigma = field<double>(pj, "sigma");
    p.boundaries = field<std::vector<double>>(pj, "boundaries");
    p.representatives = field<std::vector<double>>(pj, "representatives");
    const auto [lo, hi] = axis_range(static_cast<Axis>(a));
    expect(p.range_lo == lo && p.range_hi == hi, "range for " + std::string(name) + " differs from the fixed axis range");
    expect(p.bins() == g.spec.count(static_cast<Axis>(a)), "bin count for " + std::string(name) + " disagrees with grid_spec");
    try {
      validate_partition(p);
    } catch (const std::invalid_argument& e) {
      throw InputError("grid artifact: partition " + std::string(name) + ": " + e.what());
    }
  }

  const auto layout = field<nlohmann::json>(j, "token_layout");
  const auto tl = field<nlohmann::json>(layout, "translation");
  const auto rl = field<nlohmann::json>(layout, "rotation");
  const auto gl = field<nlohmann::json>(layout, "gripper");
  expect(field<std::vector<std::string>>(tl, "order") == std::vector<std::string>{"theta", "phi", "r"} &&
             field<std::vector<std::string>>(rl, "order") == std::vector<std::string>{"roll", "pitch", "yaw"},
         "unsupported linearization order");
  expect(field<std::size_t>(tl, "offset") == g.translation_offset() &&
             field<std::size_t>(tl, "size") == g.spec.translation_tokens() &&
             field<std::size_t>(rl, "offset") == g.rotation_offset() &&
             field<std::size_t>(rl, "size") == g.spec.rotation_tokens() &&
             field<std::size_t>(gl, "offset") == g.gripper_offset() &&
             field<std::size_t>(gl, "size") == GridSpec::kGripperTokens,
         "token layout disagrees with grid_spec");
  expect(field<std::size_t>(j, "vocab_size") == g.vocab_size(), "vocab_size disagrees with grid_spec");
  return art;
}

inline GridArtifact parse_artifact(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("grid artifact: not valid JSON: ") + e.what());
  }
  return artifact_from_json(j);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("write failed for '" + path.string() + "'");
}

inline GridArtifact read_artifact(const std::filesystem::path& path) {
  try {
    return parse_artifact(read_file(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

inline void write_artifact(const std::filesystem::path& path, const GridArtifact& art) {
  write_file(path, serialize_artifact(art));
}

}  // namespace actgrid
