#pragma once

// Egocentric 3D position encoding: depth back-projection through pinhole
// intrinsics, per-pixel sinusoidal features, per-patch averaging over valid
// pixels, a Linear-LayerNorm-ReLU-Linear head, and additive fusion with
// visual patch features.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "actgrid/binary_io.hpp"
#include "actgrid/error.hpp"

namespace actgrid::ego3d {

struct CameraIntrinsics {
  double fx = 1;
  double fy = 1;
  double cx = 0;
  double cy = 0;
  std::size_t width = 1;
  std::size_t height = 1;

  void validate() const {
    if (!(fx > 0.0 && fy > 0.0)) throw std::invalid_argument("intrinsics: focal lengths must be positive");
    if (width == 0 || height == 0) throw std::invalid_argument("intrinsics: width and height must be positive");
    if (!(cx >= 0.0 && cx < static_cast<double>(width) && cy >= 0.0 && cy < static_cast<double>(height))) {
      throw std::invalid_argument("intrinsics: principal point outside the image");
    }
  }
};

/// Depth in meters, row-major, height x width.
struct DepthMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> depth;

  double at(std::size_t u, std::size_t v) const { return depth[v * width + u]; }
};

/// Camera-frame points per pixel. Invalid pixels are zeroed.
struct PointMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::array<double, 3>> points;
  std::vector<std::uint8_t> valid;
};

/// rows x dim row-major matrix of per-item features.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<double> data;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t r, std::size_t d) : rows(r), dim(d), data(r * d, 0.0) {}
  std::span<double> row(std::size_t i) { return {data.data() + i * dim, dim}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * dim, dim}; }
  bool operator==(const FeatureMatrix&) const = default;
};

/// Per-pixel features with the validity flag carried over from the point map.
struct PixelFeatures {
  std::size_t width = 0;
  std::size_t height = 0;
  FeatureMatrix features;  // rows = height * width
  std::vector<std::uint8_t> valid;
};

/// Per-patch averaged features; `valid[p]` is 0 when the patch had no valid pixel.
struct PatchEncoding {
  std::size_t patch = 14;
  std::size_t rows = 0;  // patches down
  std::size_t cols = 0;  // patches across
  FeatureMatrix features;
  std::vector<std::uint8_t> valid;
};

/// Linear(in, hidden) -> LayerNorm(hidden) -> ReLU -> Linear(hidden, out).
/// Matrices are row-major with the input dimension first.
struct MlpWeights {
  std::size_t in_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t out_dim = 0;
  std::vector<double> w1, b1;           // in x hidden, hidden
  std::vector<double> ln_gamma, ln_beta;  // hidden
  std::vector<double> w2, b2;           // hidden x out, out

  static MlpWeights zeros(std::size_t in, std::size_t hidden, std::size_t out) {
    MlpWeights w;
    w.in_dim = in;
    w.hidden_dim = hidden;
    w.out_dim = out;
    w.w1.assign(in * hidden, 0.0);
    w.b1.assign(hidden, 0.0);
    w.ln_gamma.assign(hidden, 0.0);
    w.ln_beta.assign(hidden, 0.0);
    w.w2.assign(hidden * out, 0.0);
    w.b2.assign(out, 0.0);
    return w;
  }

  void validate() const {
    if (w1.size() != in_dim * hidden_dim || b1.size() != hidden_dim || ln_gamma.size() != hidden_dim ||
        ln_beta.size() != hidden_dim || w2.size() != hidden_dim * out_dim || b2.size() != out_dim) {
      throw ShapeError("MLP weight shapes are inconsistent");
    }
  }
};

inline constexpr std::size_t kDefaultFrequencies = 34;
inline constexpr std::size_t kDefaultPatch = 14;
inline constexpr double kLayerNormEps = 1e-6;

constexpr std::size_t encoding_dim(std::size_t frequencies) { return 3 * 2 * frequencies; }

inline PointMap back_project(const DepthMap& depth, const CameraIntrinsics& k) {
  k.validate();
  if (depth.width != k.width || depth.height != k.height || depth.depth.size() != depth.width * depth.height) {
    throw ShapeError("depth map is " + std::to_string(depth.width) + "x" + std::to_string(depth.height) +
                     " but intrinsics describe " + std::to_string(k.width) + "x" + std::to_string(k.height));
  }
  PointMap pm;
  pm.width = depth.width;
  pm.height = depth.height;
  pm.points.assign(depth.depth.size(), {0.0, 0.0, 0.0});
  pm.valid.assign(depth.depth.size(), 0);
  for (std::size_t v = 0; v < depth.height; ++v) {
    const double ray_y = (static_cast<double>(v) - k.cy) / k.fy;
    for (std::size_t u = 0; u < depth.width; ++u) {
      const std::size_t i = v * depth.width + u;
      const double d = depth.depth[i];
      if (!(d > 0.0) || !std::isfinite(d)) continue;
      const double ray_x = (static_cast<double>(u) - k.cx) / k.fx;
      pm.points[i] = {ray_x * d, ray_y * d, d};
      pm.valid[i] = 1;
    }
  }
  return pm;
}

/// Per coordinate c in (x, y, z) and k in [0, L): sin(base 2^k c), cos(base 2^k c),
/// laid out [x: s0 c0 s1 c1 ..., y: ..., z: ...]. Invalid pixels stay zero.
inline PixelFeatures sinusoidal_encode(const PointMap& pm, std::size_t frequencies = kDefaultFrequencies,
                                       double base = std::numbers::pi) {
  if (frequencies == 0) throw std::invalid_argument("frequency count must be at least 1");
  PixelFeatures pf;
  pf.width = pm.width;
  pf.height = pm.height;
  pf.valid = pm.valid;
  pf.features = FeatureMatrix(pm.points.size(), encoding_dim(frequencies));
  for (std::size_t i = 0; i < pm.points.size(); ++i) {
    if (!pm.valid[i]) continue;
    auto out = pf.features.row(i);
    for (std::size_t c = 0; c < 3; ++c) {
      double scale = base;
      for (std::size_t f = 0; f < frequencies; ++f, scale *= 2.0) {
        const double arg = scale * pm.points[i][c];
        out[c * 2 * frequencies + 2 * f] = std::sin(arg);
        out[c * 2 * frequencies + 2 * f + 1] = std::cos(arg);
      }
    }
  }
  return pf;
}

/// Mean of the valid pixels' features in each patch x patch cell, summed in
/// row-major pixel order.
inline PatchEncoding patch_average(const PixelFeatures& pf, std::size_t patch = kDefaultPatch) {
  if (patch == 0 || pf.width % patch != 0 || pf.height % patch != 0) {
    throw ShapeError("image " + std::to_string(pf.width) + "x" + std::to_string(pf.height) +
                     " is not divisible by patch size " + std::to_string(patch));
  }
  PatchEncoding enc;
  enc.patch = patch;
  enc.rows = pf.height / patch;
  enc.cols = pf.width / patch;
  const std::size_t dim = pf.features.dim;
  enc.features = FeatureMatrix(enc.rows * enc.cols, dim);
  enc.valid.assign(enc.rows * enc.cols, 0);
  for (std::size_t pr = 0; pr < enc.rows; ++pr) {
    for (std::size_t pc = 0; pc < enc.cols; ++pc) {
      const std::size_t p = pr * enc.cols + pc;
      auto acc = enc.features.row(p);
      std::size_t count = 0;
      for (std::size_t v = pr * patch; v < (pr + 1) * patch; ++v) {
        for (std::size_t u = pc * patch; u < (pc + 1) * patch; ++u) {
          const std::size_t i = v * pf.width + u;
          if (!pf.valid[i]) continue;
          const auto src = pf.features.row(i);
          for (std::size_t c = 0; c < dim; ++c) acc[c] += src[c];
          ++count;
        }
      }
      if (count == 0) continue;
      for (auto& a : acc) a /= static_cast<double>(count);
      enc.valid[p] = 1;
    }
  }
  return enc;
}

inline FeatureMatrix mlp_forward(const FeatureMatrix& in, const MlpWeights& w) {
  w.validate();
  if (in.dim != w.in_dim) {
    throw ShapeError("MLP expects input width " + std::to_string(w.in_dim) + ", got " + std::to_string(in.dim));
  }
  FeatureMatrix out(in.rows, w.out_dim);
  std::vector<double> h(w.hidden_dim);
  for (std::size_t r = 0; r < in.rows; ++r) {
    const auto x = in.row(r);
    std::copy(w.b1.begin(), w.b1.end(), h.begin());
    for (std::size_t i = 0; i < w.in_dim; ++i) {
      const double xi = x[i];
      const double* wrow = w.w1.data() + i * w.hidden_dim;
      for (std::size_t j = 0; j < w.hidden_dim; ++j) h[j] += xi * wrow[j];
    }
    double mean = 0.0;
    for (double v : h) mean += v;
    mean /= static_cast<double>(w.hidden_dim);
    double var = 0.0;
    for (double v : h) var += (v - mean) * (v - mean);
    var /= static_cast<double>(w.hidden_dim);
    const double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t j = 0; j < w.hidden_dim; ++j) {
      h[j] = std::max(0.0, (h[j] - mean) * inv_std * w.ln_gamma[j] + w.ln_beta[j]);
    }
    auto y = out.row(r);
    std::copy(w.b2.begin(), w.b2.end(), y.begin());
    for (std::size_t j = 0; j < w.hidden_dim; ++j) {
      const double hj = h[j];
      if (hj == 0.0) continue;
      const double* wrow = w.w2.data() + j * w.out_dim;
      for (std::size_t k = 0; k < w.out_dim; ++k) y[k] += hj * wrow[k];
    }
  }
  return out;
}

inline FeatureMatrix mlp_forward(const PatchEncoding& enc, const MlpWeights& w) { return mlp_forward(enc.features, w); }

/// O = X + P elementwise.
inline FeatureMatrix fuse_features(const FeatureMatrix& visual, const FeatureMatrix& pos) {
  if (visual.rows != pos.rows || visual.dim != pos.dim) {
    throw ShapeError("cannot fuse " + std::to_string(visual.rows) + "x" + std::to_string(visual.dim) + " with " +
                     std::to_string(pos.rows) + "x" + std::to_string(pos.dim));
  }
  FeatureMatrix out(visual.rows, visual.dim);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = visual.data[i] + pos.data[i];
  return out;
}

// ---------------------------------------------------------------------------
// Files

inline CameraIntrinsics read_intrinsics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  CameraIntrinsics k;
  try {
    const auto j = nlohmann::json::parse(in);
    k.fx = j.at("fx").get<double>();
    k.fy = j.at("fy").get<double>();
    k.cx = j.at("cx").get<double>();
    k.cy = j.at("cy").get<double>();
    k.width = j.at("width").get<std::size_t>();
    k.height = j.at("height").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": bad intrinsics: " + e.what());
  }
  try {
    k.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return k;
}

inline void write_intrinsics(const std::filesystem::path& path, const CameraIntrinsics& k) {
  nlohmann::ordered_json j = {{"fx", k.fx},       {"fy", k.fy},         {"cx", k.cx},
                              {"cy", k.cy},       {"width", k.width}, {"height", k.height}};
  std::ofstream out(path, std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw InputError("cannot write '" + path.string() + "'");
}

inline constexpr std::string_view kDepthMagic = "EGO3D-DEPTH";

/// "EGO3D-DEPTH v1 <width> <height>\n" followed by little-endian float32 depths.
inline void write_depth_map(std::ostream& out, const DepthMap& d) {
  out << kDepthMagic << " v1 " << d.width << ' ' << d.height << '\n';
  write_float32_payload(out, d.depth);
}

inline DepthMap read_depth_map(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("depth map: missing header", 1);
  std::istringstream hs(line);
  std::string magic, version;
  DepthMap d;
  if (!(hs >> magic >> version >> d.width >> d.height) || magic != kDepthMagic || version != "v1" || d.width == 0 ||
      d.height == 0) {
    throw InputError("depth map: expected header 'EGO3D-DEPTH v1 <width> <height>'", 1);
  }
  d.depth = read_float32_payload(in, d.width * d.height, "depth map");
  return d;
}

inline DepthMap read_depth_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  try {
    return read_depth_map(in);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

inline constexpr std::string_view kMlpMagic = "EGO3D-MLP";
inline constexpr std::string_view kFeaturesMagic = "EGO3D-FEATURES";

/// Payload order: w1, b1, ln_gamma, ln_beta, w2, b2.
inline void write_mlp_weights(std::ostream& out, const MlpWeights& w) {
  w.validate();
  std::vector<double> payload;
  for (const auto* part : {&w.w1, &w.b1, &w.ln_gamma, &w.ln_beta, &w.w2, &w.b2}) {
    payload.insert(payload.end(), part->begin(), part->end());
  }
  write_blob(out,
             {std::string(kMlpMagic),
              {{"input_dim", std::to_string(w.in_dim)},
               {"hidden_dim", std::to_string(w.hidden_dim)},
               {"output_dim", std::to_string(w.out_dim)}}},
             payload);
}

inline MlpWeights read_mlp_weights(std::istream& in) {
  const auto h = read_blob_header(in, kMlpMagic);
  MlpWeights w;
  w.in_dim = h.get_size("input_dim");
  w.hidden_dim = h.get_size("hidden_dim");
  w.out_dim = h.get_size("output_dim");
  const std::size_t sizes[] = {w.in_dim * w.hidden_dim, w.hidden_dim, w.hidden_dim,
                               w.hidden_dim,            w.hidden_dim * w.out_dim, w.out_dim};
  std::size_t total = 0;
  for (auto s : sizes) total += s;
  const auto payload = read_float32_payload(in, total, "MLP weights");
  auto it = payload.begin();
  std::vector<double>* parts[] = {&w.w1, &w.b1, &w.ln_gamma, &w.ln_beta, &w.w2, &w.b2};
  for (std::size_t p = 0; p < 6; ++p) {
    parts[p]->assign(it, it + static_cast<std::ptrdiff_t>(sizes[p]));
    it += static_cast<std::ptrdiff_t>(sizes[p]);
  }
  return w;
}

inline void write_features(std::ostream& out, const FeatureMatrix& f) {
  write_blob(out, {std::string(kFeaturesMagic), {{"rows", std::to_string(f.rows)}, {"dim", std::to_string(f.dim)}}},
             f.data);
}

inline FeatureMatrix read_features(std::istream& in) {
  const auto h = read_blob_header(in, kFeaturesMagic);
  FeatureMatrix f;
  f.rows = h.get_size("rows");
  f.dim = h.get_size("dim");
  f.data = read_float32_payload(in, f.rows * f.dim, "feature matrix");
  return f;
}

}  // namespace actgrid::ego3d
