// Acceptance suite: one PASS/FAIL line per criterion; exits 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "actgrid/actgrid.hpp"
#include "../test_support.hpp"

namespace {

using namespace actgrid;
namespace e3 = actgrid::ego3d;

// Tolerances and budgets.
constexpr double kBinomialZ = 4.0;
constexpr double kPpfTol = 1e-10;
constexpr double kAdaptTol = 1e-12;
constexpr double kPlaneResidual = 1e-6;

struct Outcome {
  bool passed = false;
  std::string measured;
};

struct Criterion {
  std::string name;
  double budget_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

GridArtifact fit(const std::vector<ActionSample>& samples, GridSpec spec = {}) {
  GridArtifact art;
  art.normalizer = compute_normalizer(samples);
  art.grid = build_action_grid(fit_gaussians(samples, art.normalizer), spec);
  return art;
}

Outcome vocab_arithmetic() {
  const GridSpec spec;
  const auto g = fit(testing::synthetic_actions(2000, 0)).grid;
  std::mt19937_64 rng(0);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<std::uint32_t> chunk;
  for (int step = 0; step < 4; ++step) {
    const auto t = encode_action({u(rng), u(rng), u(rng), u(rng), u(rng), u(rng), 1.0}, g);
    chunk.insert(chunk.end(), {t.trans, t.rot, t.grip});
  }
  const bool in_vocab = std::all_of(chunk.begin(), chunk.end(), [&](auto t) { return t < g.vocab_size(); });
  return {spec.vocab_size() == 8194 && g.vocab_size() == 8194 && chunk.size() == 12 && in_vocab,
          "V=" + std::to_string(spec.vocab_size()) + " tokens/4 steps=" + std::to_string(chunk.size())};
}

Outcome ablation_arithmetic() {
  const GridSpec spec{8, 8, 8, 8, 8, 8};
  return {spec.translation_tokens() == 512 && spec.rotation_tokens() == 512 && spec.vocab_size() == 1026,
          "V=" + std::to_string(spec.vocab_size())};
}

Outcome equal_mass() {
  testing::TempDir dir("accept_mass");
  testing::write_text(dir / "data.jsonl", testing::to_jsonl(testing::synthetic_actions(20'000, 0)));
  const std::string cli = ACTGRID_CLI_PATH;
  const auto f = testing::run_command(cli + " fit " + (dir / "data.jsonl").string() + " -o " +
                                      (dir / "grid.json").string());
  if (f.exit_code != 0) return {false, "fit failed: " + f.output};
  const auto art = read_artifact(dir / "grid.json");
  VerifyConfig cfg;
  cfg.samples = 200'000;
  double worst = 0.0;
  for (std::size_t a = 0; a < kAxisCount; ++a) {
    worst = std::max(worst, equal_mass_z(art.grid.partitions[a], cfg.samples, 1000 + a));
  }
  const auto v = testing::run_command(cli + " verify -g " + (dir / "grid.json").string());
  return {worst <= kBinomialZ && v.exit_code == 0,
          "max |z|=" + fmt("%.3f", worst) + " verify exit=" + std::to_string(v.exit_code)};
}

Outcome codec_roundtrip() {
  const auto g = fit(testing::synthetic_actions(20'000, 0)).grid;
  std::mt19937_64 rng(0);
  std::uniform_real_distribution<double> u(-1, 1), grip(0, 1);
  std::size_t bin_hits = 0;
  for (int i = 0; i < 10'000; ++i) {
    const NormalizedAction a{u(rng), u(rng), u(rng), u(rng), u(rng), u(rng), grip(rng)};
    if (axis_bins(decode_tokens(encode_action(a, g), g), g) == axis_bins(a, g)) ++bin_hits;
  }
  std::uniform_int_distribution<std::uint32_t> tr(0, static_cast<std::uint32_t>(g.rotation_offset() - 1));
  std::uniform_int_distribution<std::uint32_t> ro(static_cast<std::uint32_t>(g.rotation_offset()),
                                                  static_cast<std::uint32_t>(g.gripper_offset() - 1));
  std::uniform_int_distribution<std::uint32_t> gr(static_cast<std::uint32_t>(g.gripper_offset()),
                                                  static_cast<std::uint32_t>(g.vocab_size() - 1));
  std::size_t fixed = 0;
  for (int i = 0; i < 10'000; ++i) {
    const TokenTriple t{tr(rng), ro(rng), gr(rng)};
    if (encode_action(decode_tokens(t, g), g) == t) ++fixed;
  }
  return {bin_hits == 10'000 && fixed == 10'000,
          "in-bin " + std::to_string(bin_hits) + "/10000, fixed " + std::to_string(fixed) + "/10000"};
}

Outcome mse_monotonicity() {
  const auto samples = testing::synthetic_actions(50'000, 0);
  const auto norm = compute_normalizer(samples);
  const auto params = fit_gaussians(samples, norm);
  const auto fine = quantization_report(samples, norm, build_action_grid(params, GridSpec{}));
  const auto coarse = quantization_report(samples, norm, build_action_grid(params, GridSpec{8, 8, 8, 8, 8, 8}));
  bool ok = true;
  double worst_ratio = 0.0;
  for (std::size_t k = 0; k < kScaledVars; ++k) {
    ok = ok && fine.mse[k] < coarse.mse[k];
    worst_ratio = std::max(worst_ratio, fine.mse[k] / coarse.mse[k]);
  }
  return {ok, "max mse(8194)/mse(1026)=" + fmt("%.3f", worst_ratio)};
}

Outcome ppf_precision() {
  // 1000 log-spaced probabilities over [1e-12, 1 - 1e-12], mirrored about 0.5.
  std::vector<double> ps;
  for (int i = 0; i < 500; ++i) {
    const double p = std::exp(std::log(1e-12) + (std::log(0.5) - std::log(1e-12)) * i / 499.0);
    ps.push_back(p);
    ps.push_back(1.0 - p);
  }
  double worst = max_ppf_roundtrip_error(0.0, 1.0, ps);
  worst = std::max(worst, max_ppf_roundtrip_error(0.37, 0.021, ps));
  worst = std::max(worst, max_ppf_roundtrip_error(-1.2, 3.5, ps));
  return {ps.size() == 1000 && worst < kPpfTol, "max err=" + fmt("%.3e", worst)};
}

Outcome identity_adaptation() {
  const auto g = fit(testing::synthetic_actions(20'000, 0)).grid;
  EmbeddingTable table(g.vocab_size(), 64);
  std::mt19937_64 rng(0);
  std::normal_distribution<double> n(0, 1);
  for (auto& v : table.data()) v = n(rng);
  const auto r = adapt_embeddings(g, table, g);
  double worst = 0.0;
  for (std::size_t i = 0; i < table.data().size(); ++i) {
    worst = std::max(worst, std::abs(r.table.data()[i] - table.data()[i]));
  }
  double simplex = 0.0;
  bool nonneg = true;
  for (const auto& e : r.plan.entries) {
    double s = 0.0;
    for (const auto& [id, w] : e.sources) {
      s += w;
      nonneg = nonneg && w >= 0.0;
    }
    simplex = std::max(simplex, std::abs(s - 1.0));
  }
  return {r.table.rows() == 8194 && worst <= kAdaptTol && simplex <= kAdaptTol && nonneg,
          "max |diff|=" + fmt("%.3e", worst) + " max |sum w - 1|=" + fmt("%.3e", simplex)};
}

Outcome trilinear_oracle() {
  const GridSpec small{2, 2, 2, 2, 2, 2};
  const auto old_grid = fit(testing::synthetic_actions(5000, 1), small).grid;
  const auto new_grid = fit(testing::synthetic_actions(5000, 2, 0.003), GridSpec{4, 4, 4, 4, 4, 4}).grid;
  EmbeddingTable table(old_grid.vocab_size(), old_grid.vocab_size());
  for (std::size_t i = 0; i < table.rows(); ++i) table.row(i)[i] = 1.0;
  const auto out = adapt_embeddings(old_grid, table, new_grid).table;
  double worst = 0.0;
  const auto check_block = [&](const std::array<Axis, 3>& order, std::size_t old_off, std::size_t new_off) {
    const auto counts = block_counts(new_grid.spec, order);
    for (std::size_t id = 0; id < counts[0] * counts[1] * counts[2]; ++id) {
      const auto idx = delinearize(id, counts);
      std::array<double, 3> f{};
      for (std::size_t k = 0; k < 3; ++k) {
        const auto& reps = old_grid.partition(order[k]).representatives;
        const double c = std::clamp(new_grid.partition(order[k]).representatives[idx[k]], reps[0], reps[1]);
        f[k] = (c - reps[0]) / (reps[1] - reps[0]);
      }
      for (std::size_t corner = 0; corner < 8; ++corner) {
        const IndexTriple o{(corner >> 2) & 1, (corner >> 1) & 1, corner & 1};
        double w = 1.0;
        for (std::size_t k = 0; k < 3; ++k) w *= o[k] ? f[k] : 1.0 - f[k];
        const auto old_id = old_off + linearize(o, {2, 2, 2});
        worst = std::max(worst, std::abs(out.row(new_off + id)[old_id] - w));
      }
    }
  };
  check_block(kTranslationOrder, old_grid.translation_offset(), new_grid.translation_offset());
  check_block(kRotationOrder, old_grid.rotation_offset(), new_grid.rotation_offset());
  return {worst <= kAdaptTol, "max |diff|=" + fmt("%.3e", worst)};
}

Outcome ego3d_zero_init() {
  e3::CameraIntrinsics k;
  k.fx = k.fy = 200.0;
  k.cx = k.cy = 111.5;
  k.width = k.height = 224;
  e3::DepthMap d{224, 224, std::vector<double>(224 * 224)};
  std::mt19937_64 rng(0);
  std::uniform_real_distribution<double> u(0.3, 3.0);
  for (auto& v : d.depth) v = u(rng);
  const auto pf = e3::sinusoidal_encode(e3::back_project(d, k), 34);
  const auto enc = e3::patch_average(pf, 14);
  const auto pos = e3::mlp_forward(enc, e3::MlpWeights::zeros(204, 512, 256));
  e3::FeatureMatrix x(enc.features.rows, 256);
  std::normal_distribution<double> n(0, 1);
  for (auto& v : x.data) v = n(rng);
  const auto fused = e3::fuse_features(x, pos);
  return {pf.features.dim == 204 && fused == x && enc.features.rows == 256,
          "width=" + std::to_string(pf.features.dim) + " fused==X: " + (fused == x ? "yes" : "no")};
}

Outcome backprojection_geometry() {
  e3::CameraIntrinsics k;
  k.fx = 180.0;
  k.fy = 190.0;
  k.cx = 111.5;
  k.cy = 100.0;
  k.width = k.height = 224;
  double worst_residual = 0.0;
  bool scaling_exact = true;
  for (const auto& [n, c] : {std::pair{std::array<double, 3>{0.1, -0.2, 1.0}, 1.5},
                            std::pair{std::array<double, 3>{-0.4, 0.3, 1.0}, 0.8}}) {
    e3::DepthMap d{k.width, k.height, std::vector<double>(k.width * k.height)};
    for (std::size_t v = 0; v < k.height; ++v) {
      for (std::size_t u = 0; u < k.width; ++u) {
        const double rx = (static_cast<double>(u) - k.cx) / k.fx;
        const double ry = (static_cast<double>(v) - k.cy) / k.fy;
        d.depth[v * k.width + u] = c / (n[0] * rx + n[1] * ry + n[2]);
      }
    }
    const auto pm = e3::back_project(d, k);
    // The plane is known, so the residual is the distance-like |n.X - c| / |n|.
    const double norm = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
    for (const auto& p : pm.points) {
      worst_residual = std::max(worst_residual, std::abs(n[0] * p[0] + n[1] * p[1] + n[2] * p[2] - c) / norm);
    }
    for (double s : {2.0, 0.5, 4.0}) {
      auto scaled = d;
      for (auto& z : scaled.depth) z *= s;
      const auto ps = e3::back_project(scaled, k);
      for (std::size_t i = 0; i < pm.points.size(); ++i) {
        for (std::size_t a = 0; a < 3; ++a) scaling_exact = scaling_exact && ps.points[i][a] == s * pm.points[i][a];
      }
    }
  }
  return {worst_residual < kPlaneResidual && scaling_exact,
          "max residual=" + fmt("%.3e", worst_residual) + " scaling exact: " + (scaling_exact ? "yes" : "no")};
}

Outcome serialization_determinism() {
  testing::TempDir dir("accept_ser");
  testing::write_text(dir / "data.jsonl", testing::to_jsonl(testing::synthetic_actions(20'000, 0)));
  const std::string cli = ACTGRID_CLI_PATH;
  for (const char* out : {"a.json", "b.json"}) {
    const auto r = testing::run_command(cli + " fit " + (dir / "data.jsonl").string() + " -o " + (dir / out).string());
    if (r.exit_code != 0) return {false, "fit failed: " + r.output};
  }
  const auto a = testing::read_text(dir / "a.json");
  const bool same = a == testing::read_text(dir / "b.json");
  write_artifact(dir / "c.json", read_artifact(dir / "a.json"));
  const bool roundtrip = testing::read_text(dir / "c.json") == a;
  return {same && roundtrip, std::string("fit twice identical: ") + (same ? "yes" : "no") +
                                 " read->write identical: " + (roundtrip ? "yes" : "no")};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"vocabulary arithmetic (V=8194, 12 tokens per 4-step chunk)", 1.0, vocab_arithmetic},
      {"resolution ablation arithmetic (V=1026)", 1.0, ablation_arithmetic},
      {"equal-mass partition (200000 draws, 4 sigma) and CLI verify", 30.0, equal_mass},
      {"codec round-trip (10000 actions, 10000 triples)", 10.0, codec_roundtrip},
      {"quantization monotonicity (50000 steps, seed 0)", 60.0, mse_monotonicity},
      {"PPF precision (1000 probabilities, 1e-10)", 1.0, ppf_precision},
      {"identity adaptation (V=8194, d=64, 1e-12)", 5.0, identity_adaptation},
      {"trilinear oracle equivalence (2x2x2 one-hot)", 1.0, trilinear_oracle},
      {"ego3d zero-init contract and width 204", 1.0, ego3d_zero_init},
      {"back-projection geometry (plane residual, exact scaling)", 5.0, backprojection_geometry},
      {"serialization determinism", 10.0, serialization_determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = o.passed && secs < c.budget_s;
    failed += pass ? 0 : 1;
    std::printf("%s  %-62s %s [%.2fs / %.0fs]\n", pass ? "PASS" : "FAIL", c.name.c_str(), o.measured.c_str(), secs,
                c.budget_s);
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
  return failed == 0 ? 0 : 1;
}
