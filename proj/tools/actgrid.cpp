// actgrid: fit, encode, decode, adapt and verify adaptive action grids, plus
// the ego3d position-encoding utilities.
//
// Exit codes: 0 success, 1 verification failure, 2 usage or input error.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "actgrid/actgrid.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kExitVerifyFailed = 1;
constexpr int kExitInput = 2;

// Settings shared by every subcommand: defaults < --config file < flags.
struct Settings {
  std::uint64_t seed = 0;
  std::optional<std::string> spec;  // "mphi,mtheta,mr,mroll,mpitch,myaw"
  std::string quantiles = "0.01,0.99";
  std::optional<std::string> representative;
  std::size_t samples = 200'000;
};

struct GlobalFlags {
  std::uint64_t seed = 0;
  std::string config;
  std::string spec;
  std::string quantiles;
  std::string representative;
  std::size_t samples = 0;
};

Settings resolve_settings(const CLI::App& app, const GlobalFlags& f) {
  Settings s;
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw actgrid::InputError("cannot open config '" + f.config + "'");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
      if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
      if (j.contains("spec")) s.spec = j["spec"].get<std::string>();
      if (j.contains("quantiles")) s.quantiles = j["quantiles"].get<std::string>();
      if (j.contains("representative")) s.representative = j["representative"].get<std::string>();
      if (j.contains("samples")) s.samples = j["samples"].get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw actgrid::InputError(f.config + ": bad config: " + e.what());
    }
  }
  if (app.count("--seed")) s.seed = f.seed;
  if (app.count("--spec")) s.spec = f.spec;
  if (app.count("--quantiles")) s.quantiles = f.quantiles;
  if (app.count("--representative")) s.representative = f.representative;
  if (app.count("--samples")) s.samples = f.samples;
  return s;
}

std::pair<double, double> parse_quantiles(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw std::invalid_argument("--quantiles expects 'low,high'");
  try {
    return {std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1))};
  } catch (const std::exception&) {
    throw std::invalid_argument("--quantiles expects two numbers, got '" + text + "'");
  }
}

void emit(std::ostream& out, const ordered_json& record) { out << record.dump() << '\n'; }

void ensure_distinct(const fs::path& input, const fs::path& output) {
  std::error_code ec;
  if (fs::exists(output, ec) && fs::equivalent(input, output, ec)) {
    throw std::invalid_argument("output '" + output.string() + "' would overwrite input '" + input.string() + "'");
  }
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

actgrid::GridArtifact fit_artifact(const fs::path& dataset, const Settings& s, const actgrid::GridSpec& default_spec,
                                   actgrid::RepresentativeMode default_mode) {
  const auto samples = actgrid::load_dataset(dataset);
  if (samples.empty()) throw actgrid::InputError(dataset.string() + ": empty dataset");
  const auto [q_low, q_high] = parse_quantiles(s.quantiles);
  const auto spec = s.spec ? actgrid::parse_grid_spec(*s.spec) : default_spec;
  const auto mode = s.representative ? actgrid::parse_representative_mode(*s.representative) : default_mode;
  actgrid::GridArtifact art;
  art.normalizer = actgrid::compute_normalizer(samples, q_low, q_high);
  art.grid = actgrid::build_action_grid(actgrid::fit_gaussians(samples, art.normalizer), spec, mode);
  return art;
}

void print_grid_summary(const actgrid::ActionGrid& g) {
  emit(std::cout, {{"record", "grid"},
                   {"vocab_size", g.vocab_size()},
                   {"translation_tokens", g.spec.translation_tokens()},
                   {"rotation_tokens", g.spec.rotation_tokens()},
                   {"gripper_tokens", actgrid::GridSpec::kGripperTokens},
                   {"samples", g.gaussians.sample_count},
                   {"representative", actgrid::to_string(g.mode)}});
  for (std::size_t a = 0; a < actgrid::kAxisCount; ++a) {
    emit(std::cout, {{"record", "axis"},
                     {"axis", actgrid::kAxisNames[a]},
                     {"bins", g.partitions[a].bins()},
                     {"mu", g.gaussians.axes[a].mu},
                     {"sigma", g.gaussians.axes[a].sigma}});
  }
}

// ---------------------------------------------------------------------------

int cmd_fit(const Settings& s, const fs::path& dataset, const fs::path& output) {
  ensure_distinct(dataset, output);
  const auto art = fit_artifact(dataset, s, actgrid::GridSpec{}, actgrid::RepresentativeMode::truncated_mean);
  actgrid::write_artifact(output, art);
  print_grid_summary(art.grid);
  return 0;
}

int cmd_encode(const fs::path& dataset, const fs::path& grid_path, const fs::path& output) {
  ensure_distinct(dataset, output);
  const auto art = actgrid::read_artifact(grid_path);
  const auto samples = actgrid::load_dataset(dataset);
  std::ostringstream buf;
  for (const auto& s : samples) {
    const auto t = actgrid::encode_action(actgrid::normalize(s, art.normalizer), art.grid);
    buf << t.trans << ' ' << t.rot << ' ' << t.grip << '\n';
  }
  actgrid::write_file(output, buf.str());
  emit(std::cout, {{"record", "encode"}, {"steps", samples.size()}, {"tokens", 3 * samples.size()}});
  return 0;
}

std::vector<actgrid::TokenTriple> read_token_stream(const fs::path& path, const actgrid::ActionGrid& grid) {
  std::ifstream in(path);
  if (!in) throw actgrid::InputError("cannot open '" + path.string() + "'");
  std::vector<actgrid::TokenTriple> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (actgrid::detail::blank(line)) continue;
    std::istringstream ls(line);
    long long v[3];
    std::string extra;
    if (!(ls >> v[0] >> v[1] >> v[2]) || (ls >> extra)) {
      throw actgrid::InputError(path.string() + ": line " + std::to_string(line_no) + ": expected 3 integer token ids");
    }
    for (long long id : v) {
      if (id < 0 || static_cast<unsigned long long>(id) >= grid.vocab_size()) {
        throw actgrid::InputError(path.string() + ": line " + std::to_string(line_no) + ": token " + std::to_string(id) +
                                  " out of range for V=" + std::to_string(grid.vocab_size()));
      }
    }
    const actgrid::TokenTriple t{static_cast<std::uint32_t>(v[0]), static_cast<std::uint32_t>(v[1]),
                                 static_cast<std::uint32_t>(v[2])};
    try {
      actgrid::check_token_layout(t, grid);
    } catch (const std::out_of_range& e) {
      throw actgrid::InputError(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    }
    out.push_back(t);
  }
  return out;
}

int cmd_decode(const fs::path& tokens, const fs::path& grid_path, const fs::path& output) {
  ensure_distinct(tokens, output);
  const auto art = actgrid::read_artifact(grid_path);
  const auto triples = read_token_stream(tokens, art.grid);
  std::ostringstream buf;
  for (const auto& t : triples) {
    const auto raw = actgrid::denormalize(actgrid::decode_tokens(t, art.grid), art.normalizer).values();
    for (std::size_t k = 0; k < raw.size(); ++k) buf << (k ? " " : "") << format_double(raw[k]);
    buf << '\n';
  }
  actgrid::write_file(output, buf.str());
  emit(std::cout, {{"record", "decode"}, {"steps", triples.size()}});
  return 0;
}

int cmd_adapt(const Settings& s, const fs::path& old_grid_path, const fs::path& old_table_path,
              const fs::path& dataset, const fs::path& new_grid_path, const fs::path& new_table_path,
              const fs::path& plan_path) {
  for (const auto& in : {old_grid_path, old_table_path, dataset}) {
    for (const auto& out : {new_grid_path, new_table_path, plan_path}) ensure_distinct(in, out);
  }
  const auto old_bytes = actgrid::read_file(old_grid_path);
  const auto old_art = actgrid::parse_artifact(old_bytes);
  const auto old_table = actgrid::read_embedding_table(old_table_path, old_art.grid, actgrid::content_hash(old_bytes));

  const auto new_art = fit_artifact(dataset, s, old_art.grid.spec, old_art.grid.mode);
  const auto result = actgrid::adapt_embeddings(old_art.grid, old_table, new_art.grid);

  const auto new_bytes = actgrid::serialize_artifact(new_art);
  actgrid::write_file(new_grid_path, new_bytes);
  actgrid::write_embedding_table(new_table_path, result.table, actgrid::content_hash(new_bytes));

  std::map<std::size_t, std::size_t> neighbor_hist;
  double w_min = 1.0, w_max = 0.0, worst_sum_err = 0.0;
  std::size_t clamped = 0;
  std::ostringstream plan;
  for (const auto& e : result.plan.entries) {
    ++neighbor_hist[e.sources.size()];
    clamped += e.clamped ? 1 : 0;
    double sum = 0.0;
    ordered_json src = ordered_json::array();
    for (const auto& [id, w] : e.sources) {
      w_min = std::min(w_min, w);
      w_max = std::max(w_max, w);
      sum += w;
      src.push_back({id, w});
    }
    worst_sum_err = std::max(worst_sum_err, std::abs(sum - 1.0));
    plan << ordered_json{{"new_id", e.new_id}, {"clamped", e.clamped}, {"sources", src}}.dump() << '\n';
  }
  ordered_json hist = ordered_json::object();
  for (const auto& [k, v] : neighbor_hist) hist[std::to_string(k)] = v;
  const ordered_json summary = {{"record", "adapt_summary"},
                                {"new_vocab_size", new_art.grid.vocab_size()},
                                {"interpolated_tokens", result.plan.entries.size()},
                                {"copied_gripper_tokens", actgrid::GridSpec::kGripperTokens},
                                {"neighbor_counts", hist},
                                {"min_weight", w_min},
                                {"max_weight", w_max},
                                {"max_weight_sum_error", worst_sum_err},
                                {"clamped_tokens", clamped}};
  actgrid::write_file(plan_path, summary.dump() + "\n" + plan.str());
  emit(std::cout, summary);
  return 0;
}

int cmd_verify(const Settings& s, const fs::path& grid_path) {
  const auto art = actgrid::read_artifact(grid_path);
  actgrid::VerifyConfig cfg;
  cfg.seed = s.seed;
  cfg.samples = s.samples;
  bool ok = true;
  for (const auto& r : actgrid::verify_grid(art.grid, cfg)) {
    emit(std::cout, {{"record", "check"},
                     {"name", r.name},
                     {"passed", r.passed},
                     {"statistic", r.statistic},
                     {"threshold", r.threshold},
                     {"detail", r.detail}});
    if (!r.passed) {
      std::cerr << "verification failed: " << r.name << " (statistic " << format_double(r.statistic)
                << ", threshold " << format_double(r.threshold) << ") " << r.detail << '\n';
      ok = false;
    }
  }
  return ok ? 0 : kExitVerifyFailed;
}

int cmd_report(const fs::path& dataset, const fs::path& grid_path, const std::string& output) {
  const auto art = actgrid::read_artifact(grid_path);
  const auto samples = actgrid::load_dataset(dataset);
  if (samples.empty()) throw actgrid::InputError(dataset.string() + ": empty dataset");
  const auto rep = actgrid::quantization_report(samples, art.normalizer, art.grid);
  std::ostringstream buf;
  buf << ordered_json{{"record", "summary"},
                      {"samples", rep.sample_count},
                      {"vocab_size", art.grid.vocab_size()},
                      {"gripper_mismatches", rep.gripper_mismatches}}
             .dump()
      << '\n';
  for (std::size_t k = 0; k < actgrid::kScaledVars; ++k) {
    buf << ordered_json{{"record", "axis_error"},
                        {"axis", actgrid::QuantizationReport::kAxes[k]},
                        {"mse", rep.mse[k]},
                        {"max_squared_error", rep.max_squared_error[k]}}
               .dump()
        << '\n';
  }
  for (std::size_t id = 0; id < rep.occupancy.size(); ++id) {
    if (rep.occupancy[id] == 0) continue;
    buf << ordered_json{{"record", "occupancy"}, {"token", id}, {"count", rep.occupancy[id]}}.dump() << '\n';
  }
  if (output.empty()) {
    std::cout << buf.str();
  } else {
    ensure_distinct(dataset, output);
    actgrid::write_file(output, buf.str());
  }
  return 0;
}

int cmd_init_table(const Settings& s, const fs::path& grid_path, std::size_t dim, double scale,
                   const fs::path& output) {
  if (dim == 0) throw std::invalid_argument("--dim must be positive");
  const auto bytes = actgrid::read_file(grid_path);
  const auto art = actgrid::parse_artifact(bytes);
  actgrid::EmbeddingTable table(art.grid.vocab_size(), dim);
  std::mt19937_64 rng(s.seed);
  std::normal_distribution<double> normal(0.0, scale);
  for (auto& v : table.data()) v = normal(rng);
  actgrid::write_embedding_table(output, table, actgrid::content_hash(bytes));
  emit(std::cout, {{"record", "table"}, {"vocab_size", table.rows()}, {"dim", dim}});
  return 0;
}

// ---- ego3d ----------------------------------------------------------------

void write_features_file(const fs::path& path, const actgrid::ego3d::FeatureMatrix& f) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw actgrid::InputError("cannot write '" + path.string() + "'");
  actgrid::ego3d::write_features(out, f);
}

actgrid::ego3d::FeatureMatrix read_features_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw actgrid::InputError("cannot open '" + path.string() + "'");
  return actgrid::ego3d::read_features(in);
}

int cmd_backproject(const fs::path& depth_path, const fs::path& intr_path, const fs::path& output) {
  namespace e3 = actgrid::ego3d;
  const auto pm = e3::back_project(e3::read_depth_map(depth_path), e3::read_intrinsics(intr_path));
  e3::FeatureMatrix f(pm.points.size(), 4);
  std::size_t valid = 0;
  for (std::size_t i = 0; i < pm.points.size(); ++i) {
    auto r = f.row(i);
    r[0] = pm.points[i][0];
    r[1] = pm.points[i][1];
    r[2] = pm.points[i][2];
    r[3] = pm.valid[i];
    valid += pm.valid[i];
  }
  write_features_file(output, f);
  emit(std::cout, {{"record", "backproject"}, {"pixels", pm.points.size()}, {"valid", valid}});
  return 0;
}

int cmd_encode_pos(const fs::path& depth_path, const fs::path& intr_path, const std::string& mlp_path,
                   std::size_t patch, std::size_t frequencies, const fs::path& output) {
  namespace e3 = actgrid::ego3d;
  const auto pm = e3::back_project(e3::read_depth_map(depth_path), e3::read_intrinsics(intr_path));
  const auto enc = e3::patch_average(e3::sinusoidal_encode(pm, frequencies), patch);
  std::size_t empty = 0;
  for (auto v : enc.valid) empty += v ? 0 : 1;
  if (mlp_path.empty()) {
    write_features_file(output, enc.features);
  } else {
    std::ifstream in(mlp_path, std::ios::binary);
    if (!in) throw actgrid::InputError("cannot open '" + mlp_path + "'");
    write_features_file(output, e3::mlp_forward(enc, e3::read_mlp_weights(in)));
  }
  emit(std::cout, {{"record", "encode_pos"},
                   {"patches", enc.rows * enc.cols},
                   {"patch_rows", enc.rows},
                   {"patch_cols", enc.cols},
                   {"empty_patches", empty},
                   {"encoding_dim", enc.features.dim}});
  return 0;
}

int cmd_fuse(const fs::path& visual, const fs::path& pos, const fs::path& output) {
  const auto out = actgrid::ego3d::fuse_features(read_features_file(visual), read_features_file(pos));
  write_features_file(output, out);
  emit(std::cout, {{"record", "fuse"}, {"rows", out.rows}, {"dim", out.dim}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive action grid tokenizer and ego3d position encoding tools", "actgrid"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags g;
  app.add_option("--seed", g.seed, "Random seed (default 0)");
  app.add_option("--config", g.config, "JSON config with seed/spec/quantiles/representative/samples");
  app.add_option("--spec", g.spec, "Bin counts 'mphi,mtheta,mr,mroll,mpitch,myaw' (default 32,16,8,16,16,16)");
  app.add_option("--quantiles", g.quantiles, "Normalization quantiles 'low,high' (default 0.01,0.99)");
  app.add_option("--representative", g.representative, "Bin representative: truncmean|midpoint")
      ->check(CLI::IsMember({"truncmean", "midpoint"}));
  app.add_option("--samples", g.samples, "Monte-Carlo sample count for verify (default 200000)");

  std::string dataset, grid, output, tokens, table, out_grid, out_table, plan, report_out;
  std::string depth, intrinsics, mlp, visual, pos;
  std::size_t dim = 64, patch = actgrid::ego3d::kDefaultPatch, frequencies = actgrid::ego3d::kDefaultFrequencies;
  double scale = 0.02;

  auto* fit = app.add_subcommand("fit", "Fit normalizer and Gaussians on a dataset and write a grid artifact");
  fit->add_option("dataset", dataset, "Episode dataset (JSONL)")->required();
  fit->add_option("-o,--output", output, "Grid artifact to write")->required();

  auto* encode = app.add_subcommand("encode", "Encode dataset actions into token triples");
  encode->add_option("dataset", dataset)->required();
  encode->add_option("-g,--grid", grid)->required();
  encode->add_option("-o,--output", output, "Token stream to write")->required();

  auto* decode = app.add_subcommand("decode", "Decode token triples into raw-unit actions");
  decode->add_option("tokens", tokens)->required();
  decode->add_option("-g,--grid", grid)->required();
  decode->add_option("-o,--output", output, "Action file to write")->required();

  auto* adapt = app.add_subcommand("adapt", "Refit grids on a new dataset and interpolate embeddings");
  adapt->add_option("dataset", dataset, "New episode dataset")->required();
  adapt->add_option("-g,--grid", grid, "Old grid artifact")->required();
  adapt->add_option("-t,--table", table, "Old embedding table")->required();
  adapt->add_option("--out-grid", out_grid)->required();
  adapt->add_option("--out-table", out_table)->required();
  adapt->add_option("--plan", plan, "Plan dump (JSONL)")->required();

  auto* verify = app.add_subcommand("verify", "Run equal-mass, PPF, bijectivity and idempotence checks");
  verify->add_option("-g,--grid", grid)->required();

  auto* report = app.add_subcommand("report", "Quantization error and token occupancy on a dataset");
  report->add_option("dataset", dataset)->required();
  report->add_option("-g,--grid", grid)->required();
  report->add_option("-o,--output", report_out, "Write records here instead of stdout");

  auto* init = app.add_subcommand("init-table", "Write a random N(0, scale^2) embedding table for a grid");
  init->add_option("-g,--grid", grid)->required();
  init->add_option("--dim", dim, "Embedding width");
  init->add_option("--scale", scale, "Standard deviation");
  init->add_option("-o,--output", output)->required();

  auto* ego = app.add_subcommand("ego3d", "Egocentric 3D position encoding tools");
  ego->require_subcommand(1);
  auto* bp = ego->add_subcommand("backproject", "Depth map -> per-pixel points (x, y, z, valid)");
  bp->add_option("--depth", depth)->required();
  bp->add_option("--intrinsics", intrinsics)->required();
  bp->add_option("-o,--output", output)->required();
  auto* ep = ego->add_subcommand("encode-pos", "Depth map -> per-patch sinusoidal encoding (or MLP output)");
  ep->add_option("--depth", depth)->required();
  ep->add_option("--intrinsics", intrinsics)->required();
  ep->add_option("--mlp", mlp, "MLP weights; omit to write the raw patch encoding");
  ep->add_option("--patch", patch);
  ep->add_option("--frequencies", frequencies);
  ep->add_option("-o,--output", output)->required();
  auto* fu = ego->add_subcommand("fuse", "Add position embeddings to visual features");
  fu->add_option("--visual", visual)->required();
  fu->add_option("--pos", pos)->required();
  fu->add_option("-o,--output", output)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    const auto s = resolve_settings(app, g);
    if (*fit) return cmd_fit(s, dataset, output);
    if (*encode) return cmd_encode(dataset, grid, output);
    if (*decode) return cmd_decode(tokens, grid, output);
    if (*adapt) return cmd_adapt(s, grid, table, dataset, out_grid, out_table, plan);
    if (*verify) return cmd_verify(s, grid);
    if (*report) return cmd_report(dataset, grid, report_out);
    if (*init) return cmd_init_table(s, grid, dim, scale, output);
    if (*bp) return cmd_backproject(depth, intrinsics, output);
    if (*ep) return cmd_encode_pos(depth, intrinsics, mlp, patch, frequencies, output);
    if (*fu) return cmd_fuse(visual, pos, output);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}
