#pragma once

// Re-discretization transfer: new-grid token embeddings initialized as
// trilinear blends of the old grid's embeddings, interpolating in the space
// of per-axis bin representatives.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "actgrid/action_grid.hpp"
#include "actgrid/binary_io.hpp"
#include "actgrid/error.hpp"

namespace actgrid {

/// V x d row-major embedding matrix indexed by token id.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::size_t rows, std::size_t dim, double fill = 0.0) : rows_(rows), dim_(dim), data_(rows * dim, fill) {}
  EmbeddingTable(std::size_t rows, std::size_t dim, std::vector<double> data)
      : rows_(rows), dim_(dim), data_(std::move(data)) {
    if (data_.size() != rows_ * dim_) throw ShapeError("embedding data size does not match rows x dim");
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

  bool operator==(const EmbeddingTable&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

/// Neighbor index triples with trilinear weights (zero weights dropped).
struct TrilinearStencil {
  std::vector<std::pair<IndexTriple, double>> neighbors;
  bool clamped = false;  // some coordinate fell outside the old representative span
};

namespace detail {

struct AxisBracket {
  std::size_t lower = 0;
  double frac = 0.0;  // weight of lower + 1
  bool clamped = false;
};

inline AxisBracket bracket(double c, const std::vector<double>& reps) {
  if (c <= reps.front()) return {0, 0.0, c < reps.front()};
  if (c >= reps.back()) return {reps.size() - 1, 0.0, c > reps.back()};
  const auto it = std::upper_bound(reps.begin(), reps.end(), c);
  const auto k = static_cast<std::size_t>(it - reps.begin()) - 1;
  return {k, (c - reps[k]) / (reps[k + 1] - reps[k]), false};
}

}  // namespace detail

/// Enclosing-cell stencil of `centroid` among the old representatives. Each
/// axis contributes (1 - f, f) on its bracketing pair; coordinates outside
/// the representative span clamp to the end representative.
inline TrilinearStencil trilinear_weights(const std::array<double, 3>& centroid,
                                          const std::array<const AxisPartition*, 3>& old_axes) {
  std::array<detail::AxisBracket, 3> br{};
  TrilinearStencil st;
  for (std::size_t k = 0; k < 3; ++k) {
    br[k] = detail::bracket(centroid[k], old_axes[k]->representatives);
    st.clamped = st.clamped || br[k].clamped;
  }
  for (int corner = 0; corner < 8; ++corner) {
    IndexTriple idx{};
    double w = 1.0;
    for (std::size_t k = 0; k < 3; ++k) {
      const bool upper = ((corner >> (2 - k)) & 1) != 0;
      idx[k] = br[k].lower + (upper ? 1 : 0);
      w *= upper ? br[k].frac : 1.0 - br[k].frac;
    }
    if (w > 0.0) st.neighbors.emplace_back(idx, w);
  }
  return st;
}

struct PlanEntry {
  std::uint32_t new_id = 0;
  std::vector<std::pair<std::uint32_t, double>> sources;  // (old token id, weight)
  bool clamped = false;
};

/// One entry per new translation and rotation token, in token-id order.
struct AdaptationPlan {
  std::vector<PlanEntry> entries;
};

struct AdaptationResult {
  EmbeddingTable table;
  AdaptationPlan plan;
};

namespace detail {

inline void plan_block(const ActionGrid& old_grid, const ActionGrid& new_grid, const std::array<Axis, 3>& order,
                       std::size_t old_offset, std::size_t new_offset, AdaptationPlan& plan) {
  const auto new_counts = block_counts(new_grid.spec, order);
  const auto old_counts = block_counts(old_grid.spec, order);
  const std::array<const AxisPartition*, 3> old_axes = {&old_grid.partition(order[0]), &old_grid.partition(order[1]),
                                                        &old_grid.partition(order[2])};
  const std::size_t n = new_counts[0] * new_counts[1] * new_counts[2];
  for (std::size_t id = 0; id < n; ++id) {
    const auto idx = delinearize(id, new_counts);
    std::array<double, 3> centroid{};
    for (std::size_t k = 0; k < 3; ++k) centroid[k] = new_grid.partition(order[k]).representatives[idx[k]];
    const auto st = trilinear_weights(centroid, old_axes);
    PlanEntry e;
    e.new_id = static_cast<std::uint32_t>(new_offset + id);
    e.clamped = st.clamped;
    for (const auto& [old_idx, w] : st.neighbors) {
      e.sources.emplace_back(static_cast<std::uint32_t>(old_offset + linearize(old_idx, old_counts)), w);
    }
    plan.entries.push_back(std::move(e));
  }
}

}  // namespace detail

inline AdaptationPlan plan_adaptation(const ActionGrid& old_grid, const ActionGrid& new_grid) {
  AdaptationPlan plan;
  plan.entries.reserve(new_grid.spec.translation_tokens() + new_grid.spec.rotation_tokens());
  detail::plan_block(old_grid, new_grid, kTranslationOrder, old_grid.translation_offset(),
                     new_grid.translation_offset(), plan);
  detail::plan_block(old_grid, new_grid, kRotationOrder, old_grid.rotation_offset(), new_grid.rotation_offset(), plan);
  return plan;
}

/// Applies a plan: each new row is the weighted sum of its source rows;
/// gripper rows are copied positionally.
inline EmbeddingTable apply_plan(const AdaptationPlan& plan, const EmbeddingTable& old_table,
                                 const ActionGrid& old_grid, const ActionGrid& new_grid) {
  if (old_table.rows() != old_grid.vocab_size()) {
    throw ShapeError("embedding table has " + std::to_string(old_table.rows()) + " rows but the grid has V=" +
                     std::to_string(old_grid.vocab_size()));
  }
  EmbeddingTable out(new_grid.vocab_size(), old_table.dim());
  for (const auto& e : plan.entries) {
    auto dst = out.row(e.new_id);
    for (const auto& [src_id, w] : e.sources) {
      const auto src = old_table.row(src_id);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += w * src[c];
    }
  }
  for (std::size_t g = 0; g < GridSpec::kGripperTokens; ++g) {
    const auto src = old_table.row(old_grid.gripper_offset() + g);
    std::copy(src.begin(), src.end(), out.row(new_grid.gripper_offset() + g).begin());
  }
  return out;
}

inline AdaptationResult adapt_embeddings(const ActionGrid& old_grid, const EmbeddingTable& old_table,
                                         const ActionGrid& new_grid) {
  if (old_table.rows() != old_grid.vocab_size()) {
    throw ShapeError("embedding table has " + std::to_string(old_table.rows()) + " rows but the grid has V=" +
                     std::to_string(old_grid.vocab_size()));
  }
  AdaptationResult r;
  r.plan = plan_adaptation(old_grid, new_grid);
  r.table = apply_plan(r.plan, old_table, old_grid, new_grid);
  return r;
}

// ---------------------------------------------------------------------------
// Embedding table files

inline constexpr std::string_view kEmbeddingMagic = "ACTGRID-EMBEDDING";

inline void write_embedding_table(std::ostream& out, const EmbeddingTable& t, std::string_view grid_hash) {
  BlobHeader h{std::string(kEmbeddingMagic),
               {{"grid_hash", std::string(grid_hash)},
                {"vocab_size", std::to_string(t.rows())},
                {"dim", std::to_string(t.dim())}}};
  write_blob(out, h, t.data());
}

inline void write_embedding_table(const std::filesystem::path& path, const EmbeddingTable& t,
                                  std::string_view grid_hash) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  write_embedding_table(out, t, grid_hash);
  if (!out) throw InputError("write failed for '" + path.string() + "'");
}

struct LoadedEmbedding {
  EmbeddingTable table;
  std::string grid_hash;
};

inline LoadedEmbedding read_embedding_table(std::istream& in) {
  const auto h = read_blob_header(in, kEmbeddingMagic);
  const auto rows = h.get_size("vocab_size");
  const auto dim = h.get_size("dim");
  if (dim == 0) throw InputError("embedding table: dim must be positive");
  auto payload = read_float32_payload(in, rows * dim, "embedding table");
  return {EmbeddingTable(rows, dim, std::move(payload)), h.get("grid_hash")};
}

/// Loads a table and checks it against the grid it claims to belong to.
inline EmbeddingTable read_embedding_table(const std::filesystem::path& path, const ActionGrid& grid,
                                           std::string_view grid_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  auto loaded = read_embedding_table(in);
  if (loaded.table.rows() != grid.vocab_size()) {
    throw ShapeError(path.string() + ": table has V=" + std::to_string(loaded.table.rows()) + " but grid has V=" +
                     std::to_string(grid.vocab_size()));
  }
  if (loaded.grid_hash != grid_hash) {
    throw ShapeError(path.string() + ": table was written for grid " + loaded.grid_hash + ", not " +
                     std::string(grid_hash));
  }
  return std::move(loaded.table);
}

}  // namespace actgrid
