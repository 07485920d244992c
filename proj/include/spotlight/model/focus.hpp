#pragma once

// Focus-region module: turns (encoded screen, bounding box) into a fixed
// number of region tokens for the decoder. The default path builds bbox
// queries
//     E = GeLU(B W_e) W_x   reshaped to [4n x d],  plus type embeddings C,
// then runs summarizer layers
//     Y  = Q + CrossAttn(q = Q, kv = H || Q)
//     Q' = Y + Dense(Y).
// Ablation variants swap the query construction or the key/value set, or
// replace the summarizer with ROI-aligned patch pooling.

#include <cmath>
#include <string>
#include <vector>

#include "spotlight/model/attention.hpp"
#include "spotlight/model/config.hpp"
#include "spotlight/model/encoder.hpp"
#include "spotlight/screen/types.hpp"

namespace spotlight::model {

// Per-coordinate bbox queries: each of the four coordinates is embedded
// separately and expanded to `n` query rows; rows [i*n, (i+1)*n) belong to
// coordinate i in (left, top, right, bottom) order.
template <typename S>
num::Tensor<S> bbox_queries(ParamStore<S>& ps, const SpotlightConfig& cfg,
                            const screen::BoundingBox& box) {
  const int n = cfg.queries_per_coord;
  const int d = cfg.d_model;
  num::Tensor<S> b = num::Tensor<S>::from(
      {4, 1}, {static_cast<S>(box.left), static_cast<S>(box.top),
               static_cast<S>(box.right), static_cast<S>(box.bottom)});
  auto& we = ps.add("focus.bbox.we", {1, d}, Init::Normal);
  auto& wx = ps.add("focus.bbox.wx", {d, n * d}, Init::Normal);
  num::Tensor<S> e = num::matmul(num::gelu(num::matmul(b, we)), wx);  // [4 x n*d]
  e = num::reshape(e, {4 * n, d});
  auto& type_table = ps.add("focus.bbox.type", {4, d}, Init::Normal);
  std::vector<int> type_ids(static_cast<std::size_t>(4 * n));
  for (int i = 0; i < 4 * n; ++i) type_ids[static_cast<std::size_t>(i)] = i / n;
  return num::add(e, num::embedding_lookup(type_table, type_ids));
}

// Joint variant: all four coordinates share one embedding MLP, and row
// identity comes from a learned per-row table instead of coordinate types.
template <typename S>
num::Tensor<S> joint_bbox_queries(ParamStore<S>& ps, const SpotlightConfig& cfg,
                                  const screen::BoundingBox& box) {
  const int n = cfg.queries_per_coord;
  const int d = cfg.d_model;
  num::Tensor<S> b = num::Tensor<S>::from(
      {1, 4}, {static_cast<S>(box.left), static_cast<S>(box.top),
               static_cast<S>(box.right), static_cast<S>(box.bottom)});
  auto& we = ps.add("focus.jbbox.we", {4, d}, Init::Normal);
  auto& wx = ps.add("focus.jbbox.wx", {d, 4 * n * d}, Init::Normal);
  num::Tensor<S> e = num::reshape(num::matmul(num::gelu(num::matmul(b, we)), wx),
                                  {4 * n, d});
  auto& row_table = ps.add("focus.jbbox.row", {4 * n, d}, Init::Normal);
  std::vector<int> row_ids(static_cast<std::size_t>(4 * n));
  for (int i = 0; i < 4 * n; ++i) row_ids[static_cast<std::size_t>(i)] = i;
  return num::add(e, num::embedding_lookup(row_table, row_ids));
}

enum class RoiPoolMode { Average, Max };

// ROI Align over the patch grid. Each pooled cell takes 2x2 bilinear
// samples against patch centers; padded patches get zero weight and the
// remaining weights are renormalized. Differentiable because the output is
// a constant weight matrix applied to the patch features.
template <typename S>
num::Tensor<S> roi_align(const EncodedScreen<S>& enc, int grid_rows, int grid_cols,
                         const screen::BoundingBox& box, int pool,
                         RoiPoolMode mode = RoiPoolMode::Average) {
  const int n_patches = grid_rows * grid_cols;
  if (enc.features.rows() != n_patches) {
    throw num::ShapeError("roi_align: feature rows do not match the patch grid");
  }
  std::vector<S> weights(static_cast<std::size_t>(pool * pool) * n_patches, S(0));
  const double bw = (box.right - box.left) / pool;
  const double bh = (box.bottom - box.top) / pool;

  const auto splat = [&](std::vector<S>& row, double sx, double sy, double w) {
    const double u = sx * grid_cols - 0.5;
    const double v = sy * grid_rows - 0.5;
    const int c0 = static_cast<int>(std::floor(u));
    const int r0 = static_cast<int>(std::floor(v));
    const double fu = u - c0, fv = v - r0;
    for (int dr = 0; dr < 2; ++dr) {
      for (int dc = 0; dc < 2; ++dc) {
        const int r = std::clamp(r0 + dr, 0, grid_rows - 1);
        const int c = std::clamp(c0 + dc, 0, grid_cols - 1);
        if (!enc.valid[static_cast<std::size_t>(r * grid_cols + c)]) continue;
        const double wr = dr == 0 ? 1.0 - fv : fv;
        const double wc = dc == 0 ? 1.0 - fu : fu;
        row[static_cast<std::size_t>(r * grid_cols + c)] +=
            static_cast<S>(w * wr * wc);
      }
    }
  };

  for (int i = 0; i < pool; ++i) {
    for (int j = 0; j < pool; ++j) {
      std::vector<S> row(static_cast<std::size_t>(n_patches), S(0));
      if (mode == RoiPoolMode::Average) {
        for (int sy = 0; sy < 2; ++sy) {
          for (int sx = 0; sx < 2; ++sx) {
            splat(row, box.left + (j + (sx + 0.5) / 2.0) * bw,
                  box.top + (i + (sy + 0.5) / 2.0) * bh, 0.25);
          }
        }
      } else {
        // Max pooling: keep the sample whose total bilinear mass is largest.
        std::vector<S> best(static_cast<std::size_t>(n_patches), S(0));
        double best_mass = -1.0;
        for (int sy = 0; sy < 2; ++sy) {
          for (int sx = 0; sx < 2; ++sx) {
            std::vector<S> cand(static_cast<std::size_t>(n_patches), S(0));
            splat(cand, box.left + (j + (sx + 0.5) / 2.0) * bw,
                  box.top + (i + (sy + 0.5) / 2.0) * bh, 1.0);
            double mass = 0.0;
            for (S v : cand) mass += static_cast<double>(v);
            if (mass > best_mass) {
              best_mass = mass;
              best = std::move(cand);
            }
          }
        }
        row = std::move(best);
      }
      double total = 0.0;
      for (S v : row) total += static_cast<double>(v);
      if (total <= 0.0) {
        throw num::NumericError("roi_align: region covers no valid patches");
      }
      for (S& v : row) v = static_cast<S>(static_cast<double>(v) / total);
      std::copy(row.begin(), row.end(),
                weights.begin() + static_cast<std::size_t>(i * pool + j) * n_patches);
    }
  }
  num::Tensor<S> w = num::Tensor<S>::from({pool * pool, n_patches}, std::move(weights));
  return num::matmul(w, enc.features);
}

// Runs the summarizer stack on queries Q against keys/values `kv` (already
// variant-adjusted). `kv_valid` masks padded patch rows; query rows in the
// kv set are always valid. `attn_out`, when non-null, receives the final
// layer's head-averaged attention weights.
template <typename S>
num::Tensor<S> summarizer_layers(ParamStore<S>& ps, const SpotlightConfig& cfg,
                                 num::Tensor<S> q, const num::Tensor<S>& enc_features,
                                 const std::vector<std::uint8_t>& enc_valid,
                                 bool queries_in_kv, RunState& rs,
                                 num::Tensor<S>* attn_out = nullptr) {
  for (int l = 0; l < cfg.summarizer_layers; ++l) {
    const std::string p = "focus.sum.l" + std::to_string(l);
    num::Tensor<S> kv =
        queries_in_kv ? num::concat<S>({enc_features, q}, 0) : enc_features;
    std::vector<std::uint8_t> kv_valid(enc_valid);
    if (queries_in_kv) kv_valid.insert(kv_valid.end(), static_cast<std::size_t>(q.rows()), 1);
    num::Tensor<S>* capture = (attn_out && l == cfg.summarizer_layers - 1) ? attn_out : nullptr;
    num::Tensor<S> y = num::add(
        q, multi_head_attention(ps, p + ".attn", q, kv, cfg.n_heads, rs, kv_valid,
                                {}, capture));
    q = num::add(y, apply_dropout(dense(ps, p + ".dense", y, cfg.d_model), rs));
  }
  return q;
}

// StaticBboxQueries variant: learned queries attend over H || bbox-embedding.
template <typename S>
num::Tensor<S> summarize_static(ParamStore<S>& ps, const SpotlightConfig& cfg,
                                const EncodedScreen<S>& enc,
                                const screen::BoundingBox& box, RunState& rs,
                                num::Tensor<S>* attn_out) {
  const int rows = 4 * cfg.queries_per_coord;
  auto& table = ps.add("focus.static.q", {rows, cfg.d_model}, Init::Normal);
  std::vector<int> ids(static_cast<std::size_t>(rows));
  for (int i = 0; i < rows; ++i) ids[static_cast<std::size_t>(i)] = i;
  num::Tensor<S> q = num::embedding_lookup(table, ids);
  num::Tensor<S> x = bbox_queries(ps, cfg, box);
  num::Tensor<S> kv = num::concat<S>({enc.features, x}, 0);
  std::vector<std::uint8_t> kv_valid(enc.valid);
  kv_valid.insert(kv_valid.end(), static_cast<std::size_t>(x.rows()), 1);
  for (int l = 0; l < cfg.summarizer_layers; ++l) {
    const std::string p = "focus.sum.l" + std::to_string(l);
    num::Tensor<S>* capture = (attn_out && l == cfg.summarizer_layers - 1) ? attn_out : nullptr;
    num::Tensor<S> y = num::add(
        q, multi_head_attention(ps, p + ".attn", q, kv, cfg.n_heads, rs, kv_valid,
                                {}, capture));
    q = num::add(y, apply_dropout(dense(ps, p + ".dense", y, cfg.d_model), rs));
  }
  return q;
}

// Produces [cfg.n_region_tokens() x d_model] region tokens. The bounding
// box must already be in padded-square coordinates.
template <typename S>
num::Tensor<S> summarize_region(ParamStore<S>& ps, const SpotlightConfig& cfg,
                                const EncodedScreen<S>& enc, int grid_rows, int grid_cols,
                                const screen::BoundingBox& box, RunState& rs,
                                num::Tensor<S>* attn_out = nullptr) {
  switch (cfg.variant) {
    case FocusVariant::RegionSummarizer:
      return summarizer_layers(ps, cfg, bbox_queries(ps, cfg, box), enc.features,
                               enc.valid, /*queries_in_kv=*/true, rs, attn_out);
    case FocusVariant::NoBboxInKV:
      return summarizer_layers(ps, cfg, bbox_queries(ps, cfg, box), enc.features,
                               enc.valid, /*queries_in_kv=*/false, rs, attn_out);
    case FocusVariant::JointBboxEmbedding:
      return summarizer_layers(ps, cfg, joint_bbox_queries(ps, cfg, box), enc.features,
                               enc.valid, /*queries_in_kv=*/true, rs, attn_out);
    case FocusVariant::StaticBboxQueries:
      return summarize_static(ps, cfg, enc, box, rs, attn_out);
    case FocusVariant::RoiAlign:
      return roi_align(enc, grid_rows, grid_cols, box, cfg.roi_pool);
    case FocusVariant::RoiAlignAsQuery:
      return summarizer_layers(ps, cfg,
                               roi_align(enc, grid_rows, grid_cols, box, cfg.roi_pool),
                               enc.features, enc.valid, /*queries_in_kv=*/true, rs,
                               attn_out);
  }
  throw ConfigError("summarize_region: unknown focus variant");
}

// Convenience wrapper: remaps a content-normalized box onto the padded
// square before summarizing.
template <typename S>
num::Tensor<S> extract_focus(ParamStore<S>& ps, const SpotlightConfig& cfg,
                             const EncodedScreen<S>& enc, const screen::Screenshot& scr,
                             const screen::BoundingBox& content_box, RunState& rs,
                             num::Tensor<S>* attn_out = nullptr) {
  return summarize_region(ps, cfg, enc, scr.grid_rows, scr.grid_cols,
                          scr.to_padded_coords(content_box), rs, attn_out);
}

}  // namespace spotlight::model
