#pragma once

// Vision encoder: non-overlapping patch projection + learned position
// embeddings + pre-norm transformer blocks. Padded patches never enter the
// key/value set and their output rows are zeroed. No class token and no
// final layer norm, so zero layers is the identity on the patch embeddings.

#include <string>
#include <vector>

#include "spotlight/model/attention.hpp"
#include "spotlight/model/config.hpp"
#include "spotlight/screen/types.hpp"

namespace spotlight::model {

// Rows are patches in row-major grid order; columns are the flattened
// patch pixels (row, column, channel).
template <typename S>
num::Tensor<S> patchify(const screen::Screenshot& scr) {
  const int p = scr.patch_size;
  const int rows = scr.grid_rows, cols = scr.grid_cols;
  num::Tensor<S> out = num::Tensor<S>::zeros({rows * cols, p * p * 3});
  for (int gr = 0; gr < rows; ++gr) {
    for (int gc = 0; gc < cols; ++gc) {
      S* dst = out.mut_ptr() + (gr * cols + gc) * p * p * 3;
      for (int y = 0; y < p; ++y) {
        for (int x = 0; x < p; ++x) {
          const int py = gr * p + y, px = gc * p + x;
          const float* src = scr.pixels.data() + (py * scr.size + px) * 3;
          for (int c = 0; c < 3; ++c) *dst++ = static_cast<S>(src[c]);
        }
      }
    }
  }
  return out;
}

template <typename S>
struct EncodedScreen {
  num::Tensor<S> features;              // [n_patches x d_model]
  std::vector<std::uint8_t> valid;      // per-patch content flag
};

template <typename S>
EncodedScreen<S> encode_screen(ParamStore<S>& ps, const SpotlightConfig& cfg,
                               const screen::Screenshot& scr, RunState& rs) {
  if (scr.size != cfg.image_size || scr.patch_size != cfg.patch_size) {
    throw num::ShapeError("encode_screen: screenshot geometry does not match config");
  }
  num::Tensor<S> x = dense(ps, "enc.patch", patchify<S>(scr), cfg.d_model);
  auto& pos = ps.add("enc.pos", {cfg.n_patches(), cfg.d_model}, Init::Normal);
  x = num::add(x, pos);
  x = apply_dropout(x, rs);

  const std::vector<std::uint8_t>& valid = scr.valid_mask;
  for (int l = 0; l < cfg.encoder_layers; ++l) {
    const std::string p = "enc.l" + std::to_string(l);
    num::Tensor<S> h = layer_norm(ps, p + ".ln1", x);
    num::Tensor<S> a =
        multi_head_attention(ps, p + ".attn", h, h, cfg.n_heads, rs, valid);
    x = num::add(x, apply_dropout(a, rs));
    num::Tensor<S> f = feed_forward(ps, p + ".ffn", layer_norm(ps, p + ".ln2", x),
                                    cfg.ffn_mult, rs);
    x = num::add(x, apply_dropout(f, rs));
  }

  // Zero padded rows so downstream consumers cannot read them by accident.
  std::vector<S> row_gate(valid.size());
  for (std::size_t i = 0; i < valid.size(); ++i) row_gate[i] = valid[i] ? S(1) : S(0);
  num::Tensor<S> gate = num::Tensor<S>::zeros({x.rows(), x.cols()});
  for (int r = 0; r < x.rows(); ++r) {
    std::fill(gate.mut_ptr() + r * x.cols(), gate.mut_ptr() + (r + 1) * x.cols(),
              row_gate[static_cast<std::size_t>(r)]);
  }
  return {num::multiply(x, gate), valid};
}

}  // namespace spotlight::model
