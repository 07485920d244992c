#pragma once

// Shared transformer building blocks: dense layers, multi-head attention,
// and the pre-norm feed-forward block. All blocks read their weights from a
// ParamStore under a caller-supplied name prefix.

#include <cmath>
#include <string>
#include <vector>

#include "spotlight/model/params.hpp"
#include "spotlight/numerics/ops.hpp"

namespace spotlight::model {

// Per-forward-pass state: dropout switches and the counter-based RNG that
// makes every mask a pure function of (seed, step, op index).
struct RunState {
  bool train = false;
  double dropout = 0.0;
  num::DropoutRng rng;
};

template <typename S>
num::Tensor<S> apply_dropout(const num::Tensor<S>& x, RunState& rs) {
  return num::dropout(x, rs.dropout, rs.train, rs.rng);
}

// y = x W + b with W: [in x out], b: [1 x out].
template <typename S>
num::Tensor<S> dense(ParamStore<S>& ps, const std::string& prefix, const num::Tensor<S>& x,
                     int out_dim) {
  const int in_dim = x.cols();
  auto& w = ps.add(prefix + ".w", {in_dim, out_dim}, Init::Normal);
  auto& b = ps.add(prefix + ".b", {1, out_dim}, Init::Zero);
  return num::add_rowwise(num::matmul(x, w), b);
}

template <typename S>
num::Tensor<S> layer_norm(ParamStore<S>& ps, const std::string& prefix,
                          const num::Tensor<S>& x) {
  auto& g = ps.add(prefix + ".g", {1, x.cols()}, Init::One);
  auto& b = ps.add(prefix + ".b", {1, x.cols()}, Init::Zero);
  return num::layer_norm(x, g, b);
}

// Multi-head scaled dot-product attention. Exactly one of `col_valid`
// (shared key mask, size k) and `full_valid` (per-query mask, size m*k) may
// be non-empty; both empty means no masking. When `attn_out` is non-null it
// receives the head-averaged attention weights [m x k] (detached).
template <typename S>
num::Tensor<S> multi_head_attention(ParamStore<S>& ps, const std::string& prefix,
                                    const num::Tensor<S>& q_in, const num::Tensor<S>& kv_in,
                                    int n_heads, RunState& rs,
                                    const std::vector<std::uint8_t>& col_valid = {},
                                    const std::vector<std::uint8_t>& full_valid = {},
                                    num::Tensor<S>* attn_out = nullptr) {
  const int d = q_in.cols();
  if (kv_in.cols() != d) {
    throw num::ShapeError("attention: query dim " + std::to_string(d) +
                          " != key/value dim " + std::to_string(kv_in.cols()));
  }
  if (d % n_heads != 0) {
    throw num::ShapeError("attention: d_model not divisible by n_heads");
  }
  if (!col_valid.empty() && !full_valid.empty()) {
    throw num::ShapeError("attention: only one mask kind may be set");
  }
  const int m = q_in.rows();
  const int k = kv_in.rows();
  const int dh = d / n_heads;
  const S inv_sqrt = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));

  num::Tensor<S> q = dense(ps, prefix + ".q", q_in, d);
  num::Tensor<S> kk = dense(ps, prefix + ".k", kv_in, d);
  num::Tensor<S> v = dense(ps, prefix + ".v", kv_in, d);

  if (attn_out != nullptr) *attn_out = num::Tensor<S>::zeros({m, k});

  std::vector<num::Tensor<S>> heads;
  heads.reserve(n_heads);
  for (int h = 0; h < n_heads; ++h) {
    num::Tensor<S> qh = num::col_slice(q, h * dh, (h + 1) * dh);
    num::Tensor<S> kh = num::col_slice(kk, h * dh, (h + 1) * dh);
    num::Tensor<S> vh = num::col_slice(v, h * dh, (h + 1) * dh);
    num::Tensor<S> scores =
        num::scale(num::matmul(qh, num::transpose(kh)), inv_sqrt);
    num::Tensor<S> attn = full_valid.empty() ? num::softmax(scores, col_valid)
                                             : num::softmax_rows(scores, full_valid);
    if (attn_out != nullptr) {
      for (std::size_t i = 0; i < attn.numel(); ++i) {
        (*attn_out->data)[i] += attn.val(i) / static_cast<S>(n_heads);
      }
    }
    attn = apply_dropout(attn, rs);
    heads.push_back(num::matmul(attn, vh));
  }
  num::Tensor<S> merged = num::concat(heads, 1);
  return dense(ps, prefix + ".o", merged, d);
}

// Position-wise feed-forward: GeLU between two dense layers.
template <typename S>
num::Tensor<S> feed_forward(ParamStore<S>& ps, const std::string& prefix,
                            const num::Tensor<S>& x, int ffn_mult, RunState& rs) {
  const int d = x.cols();
  num::Tensor<S> h = num::gelu(dense(ps, prefix + ".1", x, d * ffn_mult));
  h = apply_dropout(h, rs);
  return dense(ps, prefix + ".2", h, d);
}

}  // namespace spotlight::model
