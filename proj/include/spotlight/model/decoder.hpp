#pragma once

// Text decoder: causal self-attention plus cross-attention over the tuple
// memory (region tokens). Sequences are a BOS-prefixed list of chunks, one
// chunk per tuple: <bos> <boc> text... <eoc> ... <eos>. Both memory rows
// and decoder tokens carry a learned tuple-position embedding so chunk j
// can find region j.

#include <algorithm>
#include <string>
#include <vector>

#include "spotlight/model/attention.hpp"
#include "spotlight/model/config.hpp"
#include "spotlight/model/encoder.hpp"
#include "spotlight/model/focus.hpp"
#include "spotlight/screen/vocab.hpp"

namespace spotlight::model {

template <typename S>
struct TupleMemory {
  num::Tensor<S> rows;          // [n_tuples * n_region_tokens x d_model]
  int n_tuples = 0;
};

// One region to pre-encode into memory: a screen plus a content-space box.
template <typename S>
struct MemorySlot {
  const screen::Screenshot* screen = nullptr;
  const EncodedScreen<S>* encoded = nullptr;  // encoder output for *screen
  screen::BoundingBox region;
};

template <typename S>
TupleMemory<S> build_tuple_memory(ParamStore<S>& ps, const SpotlightConfig& cfg,
                                  const std::vector<MemorySlot<S>>& slots, RunState& rs) {
  if (slots.empty()) throw num::ShapeError("build_tuple_memory: no slots");
  if (static_cast<int>(slots.size()) > cfg.max_tuples) {
    throw num::ShapeError("build_tuple_memory: " + std::to_string(slots.size()) +
                          " tuples exceed max_tuples=" + std::to_string(cfg.max_tuples));
  }
  auto& tuple_table = ps.add("dec.tuple", {cfg.max_tuples, cfg.d_model}, Init::Normal);
  std::vector<num::Tensor<S>> parts;
  parts.reserve(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& slot = slots[i];
    num::Tensor<S> region = extract_focus(ps, cfg, *slot.encoded, *slot.screen,
                                          slot.region, rs);
    std::vector<int> ids(static_cast<std::size_t>(region.rows()), static_cast<int>(i));
    parts.push_back(num::add(region, num::embedding_lookup(tuple_table, ids)));
  }
  TupleMemory<S> mem;
  mem.rows = parts.size() == 1 ? parts[0] : num::concat(parts, 0);
  mem.n_tuples = static_cast<int>(slots.size());
  return mem;
}

// Teacher-forced forward pass. `ids` and `tuple_ids` are parallel; returns
// next-token logits for every position, [T x vocab_size].
template <typename S>
num::Tensor<S> decode_forward(ParamStore<S>& ps, const SpotlightConfig& cfg,
                              const TupleMemory<S>& mem, const std::vector<int>& ids,
                              const std::vector<int>& tuple_ids, RunState& rs) {
  const int t = static_cast<int>(ids.size());
  if (t == 0) throw num::ShapeError("decode_forward: empty sequence");
  if (tuple_ids.size() != ids.size()) {
    throw num::ShapeError("decode_forward: tuple_ids length mismatch");
  }
  if (t > cfg.max_seq_len) {
    throw num::ShapeError("decode_forward: sequence length " + std::to_string(t) +
                          " exceeds max_seq_len=" + std::to_string(cfg.max_seq_len));
  }
  auto& tok_table = ps.add("dec.tok", {cfg.vocab_size, cfg.d_model}, Init::Normal);
  auto& pos_table = ps.add("dec.pos", {cfg.max_seq_len, cfg.d_model}, Init::Normal);
  auto& tuple_table = ps.add("dec.tuple", {cfg.max_tuples, cfg.d_model}, Init::Normal);

  std::vector<int> pos_ids(static_cast<std::size_t>(t));
  for (int i = 0; i < t; ++i) pos_ids[static_cast<std::size_t>(i)] = i;
  num::Tensor<S> x = num::add(
      num::add(num::embedding_lookup(tok_table, ids),
               num::embedding_lookup(pos_table, pos_ids)),
      num::embedding_lookup(tuple_table, tuple_ids));
  x = apply_dropout(x, rs);

  std::vector<std::uint8_t> causal(static_cast<std::size_t>(t) * t, 0);
  for (int i = 0; i < t; ++i) {
    for (int j = 0; j <= i; ++j) causal[static_cast<std::size_t>(i) * t + j] = 1;
  }

  for (int l = 0; l < cfg.decoder_layers; ++l) {
    const std::string p = "dec.l" + std::to_string(l);
    num::Tensor<S> h = layer_norm(ps, p + ".ln1", x);
    x = num::add(x, apply_dropout(multi_head_attention(ps, p + ".self", h, h,
                                                       cfg.n_heads, rs, {}, causal),
                                  rs));
    h = layer_norm(ps, p + ".ln2", x);
    x = num::add(x, apply_dropout(multi_head_attention(ps, p + ".cross", h, mem.rows,
                                                       cfg.n_heads, rs),
                                  rs));
    h = layer_norm(ps, p + ".ln3", x);
    x = num::add(x, apply_dropout(feed_forward(ps, p + ".ffn", h, cfg.ffn_mult, rs), rs));
  }
  x = layer_norm(ps, "dec.lnf", x);
  return dense(ps, "dec.out", x, cfg.vocab_size);
}

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

namespace detail {

template <typename S>
std::vector<double> log_softmax_row(const num::Tensor<S>& logits, int row) {
  const int v = logits.cols();
  const S* p = logits.ptr() + row * v;
  double mx = p[0];
  for (int j = 1; j < v; ++j) mx = std::max(mx, static_cast<double>(p[j]));
  double z = 0.0;
  for (int j = 0; j < v; ++j) z += std::exp(static_cast<double>(p[j]) - mx);
  std::vector<double> out(static_cast<std::size_t>(v));
  const double lz = std::log(z) + mx;
  for (int j = 0; j < v; ++j) out[static_cast<std::size_t>(j)] = static_cast<double>(p[j]) - lz;
  return out;
}

}  // namespace detail

// Length-normalized beam search. Generation starts after the prompt; every
// generated token carries `query_tuple_id`. A beam finishes on <eoc> or
// <eos>; ties in score break toward the smaller token id so decoding is
// fully deterministic. Returns the generated tokens without the terminator.
template <typename S>
std::vector<int> beam_search(ParamStore<S>& ps, const SpotlightConfig& cfg,
                             const TupleMemory<S>& mem, const std::vector<int>& prompt,
                             const std::vector<int>& prompt_tuple_ids, int query_tuple_id) {
  struct Beam {
    std::vector<int> tokens;  // generated only
    double log_prob = 0.0;
    bool done = false;
    double score() const {
      return log_prob / std::max<std::size_t>(tokens.size(), 1);
    }
  };
  RunState rs;  // eval mode: no dropout
  std::vector<Beam> beams = {Beam{}};
  for (int step = 0; step < cfg.max_decode_len; ++step) {
    std::vector<Beam> candidates;
    bool any_active = false;
    for (const Beam& beam : beams) {
      if (beam.done) {
        candidates.push_back(beam);
        continue;
      }
      any_active = true;
      std::vector<int> ids(prompt);
      std::vector<int> tids(prompt_tuple_ids);
      for (int tok : beam.tokens) {
        ids.push_back(tok);
        tids.push_back(query_tuple_id);
      }
      num::Tensor<S> logits = decode_forward(ps, cfg, mem, ids, tids, rs);
      const std::vector<double> lp =
          detail::log_softmax_row(logits, static_cast<int>(ids.size()) - 1);
      for (int tok = 0; tok < cfg.vocab_size; ++tok) {
        if (tok == screen::Vocabulary::kPad || tok == screen::Vocabulary::kBos ||
            tok == screen::Vocabulary::kBoc) {
          continue;  // structural tokens are never generated
        }
        Beam next = beam;
        next.log_prob += lp[static_cast<std::size_t>(tok)];
        if (tok == screen::Vocabulary::kEoc || tok == screen::Vocabulary::kEos) {
          next.done = true;
        } else {
          next.tokens.push_back(tok);
        }
        candidates.push_back(std::move(next));
      }
    }
    if (!any_active) break;
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Beam& a, const Beam& b) {
                       if (a.score() != b.score()) return a.score() > b.score();
                       return a.tokens < b.tokens;
                     });
    if (static_cast<int>(candidates.size()) > cfg.beam_size) {
      candidates.resize(static_cast<std::size_t>(cfg.beam_size));
    }
    beams = std::move(candidates);
  }
  for (Beam& b : beams) b.done = true;
  std::stable_sort(beams.begin(), beams.end(), [](const Beam& a, const Beam& b) {
    if (a.score() != b.score()) return a.score() > b.score();
    return a.tokens < b.tokens;
  });
  return beams.front().tokens;
}

// P(<yes>) renormalized over {<yes>, <no>} at the next-token position.
template <typename S>
double yes_probability(ParamStore<S>& ps, const SpotlightConfig& cfg,
                       const TupleMemory<S>& mem, const std::vector<int>& prompt,
                       const std::vector<int>& prompt_tuple_ids) {
  RunState rs;
  num::Tensor<S> logits = decode_forward(ps, cfg, mem, prompt, prompt_tuple_ids, rs);
  const std::vector<double> lp =
      detail::log_softmax_row(logits, static_cast<int>(prompt.size()) - 1);
  const double py = std::exp(lp[screen::Vocabulary::kYes]);
  const double pn = std::exp(lp[screen::Vocabulary::kNo]);
  return py / (py + pn);
}

}  // namespace spotlight::model
