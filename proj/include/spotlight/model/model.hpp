#pragma once

// Task-level glue over encoder/focus/decoder: sequence construction for
// pretraining chunks and classification prompts, per-example losses, and
// generation entry points. The decoder sequence convention is
//     <bos> [<boc> tokens... <eoc>]   (one chunk per tuple)   <eos>
// with tuple ids: <bos> -> 0, chunk j -> j, <eos> -> last chunk.

#include <functional>
#include <string>
#include <vector>

#include "spotlight/model/decoder.hpp"
#include "spotlight/screen/types.hpp"
#include "spotlight/screen/vocab.hpp"

namespace spotlight::model {

struct SequenceBatch {
  std::vector<int> inputs;
  std::vector<int> input_tuple_ids;
  std::vector<int> targets;
  std::vector<std::uint8_t> loss_mask;
};

// Chunked teacher-forcing sequence for 1..K tuples.
inline SequenceBatch make_pretrain_sequence(const std::vector<std::vector<int>>& chunks) {
  if (chunks.empty()) throw screen::DomainError("make_pretrain_sequence: no chunks");
  std::vector<int> full = {screen::Vocabulary::kBos};
  std::vector<int> tids = {0};
  for (std::size_t j = 0; j < chunks.size(); ++j) {
    full.push_back(screen::Vocabulary::kBoc);
    tids.push_back(static_cast<int>(j));
    for (int tok : chunks[j]) {
      full.push_back(tok);
      tids.push_back(static_cast<int>(j));
    }
    full.push_back(screen::Vocabulary::kEoc);
    tids.push_back(static_cast<int>(j));
  }
  full.push_back(screen::Vocabulary::kEos);
  tids.push_back(static_cast<int>(chunks.size()) - 1);

  SequenceBatch sb;
  sb.inputs.assign(full.begin(), full.end() - 1);
  sb.input_tuple_ids.assign(tids.begin(), tids.end() - 1);
  sb.targets.assign(full.begin() + 1, full.end());
  sb.loss_mask.assign(sb.targets.size(), 1);
  return sb;
}

// <bos> prompt... <label> <eos>, loss only on the label position.
inline SequenceBatch make_classification_sequence(const std::vector<int>& prompt,
                                                  int label_id) {
  std::vector<int> full = {screen::Vocabulary::kBos};
  full.insert(full.end(), prompt.begin(), prompt.end());
  full.push_back(label_id);
  full.push_back(screen::Vocabulary::kEos);
  SequenceBatch sb;
  sb.inputs.assign(full.begin(), full.end() - 1);
  sb.input_tuple_ids.assign(sb.inputs.size(), 0);
  sb.targets.assign(full.begin() + 1, full.end());
  sb.loss_mask.assign(sb.targets.size(), 0);
  sb.loss_mask[prompt.size()] = 1;  // the label
  return sb;
}

// One focused region with its text; the unit both losses and generation
// prompts are built from.
template <typename S>
struct TaskTuple {
  const screen::Screenshot* screen = nullptr;
  const EncodedScreen<S>* encoded = nullptr;
  screen::BoundingBox region;
  std::vector<int> token_ids;  // empty for the query tuple at inference
};

template <typename S>
TupleMemory<S> memory_from_tuples(ParamStore<S>& ps, const SpotlightConfig& cfg,
                                  const std::vector<TaskTuple<S>>& tuples, RunState& rs) {
  std::vector<MemorySlot<S>> slots;
  slots.reserve(tuples.size());
  for (const auto& t : tuples) slots.push_back({t.screen, t.encoded, t.region});
  return build_tuple_memory(ps, cfg, slots, rs);
}

// Mean next-token NLL over the chunked sequence for 1..K tuples.
template <typename S>
num::Tensor<S> chunk_loss(ParamStore<S>& ps, const SpotlightConfig& cfg,
                          const std::vector<TaskTuple<S>>& tuples, RunState& rs) {
  std::vector<std::vector<int>> chunks;
  chunks.reserve(tuples.size());
  for (const auto& t : tuples) {
    if (t.token_ids.empty()) throw screen::DomainError("chunk_loss: tuple without text");
    chunks.push_back(t.token_ids);
  }
  const SequenceBatch sb = make_pretrain_sequence(chunks);
  TupleMemory<S> mem = memory_from_tuples(ps, cfg, tuples, rs);
  num::Tensor<S> logits = decode_forward(ps, cfg, mem, sb.inputs, sb.input_tuple_ids, rs);
  return num::cross_entropy(logits, sb.targets, sb.loss_mask);
}

// Yes/no loss for a single focused region under a tokenized prompt.
template <typename S>
num::Tensor<S> classification_loss(ParamStore<S>& ps, const SpotlightConfig& cfg,
                                   const TaskTuple<S>& tuple, const std::vector<int>& prompt,
                                   bool label_yes, RunState& rs) {
  const SequenceBatch sb = make_classification_sequence(
      prompt, label_yes ? screen::Vocabulary::kYes : screen::Vocabulary::kNo);
  TupleMemory<S> mem = memory_from_tuples(ps, cfg, {tuple}, rs);
  num::Tensor<S> logits = decode_forward(ps, cfg, mem, sb.inputs, sb.input_tuple_ids, rs);
  return num::cross_entropy(logits, sb.targets, sb.loss_mask);
}

// Few-shot (0..N shots) generation: shot tuples come with their text, the
// query tuple does not. Returns the generated token ids.
template <typename S>
std::vector<int> generate_text(ParamStore<S>& ps, const SpotlightConfig& cfg,
                               const std::vector<TaskTuple<S>>& shots,
                               const TaskTuple<S>& query) {
  std::vector<TaskTuple<S>> all(shots);
  all.push_back(query);
  RunState rs;
  TupleMemory<S> mem = memory_from_tuples(ps, cfg, all, rs);
  std::vector<int> prompt = {screen::Vocabulary::kBos};
  std::vector<int> tids = {0};
  for (std::size_t j = 0; j < shots.size(); ++j) {
    prompt.push_back(screen::Vocabulary::kBoc);
    tids.push_back(static_cast<int>(j));
    for (int tok : shots[j].token_ids) {
      prompt.push_back(tok);
      tids.push_back(static_cast<int>(j));
    }
    prompt.push_back(screen::Vocabulary::kEoc);
    tids.push_back(static_cast<int>(j));
  }
  const int query_tid = static_cast<int>(shots.size());
  prompt.push_back(screen::Vocabulary::kBoc);
  tids.push_back(query_tid);
  return beam_search(ps, cfg, mem, prompt, tids, query_tid);
}

// P(yes | prompt, region) for tappability and grounding scoring.
template <typename S>
double classify_yes_probability(ParamStore<S>& ps, const SpotlightConfig& cfg,
                                const TaskTuple<S>& tuple, const std::vector<int>& prompt) {
  RunState rs;
  TupleMemory<S> mem = memory_from_tuples(ps, cfg, {tuple}, rs);
  std::vector<int> ids = {screen::Vocabulary::kBos};
  ids.insert(ids.end(), prompt.begin(), prompt.end());
  std::vector<int> tids(ids.size(), 0);
  return yes_probability(ps, cfg, mem, ids, tids);
}

}  // namespace spotlight::model
