#include "spotlight/train/trainer.hpp"

#include <limits>
#include <functional>
#include <random>

#include "spotlight/train/metrics.hpp"

namespace spotlight::train {

using model::EncodedScreen;
using model::RunState;
using model::TaskTuple;
using screen::Vocabulary;

ScreenSet preprocess_synth_screens(const synth::SynthCorpus& corpus,
                                   const model::SpotlightConfig& cfg) {
  ScreenSet out;
  for (const auto& scr : corpus.screens) {
    out.put(scr.screen_id,
            screen::preprocess_screenshot(scr.image, cfg.image_size, cfg.patch_size));
  }
  return out;
}

TaskData task_data_from_synth(const synth::SynthCorpus& corpus,
                              const Vocabulary& vocab) {
  TaskData out;
  const auto gen_items = [&](const std::vector<synth::CaptionExample>& src) {
    std::vector<GenItem> items;
    for (const auto& e : src) {
      items.push_back({e.screen_id, e.box, screen::tokenize(e.text, vocab)});
    }
    return items;
  };
  out.captions = {gen_items(corpus.captions.train), gen_items(corpus.captions.dev),
                  gen_items(corpus.captions.test)};

  const auto sum_items = [&](const std::vector<synth::SummaryExample>& src) {
    std::vector<GenItem> items;
    for (const auto& e : src) {
      items.push_back({e.screen_id, screen::BoundingBox::full_screen(),
                       screen::tokenize(e.text, vocab)});
    }
    return items;
  };
  out.summaries = {sum_items(corpus.summaries.train), sum_items(corpus.summaries.dev),
                   sum_items(corpus.summaries.test)};

  const auto ground_items = [&](const std::vector<synth::GroundingExample>& src) {
    std::vector<GroundItem> items;
    for (const auto& e : src) {
      items.push_back(
          {e.screen_id, screen::tokenize(e.command, vocab), e.candidates, e.gold_index});
    }
    return items;
  };
  out.groundings = {ground_items(corpus.groundings.train),
                    ground_items(corpus.groundings.dev),
                    ground_items(corpus.groundings.test)};

  const std::vector<int> tap_prompt = screen::tokenize("is this tappable ?", vocab);
  const auto tap_items = [&](const std::vector<synth::TapExample>& src) {
    std::vector<ClsItem> items;
    for (const auto& e : src) {
      items.push_back({e.screen_id, e.box, tap_prompt, e.tappable});
    }
    return items;
  };
  out.taps = {tap_items(corpus.taps.train), tap_items(corpus.taps.dev),
              tap_items(corpus.taps.test)};
  return out;
}

namespace {

// Cycles a shuffled index order; reshuffles at every epoch boundary.
class IndexStream {
 public:
  IndexStream(std::size_t n, std::uint64_t seed) : rng_(seed), order_(n) {
    if (n == 0) throw TrainError("empty dataset");
    for (std::size_t i = 0; i < n; ++i) order_[i] = i;
    std::shuffle(order_.begin(), order_.end(), rng_);
  }
  std::size_t next() {
    if (pos_ == order_.size()) {
      std::shuffle(order_.begin(), order_.end(), rng_);
      pos_ = 0;
    }
    return order_[pos_++];
  }

 private:
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

// Encodes each distinct screen once per example; must live while the
// tuples referencing it are used.
class EncodeCache {
 public:
  EncodeCache(ModelState& s, const ScreenSet& screens, RunState& rs)
      : state_(s), screens_(screens), rs_(rs) {}

  std::pair<const screen::Screenshot*, const EncodedScreen<float>*> get(
      const std::string& id) {
    auto it = cache_.find(id);
    if (it == cache_.end()) {
      const screen::Screenshot& scr = screens_.at(id);
      it = cache_
               .emplace(id, std::make_unique<EncodedScreen<float>>(
                                model::encode_screen(state_.ps, state_.cfg, scr, rs_)))
               .first;
    }
    return {&screens_.at(id), it->second.get()};
  }

 private:
  ModelState& state_;
  const ScreenSet& screens_;
  RunState& rs_;
  std::map<std::string, std::unique_ptr<EncodedScreen<float>>> cache_;
};

// Shared SGD loop: `example_loss` runs one forward/backward for batch slot
// b of the given step and returns the loss value.
std::vector<TrainLogEntry> run_steps(
    ModelState& state, const TrainConfig& cfg, std::ostream* log,
    const std::function<double(int step, int b, RunState& rs)>& example_loss) {
  TrainConfig tc = cfg;
  Adam<float> opt(tc.opt);
  if (tc.freeze_encoder) opt.freeze_prefix("enc.");
  std::vector<TrainLogEntry> entries;
  for (int step = 1; step <= tc.steps; ++step) {
    state.ps.zero_grads();
    double batch_loss = 0.0;
    for (int b = 0; b < tc.batch_size; ++b) {
      RunState rs;
      rs.train = true;
      rs.dropout = tc.dropout;
      rs.rng = {tc.seed, static_cast<std::uint64_t>(step) * tc.batch_size +
                             static_cast<std::uint64_t>(b),
                0};
      batch_loss += example_loss(step, b, rs);
    }
    opt.step(state.ps, 1.0 / tc.batch_size);
    if (step == 1 || step == tc.steps || step % tc.log_every == 0) {
      TrainLogEntry e{step, batch_loss / tc.batch_size, opt.current_lr()};
      entries.push_back(e);
      if (log) {
        (*log) << "step " << e.step << " loss " << e.loss << " lr " << e.lr << "\n";
      }
    }
  }
  return entries;
}

}  // namespace

std::vector<TrainLogEntry> pretrain(ModelState& state,
                                    const std::vector<screen::ExampleRecord>& examples,
                                    const ScreenSet& screens, const TrainConfig& cfg,
                                    std::ostream* log) {
  IndexStream stream(examples.size(), cfg.seed ^ 0xa5a5a5a5ull);
  return run_steps(state, cfg, log, [&](int, int, RunState& rs) {
    const screen::ExampleRecord& ex = examples[stream.next()];
    num::GradTape<float> tape;
    EncodeCache cache(state, screens, rs);
    std::vector<TaskTuple<float>> tuples;
    for (const auto& slot : ex.slots) {
      if (slot.pad) continue;
      auto [scr, enc] = cache.get(slot.screen_id);
      tuples.push_back({scr, enc, slot.region, slot.token_ids});
    }
    if (tuples.empty()) throw TrainError("example '" + ex.example_id + "' has no tuples");
    num::Tensor<float> loss = model::chunk_loss(state.ps, state.cfg, tuples, rs);
    num::backward(loss);
    return static_cast<double>(loss.val(0));
  });
}

std::vector<TrainLogEntry> finetune_generation(ModelState& state,
                                               const std::vector<GenItem>& items,
                                               const ScreenSet& screens,
                                               const TrainConfig& cfg, std::ostream* log) {
  IndexStream stream(items.size(), cfg.seed ^ 0x5a5a5a5aull);
  return run_steps(state, cfg, log, [&](int, int, RunState& rs) {
    const GenItem& item = items[stream.next()];
    num::GradTape<float> tape;
    EncodeCache cache(state, screens, rs);
    auto [scr, enc] = cache.get(item.screen_id);
    std::vector<TaskTuple<float>> tuples = {{scr, enc, item.box, item.tokens}};
    num::Tensor<float> loss = model::chunk_loss(state.ps, state.cfg, tuples, rs);
    num::backward(loss);
    return static_cast<double>(loss.val(0));
  });
}

std::vector<TrainLogEntry> finetune_classification(ModelState& state,
                                                   const std::vector<ClsItem>& items,
                                                   const ScreenSet& screens,
                                                   const TrainConfig& cfg,
                                                   std::ostream* log) {
  IndexStream stream(items.size(), cfg.seed ^ 0x3c3c3c3cull);
  return run_steps(state, cfg, log, [&](int, int, RunState& rs) {
    const ClsItem& item = items[stream.next()];
    num::GradTape<float> tape;
    EncodeCache cache(state, screens, rs);
    auto [scr, enc] = cache.get(item.screen_id);
    TaskTuple<float> tuple{scr, enc, item.box, {}};
    num::Tensor<float> loss =
        model::classification_loss(state.ps, state.cfg, tuple, item.prompt, item.yes, rs);
    num::backward(loss);
    return static_cast<double>(loss.val(0));
  });
}

namespace {

// Grounding trains the generative head: maximize the likelihood of the
// command text given the gold region. Evaluation ranks candidates by that
// same likelihood, so no explicit negatives are needed.
num::Tensor<float> grounding_loss(ModelState& state, EncodeCache& cache,
                                  const GroundItem& item, RunState& rs) {
  auto [scr, enc] = cache.get(item.screen_id);
  const screen::BoundingBox& gold =
      item.candidates[static_cast<std::size_t>(item.gold)];
  return model::chunk_loss(state.ps, state.cfg, {{scr, enc, gold, item.prompt}}, rs);
}

}  // namespace

std::vector<TrainLogEntry> finetune_grounding(ModelState& state,
                                              const std::vector<GroundItem>& items,
                                              const ScreenSet& screens,
                                              const TrainConfig& cfg, std::ostream* log) {
  IndexStream stream(items.size(), cfg.seed ^ 0xc3c3c3c3ull);
  return run_steps(state, cfg, log, [&](int, int, RunState& rs) {
    const GroundItem& item = items[stream.next()];
    num::GradTape<float> tape;
    EncodeCache cache(state, screens, rs);
    num::Tensor<float> loss = grounding_loss(state, cache, item, rs);
    num::backward(loss);
    return static_cast<double>(loss.val(0));
  });
}

std::vector<TrainLogEntry> multitask(ModelState& state, const TaskData& data,
                                     const ScreenSet& screens, const TrainConfig& cfg,
                                     std::ostream* log) {
  if (data.captions.train.empty() || data.summaries.train.empty() ||
      data.groundings.train.empty() || data.taps.train.empty()) {
    throw TrainError("multitask: every task needs a non-empty train split");
  }
  std::mt19937_64 task_rng(cfg.seed ^ 0xdeadbeefull);
  std::discrete_distribution<int> task_dist(cfg.task_weights.begin(),
                                            cfg.task_weights.end());
  IndexStream cap_stream(data.captions.train.size(), cfg.seed + 11);
  IndexStream sum_stream(data.summaries.train.size(), cfg.seed + 22);
  IndexStream grd_stream(data.groundings.train.size(), cfg.seed + 33);
  IndexStream tap_stream(data.taps.train.size(), cfg.seed + 44);

  return run_steps(state, cfg, log, [&](int, int, RunState& rs) {
    num::GradTape<float> tape;
    EncodeCache cache(state, screens, rs);
    num::Tensor<float> loss;
    switch (task_dist(task_rng)) {
      case 0: {
        const GenItem& item = data.captions.train[cap_stream.next()];
        auto [scr, enc] = cache.get(item.screen_id);
        loss = model::chunk_loss(state.ps, state.cfg,
                                 {{scr, enc, item.box, item.tokens}}, rs);
        break;
      }
      case 1: {
        const GenItem& item = data.summaries.train[sum_stream.next()];
        auto [scr, enc] = cache.get(item.screen_id);
        loss = model::chunk_loss(state.ps, state.cfg,
                                 {{scr, enc, item.box, item.tokens}}, rs);
        break;
      }
      case 2: {
        const GroundItem& item = data.groundings.train[grd_stream.next()];
        loss = grounding_loss(state, cache, item, rs);
        break;
      }
      default: {
        const ClsItem& item = data.taps.train[tap_stream.next()];
        auto [scr, enc] = cache.get(item.screen_id);
        TaskTuple<float> tuple{scr, enc, item.box, {}};
        loss = model::classification_loss(state.ps, state.cfg, tuple, item.prompt,
                                          item.yes, rs);
        break;
      }
    }
    num::backward(loss);
    return static_cast<double>(loss.val(0));
  });
}

// --- Evaluation -------------------------------------------------------------

namespace {

// Eval-time screen encodings (no tape, no dropout), cached across items.
class EvalEncodings {
 public:
  EvalEncodings(ModelState& s, const ScreenSet& screens) : state_(s), screens_(screens) {}
  std::pair<const screen::Screenshot*, const EncodedScreen<float>*> get(
      const std::string& id) {
    auto it = cache_.find(id);
    if (it == cache_.end()) {
      RunState rs;
      const screen::Screenshot& scr = screens_.at(id);
      it = cache_
               .emplace(id, std::make_unique<EncodedScreen<float>>(
                                model::encode_screen(state_.ps, state_.cfg, scr, rs)))
               .first;
    }
    return {&screens_.at(id), it->second.get()};
  }

 private:
  ModelState& state_;
  const ScreenSet& screens_;
  std::map<std::string, std::unique_ptr<EncodedScreen<float>>> cache_;
};

}  // namespace

double eval_generation_cider(ModelState& state, const std::vector<GenItem>& items,
                             const ScreenSet& screens, const Vocabulary& vocab,
                             int shots, const std::vector<GenItem>* shot_pool,
                             std::uint64_t seed) {
  if (items.empty()) throw TrainError("eval_generation_cider: no items");
  if (shots > 0 && (shot_pool == nullptr || shot_pool->empty())) {
    throw TrainError("eval_generation_cider: shots requested without a shot pool");
  }
  EvalEncodings enc(state, screens);
  std::vector<std::string> candidates, references;
  std::mt19937_64 shot_rng(seed ^ 0x517cc1b727220a95ull);
  for (const auto& item : items) {
    std::vector<TaskTuple<float>> shot_tuples;
    for (int s = 0; s < shots; ++s) {
      const GenItem& shot =
          (*shot_pool)[std::uniform_int_distribution<std::size_t>(
              0, shot_pool->size() - 1)(shot_rng)];
      auto [scr, e] = enc.get(shot.screen_id);
      shot_tuples.push_back({scr, e, shot.box, shot.tokens});
    }
    auto [scr, e] = enc.get(item.screen_id);
    TaskTuple<float> query{scr, e, item.box, {}};
    const std::vector<int> out =
        model::generate_text(state.ps, state.cfg, shot_tuples, query);
    candidates.push_back(screen::detokenize(out, vocab));
    references.push_back(screen::detokenize(item.tokens, vocab));
  }
  return cider(candidates, references);
}

ClassificationEval eval_classification(ModelState& state, const std::vector<ClsItem>& items,
                                       const ScreenSet& screens) {
  if (items.empty()) throw TrainError("eval_classification: no items");
  EvalEncodings enc(state, screens);
  std::vector<int> pred, gold;
  for (const auto& item : items) {
    auto [scr, e] = enc.get(item.screen_id);
    TaskTuple<float> tuple{scr, e, item.box, {}};
    const double p =
        model::classify_yes_probability(state.ps, state.cfg, tuple, item.prompt);
    pred.push_back(p >= 0.5 ? 1 : 0);
    gold.push_back(item.yes ? 1 : 0);
  }
  return {accuracy(pred, gold), f1_score(pred, gold)};
}

double eval_grounding_accuracy(ModelState& state, const std::vector<GroundItem>& items,
                               const ScreenSet& screens) {
  if (items.empty()) throw TrainError("eval_grounding_accuracy: no items");
  EvalEncodings enc(state, screens);
  std::vector<int> pred, gold;
  for (const auto& item : items) {
    auto [scr, e] = enc.get(item.screen_id);
    int best = 0;
    double best_nll = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < item.candidates.size(); ++c) {
      RunState rs;
      const double nll = static_cast<double>(
          model::chunk_loss(state.ps, state.cfg, {{scr, e, item.candidates[c], item.prompt}},
                            rs)
              .val(0));
      if (nll < best_nll) {
        best_nll = nll;
        best = static_cast<int>(c);
      }
    }
    pred.push_back(best);
    gold.push_back(item.gold);
  }
  return accuracy(pred, gold);
}

}  // namespace spotlight::train
