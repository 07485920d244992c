#pragma once

// Training and evaluation driver. Works on in-memory data: preprocessed
// screens keyed by id, packed pretraining examples, and per-task item
// lists. The CLI layers file loading on top of this.

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "spotlight/model/model.hpp"
#include "spotlight/screen/preprocess.hpp"
#include "spotlight/screen/types.hpp"
#include "spotlight/screen/vocab.hpp"
#include "spotlight/synth/synth.hpp"
#include "spotlight/train/optimizer.hpp"

namespace spotlight::train {

struct TrainError : std::runtime_error {
  explicit TrainError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ModelState {
  model::SpotlightConfig cfg;
  model::ParamStore<float> ps;

  ModelState(model::SpotlightConfig c, std::uint64_t seed) : cfg(c), ps(seed) {
    cfg.validate();
  }
};

// Preprocessed screens, shared by reference from every tuple.
class ScreenSet {
 public:
  void put(const std::string& id, screen::Screenshot scr) {
    screens_[id] = std::make_shared<screen::Screenshot>(std::move(scr));
  }
  const screen::Screenshot& at(const std::string& id) const {
    auto it = screens_.find(id);
    if (it == screens_.end()) throw TrainError("unknown screen id '" + id + "'");
    return *it->second;
  }
  std::size_t size() const { return screens_.size(); }

 private:
  std::map<std::string, std::shared_ptr<screen::Screenshot>> screens_;
};

ScreenSet preprocess_synth_screens(const synth::SynthCorpus& corpus,
                                   const model::SpotlightConfig& cfg);

// Generation item: produce `tokens` for the region. Classification item:
// answer yes/no to `prompt` about the region. Grounding item: pick the
// candidate that matches the prompt.
struct GenItem {
  std::string screen_id;
  screen::BoundingBox box;
  std::vector<int> tokens;
};
struct ClsItem {
  std::string screen_id;
  screen::BoundingBox box;
  std::vector<int> prompt;
  bool yes = false;
};
struct GroundItem {
  std::string screen_id;
  std::vector<int> prompt;
  std::vector<screen::BoundingBox> candidates;
  int gold = 0;
};

template <typename T>
struct TaskSplit {
  std::vector<T> train, dev, test;
};

struct TaskData {
  TaskSplit<GenItem> captions;
  TaskSplit<GenItem> summaries;
  TaskSplit<GroundItem> groundings;
  TaskSplit<ClsItem> taps;
};

TaskData task_data_from_synth(const synth::SynthCorpus& corpus,
                              const screen::Vocabulary& vocab);

struct TrainConfig {
  int batch_size = 16;
  int steps = 3000;
  std::uint64_t seed = 1;
  double dropout = 0.1;
  OptimizerConfig opt;
  bool freeze_encoder = false;
  int log_every = 50;
  // Multitask sampling weights: caption, summary, grounding, tappability.
  std::array<double, 4> task_weights = {4.0, 4.0, 2.0, 1.0};
};

struct TrainLogEntry {
  int step = 0;
  double loss = 0.0;
  double lr = 0.0;
};

std::vector<TrainLogEntry> pretrain(ModelState& state,
                                    const std::vector<screen::ExampleRecord>& examples,
                                    const ScreenSet& screens, const TrainConfig& cfg,
                                    std::ostream* log = nullptr);

std::vector<TrainLogEntry> finetune_generation(ModelState& state,
                                               const std::vector<GenItem>& items,
                                               const ScreenSet& screens,
                                               const TrainConfig& cfg,
                                               std::ostream* log = nullptr);

std::vector<TrainLogEntry> finetune_classification(ModelState& state,
                                                   const std::vector<ClsItem>& items,
                                                   const ScreenSet& screens,
                                                   const TrainConfig& cfg,
                                                   std::ostream* log = nullptr);

std::vector<TrainLogEntry> finetune_grounding(ModelState& state,
                                              const std::vector<GroundItem>& items,
                                              const ScreenSet& screens,
                                              const TrainConfig& cfg,
                                              std::ostream* log = nullptr);

// Mixes the four tasks with sampling weights caption:3, summary:2,
// grounding:15, tappability:1.
std::vector<TrainLogEntry> multitask(ModelState& state, const TaskData& data,
                                     const ScreenSet& screens, const TrainConfig& cfg,
                                     std::ostream* log = nullptr);

// --- Evaluation -----------------------------------------------------------

// CIDEr over generated text. `shots` > 0 prepends that many exemplar
// tuples drawn deterministically from `shot_pool`.
double eval_generation_cider(ModelState& state, const std::vector<GenItem>& items,
                             const ScreenSet& screens, const screen::Vocabulary& vocab,
                             int shots = 0, const std::vector<GenItem>* shot_pool = nullptr,
                             std::uint64_t seed = 0);

struct ClassificationEval {
  double accuracy = 0.0;
  double f1 = 0.0;
};
ClassificationEval eval_classification(ModelState& state, const std::vector<ClsItem>& items,
                                       const ScreenSet& screens);

double eval_grounding_accuracy(ModelState& state, const std::vector<GroundItem>& items,
                               const ScreenSet& screens);

}  // namespace spotlight::train
