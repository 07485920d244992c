#pragma once

// Deterministic synthetic UI screens: colored primitives on a grid whose
// captions, commands and summaries are exact templates of the rendered
// content. Stands in for a large crawled screen corpus at desk scale.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "spotlight/screen/types.hpp"
#include "spotlight/screen/vocab.hpp"

namespace spotlight::synth {

enum class Shape { Button, Checkbox, Icon, Textfield };

std::string to_string(Shape s);

struct SynthObject {
  screen::BoundingBox box;  // normalized against the rendered image
  Shape shape = Shape::Button;
  std::string color;
  int grid_row = 0, grid_col = 0;
  bool tappable = false;  // shape is button or checkbox
  std::string caption;    // "<color> <shape> <vert> <horiz>"
  std::string command;    // "click on <caption>"
};

struct SynthScreen {
  std::string screen_id;
  screen::Image image;
  std::vector<SynthObject> objects;
  std::string summary;  // "screen with N objects including a <color> <shape>"
};

struct SynthConfig {
  int render_width = 112;
  int render_height = 112;
  int grid_rows = 6;
  int grid_cols = 4;
  int min_objects = 2;
  int max_objects = 6;
  std::vector<std::string> colors = {"red", "green", "blue", "yellow", "magenta", "cyan"};
};

// Pure function of (seed, cfg): same seed, bit-identical screen.
SynthScreen generate_screen(std::uint64_t seed, const SynthConfig& cfg);

// Recovers the fill color name at the box center; used to verify rendering.
std::string detect_color_at_center(const screen::Image& img, const screen::BoundingBox& box,
                                   const SynthConfig& cfg);

struct CaptionExample {
  std::string screen_id;
  screen::BoundingBox box;
  std::string text;
};
struct SummaryExample {
  std::string screen_id;
  std::string text;
};
struct GroundingExample {
  std::string screen_id;
  std::string command;
  std::vector<screen::BoundingBox> candidates;
  int gold_index = 0;
};
struct TapExample {
  std::string screen_id;
  screen::BoundingBox box;
  bool tappable = false;
};

template <typename T>
struct Split {
  std::vector<T> train, dev, test;
};

struct SynthCorpus {
  std::vector<SynthScreen> screens;  // all splits
  std::vector<std::string> train_ids, dev_ids, test_ids;  // 80/10/10, disjoint
  std::vector<screen::ScreenObjectTextTuple> pretrain_tuples;  // train screens only
  Split<CaptionExample> captions;
  Split<SummaryExample> summaries;
  Split<GroundingExample> groundings;
  Split<TapExample> taps;
  screen::Vocabulary vocab;  // covers captions, summaries, commands, prompts
};

SynthCorpus generate_corpus(int n_screens, std::uint64_t seed, const SynthConfig& cfg);

// Writes images/, examples.jsonl, vocab.txt and the four task datasets
// under out_dir (same formats the corpus pipeline emits).
void write_corpus(const SynthCorpus& corpus, const std::string& out_dir,
                  std::uint64_t pack_seed, int n_examples, int max_tuples = 5);

}  // namespace spotlight::synth
