#pragma once

#include <random>
#include <string>
#include <vector>

#include "spotlight/corpus/extract.hpp"
#include "spotlight/screen/vocab.hpp"

namespace spotlight::corpus {

// --- line-delimited input schemas -----------------------------------------

// mobile-vh-v1: one screen per line (nested node tree + OCR records).
struct MobileScreenRecord {
  std::string screen_id;
  std::string image_path;  // relative to the record file's directory
  screen::ViewHierarchyNode root;
  std::vector<screen::OcrRecord> ocr;
};

// web-obj-v1: one page per line (flat attribute maps per object).
struct WebPageRecord {
  std::string screen_id;
  std::string image_path;  // may be empty
  std::string title;
  std::vector<screen::HtmlObjectRecord> objects;
};

MobileScreenRecord parse_mobile_record(const std::string& json_line);
WebPageRecord parse_web_record(const std::string& json_line);

// --- sampling --------------------------------------------------------------

// Draws tuples per the pretraining sampling rules: titles with a small
// fixed weight for web data, otherwise a uniform object pick followed by a
// uniform pick among the object's populated attributes, then frequency
// subsampling.
class TupleSampler {
 public:
  TupleSampler(std::vector<screen::ScreenObjectTextTuple> tuples, double title_weight);

  bool empty() const { return objects_.empty() && titles_.empty(); }
  std::size_t tuple_count() const { return total_tuples_; }

  const screen::ScreenObjectTextTuple& draw(std::mt19937_64& rng,
                                            const PhraseCounts& counts,
                                            const FilterConfig& cfg) const;

 private:
  std::vector<std::vector<screen::ScreenObjectTextTuple>> objects_;
  std::vector<screen::ScreenObjectTextTuple> titles_;
  double title_weight_;
  std::size_t total_tuples_ = 0;
};

// Draws k ~ Uniform{1..max_tuples} real tuples and pads to max_tuples with
// flagged dummy slots.
screen::ExampleRecord pack_example(const TupleSampler& sampler, std::mt19937_64& rng,
                                   const PhraseCounts& counts, const FilterConfig& cfg,
                                   const screen::Vocabulary& vocab,
                                   const std::string& example_id, int max_tuples = 5);

// Web/mobile batch mixing at a configured ratio; each batch comes wholly
// from one source.
class MixedStream {
 public:
  MixedStream(TupleSampler web, TupleSampler mobile, double web_fraction,
              PhraseCounts counts, FilterConfig cfg, screen::Vocabulary vocab,
              std::uint64_t seed, int max_tuples = 5);

  std::vector<screen::ExampleRecord> next_batch(int batch_size);
  bool last_batch_was_web() const { return last_web_; }

 private:
  TupleSampler web_;
  TupleSampler mobile_;
  double web_fraction_;
  PhraseCounts counts_;
  FilterConfig cfg_;
  screen::Vocabulary vocab_;
  std::mt19937_64 rng_;
  int max_tuples_;
  long counter_ = 0;
  bool last_web_ = false;
};

// --- stats ------------------------------------------------------------------

struct StatsRow {
  std::string source;
  long tuple_count = 0;
  double avg_words = 0.0;
};

std::vector<StatsRow> corpus_stats(const std::vector<screen::ScreenObjectTextTuple>& tuples);
std::string stats_to_tsv(const std::vector<StatsRow>& rows);

// --- example record serialization (spotlight-ex-v1) -------------------------

std::string example_to_json(const screen::ExampleRecord& ex);
screen::ExampleRecord example_from_json(const std::string& line);
void write_examples(const std::string& path, const std::vector<screen::ExampleRecord>& examples);
std::vector<screen::ExampleRecord> read_examples(const std::string& path);

// --- full two-pass build -----------------------------------------------------

struct BuildConfig {
  int target_size = 112;
  int patch_size = 16;
  int n_examples = 512;
  int batch_size = 16;
  double web_fraction = 0.9;
  double title_weight = 0.01;
  int max_tuples = 5;
  int vocab_min_count = 1;
  std::uint64_t seed = 0;
  FilterConfig filter = FilterConfig::defaults();
};

struct BuildOutput {
  std::vector<screen::ScreenObjectTextTuple> mobile_tuples;
  std::vector<screen::ScreenObjectTextTuple> web_tuples;
  screen::Vocabulary vocab;
  PhraseCounts counts;
};

// Pass 1 + pass 2 over every *.jsonl under the two directories; emission
// order is deterministic (file name, then record index).
BuildOutput extract_corpus(const std::string& mobile_dir, const std::string& web_dir,
                           const BuildConfig& cfg);

// extract_corpus + packing + writing examples.jsonl / vocab.txt / stats.tsv.
void build_corpus(const std::string& mobile_dir, const std::string& web_dir,
                  const std::string& out_dir, const BuildConfig& cfg);

}  // namespace spotlight::corpus
