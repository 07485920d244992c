#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>

namespace spotlight::corpus {

struct FilterConfig {
  std::unordered_set<std::string> generic_words;  // defaults to the stock list
  int min_count = 5;
  double ocr_min_confidence = 0.8;
  double subsample_t = 1e-5;
  double uniform_color_epsilon = 2.0 / 255.0;
  // Word2vec has two subsampling variants; the plain discard rule is the
  // default, the smoothed one sits behind this flag.
  bool smoothed_subsample = false;
  int max_hierarchy_depth = 64;

  static FilterConfig defaults();
};

// Corpus-global phrase counts for the min-count rule and subsampling
// (two-pass pipeline: pass 1 fills this, pass 2 filters against it).
struct PhraseCounts {
  std::unordered_map<std::string, long> counts;
  long total = 0;

  void add(const std::string& phrase) {
    ++counts[phrase];
    ++total;
  }
  long count(const std::string& phrase) const {
    auto it = counts.find(phrase);
    return it == counts.end() ? 0 : it->second;
  }
  double frequency(const std::string& phrase) const {
    return total == 0 ? 0.0 : static_cast<double>(count(phrase)) / total;
  }
};

enum class RejectReason {
  Empty,
  NonAscii,
  Url,
  SingleCharacter,
  NonAlphabetic,
  GenericOnly,
  TooRare,
};

std::string to_string(RejectReason r);

struct FilterResult {
  std::optional<std::string> text;  // normalized, accepted
  RejectReason reason = RejectReason::Empty;

  bool accepted() const { return text.has_value(); }
};

// Lowercases, collapses runs of spaces/underscores, then applies the
// removal rules. `counts == nullptr` skips the corpus-global min-count
// rule (pass 1 of the pipeline).
FilterResult filter_text(const std::string& s, const PhraseCounts* counts,
                         const FilterConfig& cfg);

// Normalization only (shared with pass-1 counting).
std::string normalize_text(const std::string& s);

// keep probability = min(1, sqrt(t / f)); the smoothed variant is
// (sqrt(f/t) + 1) * t / f. Throws on non-positive frequency.
double subsample_keep_prob(double word_frequency, double t, bool smoothed = false);

}  // namespace spotlight::corpus
