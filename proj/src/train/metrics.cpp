#include "spotlight/train/metrics.hpp"

#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace spotlight::train {

namespace {

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

// Raw n-gram counts for one sentence at a fixed n.
std::map<std::string, int> ngram_counts(const std::vector<std::string>& toks, int n) {
  std::map<std::string, int> out;
  for (int i = 0; i + n <= static_cast<int>(toks.size()); ++i) {
    std::string key = toks[static_cast<std::size_t>(i)];
    for (int j = 1; j < n; ++j) key += " " + toks[static_cast<std::size_t>(i + j)];
    ++out[key];
  }
  return out;
}

}  // namespace

double cider(const std::vector<std::string>& candidates,
             const std::vector<std::string>& references) {
  if (candidates.size() != references.size()) {
    throw std::invalid_argument("cider: candidate/reference count mismatch");
  }
  if (candidates.empty()) throw std::invalid_argument("cider: empty input");
  const int n_docs = static_cast<int>(references.size());

  double total = 0.0;
  for (int n = 1; n <= 4; ++n) {
    // Document frequency over the reference corpus.
    std::map<std::string, int> df;
    for (const auto& ref : references) {
      for (const auto& [gram, cnt] : ngram_counts(split_ws(ref), n)) ++df[gram];
    }
    const auto idf = [&](const std::string& gram) {
      auto it = df.find(gram);
      const int d = it == df.end() ? 1 : it->second;
      return std::log(static_cast<double>(n_docs)) - std::log(static_cast<double>(d));
    };

    double level = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const auto cand = ngram_counts(split_ws(candidates[i]), n);
      const auto ref = ngram_counts(split_ws(references[i]), n);
      double dot = 0.0, nc = 0.0, nr = 0.0;
      for (const auto& [gram, cnt] : cand) {
        const double w = cnt * idf(gram);
        nc += w * w;
        auto it = ref.find(gram);
        if (it != ref.end()) dot += w * (it->second * idf(gram));
      }
      for (const auto& [gram, cnt] : ref) {
        const double w = cnt * idf(gram);
        nr += w * w;
      }
      if (nc > 0.0 && nr > 0.0) level += dot / (std::sqrt(nc) * std::sqrt(nr));
    }
    total += level / static_cast<double>(candidates.size());
  }
  return 10.0 * total / 4.0;
}

double accuracy(const std::vector<int>& predictions, const std::vector<int>& gold) {
  if (predictions.size() != gold.size() || predictions.empty()) {
    throw std::invalid_argument("accuracy: size mismatch or empty input");
  }
  int correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) correct += predictions[i] == gold[i];
  return static_cast<double>(correct) / static_cast<double>(gold.size());
}

double f1_score(const std::vector<int>& predictions, const std::vector<int>& gold) {
  if (predictions.size() != gold.size() || predictions.empty()) {
    throw std::invalid_argument("f1_score: size mismatch or empty input");
  }
  int tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (predictions[i] == 1 && gold[i] == 1) ++tp;
    else if (predictions[i] == 1 && gold[i] == 0) ++fp;
    else if (predictions[i] == 0 && gold[i] == 1) ++fn;
  }
  const double denom = 2.0 * tp + fp + fn;
  return denom == 0.0 ? 0.0 : 2.0 * tp / denom;
}

}  // namespace spotlight::train
