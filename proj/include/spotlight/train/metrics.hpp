#pragma once

// Evaluation metrics: CIDEr for generation, accuracy and F1 for
// classification. CIDEr here is the base variant: TF-IDF n-gram vectors
// (n = 1..4) with document frequency from the reference corpus, cosine
// similarity averaged over n and scaled by 10.

#include <string>
#include <vector>

namespace spotlight::train {

// One reference per candidate; both sides are whitespace-split internally.
double cider(const std::vector<std::string>& candidates,
             const std::vector<std::string>& references);

double accuracy(const std::vector<int>& predictions, const std::vector<int>& gold);

// Binary F1 with label 1 as positive; returns 0 when precision+recall == 0.
double f1_score(const std::vector<int>& predictions, const std::vector<int>& gold);

}  // namespace spotlight::train
