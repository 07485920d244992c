#include "spotlight/corpus/filter.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "spotlight/screen/vocab.hpp"

namespace spotlight::corpus {

namespace {

const char* kGenericWords[] = {
    "action", "bar", "menu", "title", "and", "ans", "app", "icon", "name",
    "arg", "background", "element", "btn", "but", "bottom", "button", "content",
    "desc", "text", "item", "empty", "fab", "image", "grid", "header", "img",
    "imgfile", "lbutton", "label", "letter", "list", "view", "pic",
    "placeholder", "random", "row", "single", "raw", "small", "large", "sub",
    "template", "navbar", "banner", "test", "textinput", "error", "texto",
    "todo", "toolbar", "tool", "track", "txt", "unknown", "stub", "web", "left",
    "right", "tlb", "nan", "page", "feature", "menugrid", "picture", "tabs",
    "number", "node", "iconimage", "entity", "webview", "heading", "logo",
    "tbl", "tab", "primary", "footer"};

bool looks_like_url(const std::string& text) {
  if (text.find("://") != std::string::npos) return true;
  std::istringstream is(text);
  std::string word;
  while (is >> word) {
    if (word.rfind("www.", 0) == 0) return true;
    if (word.rfind("http", 0) == 0 && word.find('.') != std::string::npos) return true;
  }
  return false;
}

}  // namespace

FilterConfig FilterConfig::defaults() {
  FilterConfig cfg;
  for (const char* w : kGenericWords) cfg.generic_words.insert(w);
  return cfg;
}

std::string to_string(RejectReason r) {
  switch (r) {
    case RejectReason::Empty: return "empty";
    case RejectReason::NonAscii: return "non_ascii";
    case RejectReason::Url: return "url";
    case RejectReason::SingleCharacter: return "single_character";
    case RejectReason::NonAlphabetic: return "non_alphabetic";
    case RejectReason::GenericOnly: return "generic_only";
    case RejectReason::TooRare: return "too_rare";
  }
  return "unknown";
}

std::string normalize_text(const std::string& s) {
  // Underscores count as spaces; runs collapse to one; everything lowercase.
  std::string out;
  bool pending_space = false;
  for (char raw : s) {
    const unsigned char uc = static_cast<unsigned char>(raw);
    if (std::isspace(uc) || raw == '_') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(uc)));
  }
  return out;
}

FilterResult filter_text(const std::string& s, const PhraseCounts* counts,
                         const FilterConfig& cfg) {
  for (char c : s) {
    if (static_cast<unsigned char>(c) >= 128) return {std::nullopt, RejectReason::NonAscii};
  }
  const std::string text = normalize_text(s);
  if (text.empty()) return {std::nullopt, RejectReason::Empty};
  if (looks_like_url(text)) return {std::nullopt, RejectReason::Url};
  if (text.size() == 1) return {std::nullopt, RejectReason::SingleCharacter};

  const auto words = screen::split_words(text);
  bool has_alpha_word = false;
  for (const auto& w : words) {
    if (std::all_of(w.begin(), w.end(), [](char c) {
          return std::isalpha(static_cast<unsigned char>(c));
        })) {
      has_alpha_word = true;
      break;
    }
  }
  if (!has_alpha_word) return {std::nullopt, RejectReason::NonAlphabetic};

  const bool all_generic = std::all_of(words.begin(), words.end(), [&](const std::string& w) {
    return cfg.generic_words.count(w) > 0;
  });
  if (all_generic) return {std::nullopt, RejectReason::GenericOnly};

  if (counts != nullptr && counts->count(text) < cfg.min_count) {
    return {std::nullopt, RejectReason::TooRare};
  }
  return {text, RejectReason::Empty};
}

double subsample_keep_prob(double word_frequency, double t, bool smoothed) {
  if (word_frequency <= 0.0) {
    throw std::invalid_argument("subsample_keep_prob: frequency must be positive");
  }
  if (word_frequency > 1.0) {
    throw std::invalid_argument("subsample_keep_prob: frequency must be <= 1");
  }
  const double keep = smoothed
                          ? (std::sqrt(word_frequency / t) + 1.0) * t / word_frequency
                          : std::sqrt(t / word_frequency);
  return std::min(1.0, keep);
}

}  // namespace spotlight::corpus
