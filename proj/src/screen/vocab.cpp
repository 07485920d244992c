#include "spotlight/screen/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <stdexcept>

#include "spotlight/screen/types.hpp"

namespace spotlight::screen {

const std::vector<std::string>& Vocabulary::reserved_tokens() {
  static const std::vector<std::string> kReserved = {
      "<pad>", "<bos>", "<eos>", "<boc>", "<eoc>", "<yes>", "<no>", "<unk>"};
  return kReserved;
}

Vocabulary::Vocabulary() {
  for (const auto& t : reserved_tokens()) {
    ids_[t] = static_cast<int>(tokens_.size());
    tokens_.push_back(t);
  }
}

int Vocabulary::add(const std::string& token) {
  auto it = ids_.find(token);
  if (it != ids_.end()) return it->second;
  const int id = static_cast<int>(tokens_.size());
  ids_[token] = id;
  tokens_.push_back(token);
  return id;
}

int Vocabulary::id_of(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& token) const {
  return ids_.count(token) > 0;
}

const std::string& Vocabulary::token_of(int id) const {
  if (id < 0 || id >= size()) {
    throw DomainError("Vocabulary: id " + std::to_string(id) + " out of range");
  }
  return tokens_[id];
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DomainError("Vocabulary: cannot write " + path);
  for (const auto& t : tokens_) out << t << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("Vocabulary: cannot read " + path);
  Vocabulary v;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    if (lineno < kNumReserved) {
      if (line != reserved_tokens()[lineno]) {
        throw DomainError("Vocabulary: reserved token mismatch at line " +
                          std::to_string(lineno) + ": '" + line + "'");
      }
    } else {
      v.add(line);
    }
    ++lineno;
  }
  if (lineno < kNumReserved) {
    throw DomainError("Vocabulary: file " + path + " is missing reserved tokens");
  }
  return v;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& t : tokens_) {
    for (char c : t) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
    h ^= '\n';
    h *= 1099511628211ull;
  }
  return h;
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::string current;
  for (char raw : text) {
    const unsigned char uc = static_cast<unsigned char>(raw);
    const char c = static_cast<char>(std::tolower(uc));
    if (std::isalnum(uc)) {
      current.push_back(c);
    } else {
      if (!current.empty()) {
        words.push_back(current);
        current.clear();
      }
      if (!std::isspace(uc) && uc < 128) words.push_back(std::string(1, c));
    }
  }
  if (!current.empty()) words.push_back(current);
  return words;
}

std::vector<int> tokenize(const std::string& text, const Vocabulary& vocab) {
  std::vector<int> ids;
  for (const auto& w : split_words(text)) ids.push_back(vocab.id_of(w));
  return ids;
}

std::string detokenize(const std::vector<int>& ids, const Vocabulary& vocab) {
  std::string out;
  for (int id : ids) {
    if (!out.empty()) out.push_back(' ');
    out += vocab.token_of(id);
  }
  return out;
}

Vocabulary build_vocabulary(const std::vector<std::string>& corpus, int min_count) {
  // std::map keeps the id assignment deterministic (alphabetical).
  std::map<std::string, int> counts;
  for (const auto& text : corpus) {
    for (const auto& w : split_words(text)) ++counts[w];
  }
  Vocabulary v;
  for (const auto& [word, count] : counts) {
    if (count >= min_count) v.add(word);
  }
  return v;
}

std::string to_string(SourceTag tag) {
  switch (tag) {
    case SourceTag::Text: return "text";
    case SourceTag::AltText: return "alt_text";
    case SourceTag::MiscText: return "misc_text";
    case SourceTag::Title: return "title";
    case SourceTag::ContentDescription: return "content_description";
    case SourceTag::ResourceId: return "resource_id";
    case SourceTag::Ocr: return "ocr";
  }
  throw DomainError("unknown SourceTag");
}

SourceTag source_tag_from_string(const std::string& s) {
  if (s == "text") return SourceTag::Text;
  if (s == "alt_text") return SourceTag::AltText;
  if (s == "misc_text") return SourceTag::MiscText;
  if (s == "title") return SourceTag::Title;
  if (s == "content_description") return SourceTag::ContentDescription;
  if (s == "resource_id") return SourceTag::ResourceId;
  if (s == "ocr") return SourceTag::Ocr;
  throw DomainError("unknown source tag '" + s + "'");
}

}  // namespace spotlight::screen
