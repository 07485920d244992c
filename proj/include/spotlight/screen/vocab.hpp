#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace spotlight::screen {

// Word-level vocabulary with eight reserved tokens at fixed ids. File
// format: one token per line, line number = id, reserved tokens first.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kBoc = 3;
  static constexpr int kEoc = 4;
  static constexpr int kYes = 5;
  static constexpr int kNo = 6;
  static constexpr int kUnk = 7;
  static constexpr int kNumReserved = 8;

  static const std::vector<std::string>& reserved_tokens();

  Vocabulary();  // reserved tokens only

  int add(const std::string& token);  // idempotent; returns id
  int id_of(const std::string& token) const;  // kUnk when absent
  bool contains(const std::string& token) const;
  const std::string& token_of(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  // FNV-1a over the token list; used as the checkpoint config gate.
  std::uint64_t hash() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

// Splits into lowercased word-level tokens: alphanumeric runs are words,
// every other non-space character is its own token.
std::vector<std::string> split_words(const std::string& text);

std::vector<int> tokenize(const std::string& text, const Vocabulary& vocab);
std::string detokenize(const std::vector<int>& ids, const Vocabulary& vocab);

// All words occurring at least min_count times, plus the reserved tokens.
Vocabulary build_vocabulary(const std::vector<std::string>& corpus, int min_count);

}  // namespace spotlight::screen
