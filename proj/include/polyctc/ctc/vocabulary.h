// polyctc/ctc/vocabulary.h
//
// SPDX-License-Identifier: Apache-2.0

#ifndef POLYCTC_CTC_VOCABULARY_H_
#define POLYCTC_CTC_VOCABULARY_H_

#include <string>
#include <unordered_map>
#include <vector>

namespace polyctc {

// Output symbols of the joint ASR/LID head: blank at id 0, then language
// codes, then linguistic tokens.
class Vocabulary {
 public:
  static constexpr int kBlank = 0;
  static constexpr const char *kBlankSymbol = "<blank>";

  Vocabulary() : Vocabulary({}, {}) {}
  // Throws VocabularyError on duplicates or when a symbol is both a
  // language code and a linguistic token.
  Vocabulary(const std::vector<std::string> &language_codes,
             const std::vector<std::string> &linguistic_tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string &token(int id) const { return tokens_.at(id); }
  // Throws VocabularyError for unknown symbols.
  int id(const std::string &symbol) const;
  bool contains(const std::string &symbol) const {
    return index_.count(symbol) > 0;
  }
  bool is_language_code(int id) const {
    return id >= 1 && id <= num_language_codes_;
  }
  int num_language_codes() const { return num_language_codes_; }
  std::vector<std::string> language_codes() const;
  const std::vector<std::string> &tokens() const { return tokens_; }

  std::vector<int> Encode(const std::vector<std::string> &symbols) const;
  std::vector<std::string> Decode(const std::vector<int> &ids) const;

  // One symbol per line: "<symbol>\t<blank|lang|token>".
  void Save(const std::string &path) const;
  static Vocabulary Load(const std::string &path);

  bool operator==(const Vocabulary &other) const {
    return tokens_ == other.tokens_ &&
           num_language_codes_ == other.num_language_codes_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  int num_language_codes_ = 0;
};

}  // namespace polyctc

#endif  // POLYCTC_CTC_VOCABULARY_H_
