// polyctc/ctc/vocabulary.cc
//
// SPDX-License-Identifier: Apache-2.0

#include "polyctc/ctc/vocabulary.h"

#include <fstream>
#include <sstream>

#include "polyctc/common/errors.h"

namespace polyctc {

Vocabulary::Vocabulary(const std::vector<std::string> &language_codes,
                       const std::vector<std::string> &linguistic_tokens) {
  auto add = [this](const std::string &symbol, const char *kind) {
    if (symbol.empty() || symbol.find_first_of(" \t\n") != std::string::npos) {
      throw VocabularyError(std::string("invalid ") + kind + " symbol '" +
                            symbol + "'");
    }
    if (!index_.emplace(symbol, static_cast<int>(tokens_.size())).second) {
      throw VocabularyError("symbol '" + symbol + "' appears more than once");
    }
    tokens_.push_back(symbol);
  };
  add(kBlankSymbol, "blank");
  for (const auto &code : language_codes) add(code, "language code");
  num_language_codes_ = static_cast<int>(language_codes.size());
  for (const auto &token : linguistic_tokens) add(token, "token");
}

int Vocabulary::id(const std::string &symbol) const {
  auto it = index_.find(symbol);
  if (it == index_.end()) {
    throw VocabularyError("unknown symbol '" + symbol + "'");
  }
  return it->second;
}

std::vector<std::string> Vocabulary::language_codes() const {
  return {tokens_.begin() + 1, tokens_.begin() + 1 + num_language_codes_};
}

std::vector<int> Vocabulary::Encode(
    const std::vector<std::string> &symbols) const {
  std::vector<int> ids;
  ids.reserve(symbols.size());
  for (const auto &s : symbols) ids.push_back(id(s));
  return ids;
}

std::vector<std::string> Vocabulary::Decode(const std::vector<int> &ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(token(i));
  return out;
}

void Vocabulary::Save(const std::string &path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  for (int i = 0; i < size(); ++i) {
    const char *kind = i == kBlank ? "blank" : is_language_code(i) ? "lang" : "token";
    os << tokens_[i] << '\t' << kind << '\n';
  }
}

Vocabulary Vocabulary::Load(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::vector<std::string> codes, tokens;
  std::string line;
  std::size_t lineno = 0;
  bool seen_token = false;
  while (std::getline(is, line)) {
    ++lineno;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(path, lineno, "expected <symbol>\\t<kind>");
    const std::string symbol = line.substr(0, tab), kind = line.substr(tab + 1);
    if (lineno == 1) {
      if (kind != "blank" || symbol != kBlankSymbol) {
        throw ParseError(path, lineno, "first entry must be the blank");
      }
    } else if (kind == "lang") {
      if (seen_token) throw ParseError(path, lineno, "language codes must precede tokens");
      codes.push_back(symbol);
    } else if (kind == "token") {
      seen_token = true;
      tokens.push_back(symbol);
    } else {
      throw ParseError(path, lineno, "unknown kind '" + kind + "'");
    }
  }
  if (lineno == 0) throw ParseError(path, 1, "empty vocabulary file");
  return Vocabulary(codes, tokens);
}

}  // namespace polyctc
