// polyctc/eval/metrics.h
//
// SPDX-License-Identifier: Apache-2.0

#ifndef POLYCTC_EVAL_METRICS_H_
#define POLYCTC_EVAL_METRICS_H_

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "polyctc/common/errors.h"
#include "polyctc/ctc/vocabulary.h"

namespace polyctc {

// Levenshtein distance with unit substitution, insertion and deletion costs.
template <typename T>
std::size_t EditDistance(std::span<const T> ref, std::span<const T> hyp) {
  std::vector<std::size_t> row(hyp.size() + 1);
  for (std::size_t j = 0; j <= hyp.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= ref.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= hyp.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (ref[i - 1] == hyp[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[hyp.size()];
}

// Edit distance over the reference length; may exceed 1. Throws
// ContractError for an empty reference.
template <typename T>
double Cer(std::span<const T> ref, std::span<const T> hyp) {
  if (ref.empty()) throw ContractError("cer: empty reference");
  return static_cast<double>(EditDistance(ref, hyp)) / static_cast<double>(ref.size());
}

inline double Cer(const std::string &ref, const std::string &hyp) {
  return Cer(std::span<const char>(ref), std::span<const char>(hyp));
}

// Language of a decoded sequence: its first token when that is a language
// code, otherwise nothing.
std::optional<std::string> LidPredict(std::span<const int> decoded, const Vocabulary &vocab);

// Drops a leading language code, if present.
std::vector<int> StripLanguageCode(std::span<const int> decoded, const Vocabulary &vocab);

}  // namespace polyctc

#endif  // POLYCTC_EVAL_METRICS_H_
