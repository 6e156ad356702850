// polyctc/eval/report.h
//
// SPDX-License-Identifier: Apache-2.0
//
// Per-language CER / LID accuracy and the aggregate columns: macro average
// over languages, population deviation, worst-K mean, and few-shot and
// dialect subsets.

#ifndef POLYCTC_EVAL_REPORT_H_
#define POLYCTC_EVAL_REPORT_H_

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "polyctc/data/corpus.h"
#include "polyctc/model/speech_model.h"

namespace polyctc {

// Worst-K subset size at full scale; desk runs use fewer languages.
inline constexpr std::size_t kReferenceWorstK = 15;

struct LanguageResult {
  std::string code;
  Tier tier = Tier::kNormal;
  std::size_t utterances = 0;
  std::size_t reference_tokens = 0;
  std::size_t edits = 0;
  std::size_t lid_correct = 0;

  // Summed edits over summed reference lengths.
  double cer() const;
  double lid_accuracy() const;
};

struct EvalReport {
  std::string split;
  std::vector<LanguageResult> languages;
  double cer = 0.0;  // macro average
  double cer_std = 0.0;
  double lid_accuracy = 0.0;  // macro average
  std::size_t worst_k = 0;
  double worst_k_cer = 0.0;
  std::optional<double> few_shot_cer;
  std::optional<double> few_shot_lid_accuracy;
  std::optional<double> dialect_cer;
  std::optional<double> dialect_lid_accuracy;

  nlohmann::json ToJson() const;
  // Header line plus one row per language.
  std::string ToTsv() const;
};

// Aggregates per-language results. `dialect` marks a dialect-split report.
// Throws ContractError when `languages` is empty.
EvalReport Aggregate(std::vector<LanguageResult> languages, std::size_t worst_k,
                     const std::string &split, bool dialect);

struct Hypothesis {
  std::string id;
  std::string language;
  std::vector<int> reference;  // transcript ids, no language code
  std::vector<int> decoded;    // greedy output, language code included
  std::optional<std::string> predicted_language;
};

std::vector<Hypothesis> DecodeSplit(const SpeechModel &model, const Corpus &corpus, Split split);
// id, language, predicted language ("-" if none), hypothesis, reference.
std::string HypothesesTsv(const std::vector<Hypothesis> &hyps, const Vocabulary &vocab);

EvalReport Summarize(const std::vector<Hypothesis> &hyps, const Corpus &corpus, Split split,
                     std::size_t worst_k);
// Throws ContractError for an empty split.
EvalReport Evaluate(const SpeechModel &model, const Corpus &corpus, Split split,
                    std::size_t worst_k);

}  // namespace polyctc

#endif  // POLYCTC_EVAL_REPORT_H_
