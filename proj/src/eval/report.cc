// polyctc/eval/report.cc
//
// SPDX-License-Identifier: Apache-2.0

#include "polyctc/eval/report.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "polyctc/autodiff/tape.h"
#include "polyctc/common/errors.h"
#include "polyctc/ctc/ctc.h"
#include "polyctc/eval/metrics.h"

namespace polyctc {
namespace {

double Mean(const std::vector<double> &v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

nlohmann::ordered_json Optional(const std::optional<double> &v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::string Join(const std::vector<std::string> &tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) out += (i ? " " : "") + tokens[i];
  return out;
}

}  // namespace

std::optional<std::string> LidPredict(std::span<const int> decoded, const Vocabulary &vocab) {
  if (decoded.empty() || !vocab.is_language_code(decoded.front())) return std::nullopt;
  return vocab.token(decoded.front());
}

std::vector<int> StripLanguageCode(std::span<const int> decoded, const Vocabulary &vocab) {
  const std::size_t skip = !decoded.empty() && vocab.is_language_code(decoded.front()) ? 1 : 0;
  return {decoded.begin() + skip, decoded.end()};
}

double LanguageResult::cer() const {
  if (reference_tokens == 0) throw ContractError("cer: language " + code + " has no reference tokens");
  return static_cast<double>(edits) / static_cast<double>(reference_tokens);
}

double LanguageResult::lid_accuracy() const {
  return utterances ? static_cast<double>(lid_correct) / static_cast<double>(utterances) : 0.0;
}

EvalReport Aggregate(std::vector<LanguageResult> languages, std::size_t worst_k,
                     const std::string &split, bool dialect) {
  if (languages.empty()) throw ContractError("evaluation needs at least one language");
  EvalReport r;
  r.split = split;
  r.languages = std::move(languages);
  std::vector<double> cers, lids, few_cers, few_lids;
  for (const auto &l : r.languages) {
    cers.push_back(l.cer());
    lids.push_back(l.lid_accuracy());
    if (l.tier == Tier::kFewShot) {
      few_cers.push_back(l.cer());
      few_lids.push_back(l.lid_accuracy());
    }
  }
  r.cer = Mean(cers);
  double var = 0.0;
  for (double c : cers) var += (c - r.cer) * (c - r.cer);
  r.cer_std = std::sqrt(var / static_cast<double>(cers.size()));
  r.lid_accuracy = Mean(lids);

  std::vector<double> sorted = cers;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  r.worst_k = std::min(std::max<std::size_t>(worst_k, 1), sorted.size());
  r.worst_k_cer = Mean({sorted.begin(), sorted.begin() + static_cast<long>(r.worst_k)});
  if (!few_cers.empty()) {
    r.few_shot_cer = Mean(few_cers);
    r.few_shot_lid_accuracy = Mean(few_lids);
  }
  if (dialect) {
    r.dialect_cer = r.cer;
    r.dialect_lid_accuracy = r.lid_accuracy;
  }
  return r;
}

nlohmann::json EvalReport::ToJson() const {
  nlohmann::ordered_json j;
  j["split"] = split;
  j["cer"] = cer;
  j["cer_std"] = cer_std;
  j["lid_accuracy"] = lid_accuracy;
  j["worst_k"] = worst_k;
  j["worst_k_cer"] = worst_k_cer;
  j["few_shot_cer"] = Optional(few_shot_cer);
  j["few_shot_lid_accuracy"] = Optional(few_shot_lid_accuracy);
  j["dialect_cer"] = Optional(dialect_cer);
  j["dialect_lid_accuracy"] = Optional(dialect_lid_accuracy);
  j["languages"] = nlohmann::ordered_json::array();
  for (const auto &l : languages) {
    nlohmann::ordered_json lj;
    lj["code"] = l.code;
    lj["tier"] = TierName(l.tier);
    lj["utterances"] = l.utterances;
    lj["reference_tokens"] = l.reference_tokens;
    lj["edits"] = l.edits;
    lj["cer"] = l.cer();
    lj["lid_accuracy"] = l.lid_accuracy();
    j["languages"].push_back(lj);
  }
  return j;
}

std::string EvalReport::ToTsv() const {
  std::ostringstream os;
  os.precision(17);
  os << "language\ttier\tutterances\tcer\tlid_accuracy\n";
  for (const auto &l : languages) {
    os << l.code << '\t' << TierName(l.tier) << '\t' << l.utterances << '\t' << l.cer() << '\t'
       << l.lid_accuracy() << '\n';
  }
  return os.str();
}

std::vector<Hypothesis> DecodeSplit(const SpeechModel &model, const Corpus &corpus, Split split) {
  ad::NoGradScope no_grad;
  std::vector<Hypothesis> out;
  for (const Utterance &u : corpus.split(split)) {
    Hypothesis h;
    h.id = u.id;
    h.language = u.language;
    const std::vector<int> target = corpus.Target(u);
    h.reference.assign(target.begin() + 1, target.end());
    h.decoded = GreedyDecode(model.Forward(u.features).log_probs);
    h.predicted_language = LidPredict(h.decoded, corpus.vocab);
    out.push_back(std::move(h));
  }
  return out;
}

std::string HypothesesTsv(const std::vector<Hypothesis> &hyps, const Vocabulary &vocab) {
  std::string out;
  for (const auto &h : hyps) {
    out += h.id + '\t' + h.language + '\t' + h.predicted_language.value_or("-") + '\t' +
           Join(vocab.Decode(StripLanguageCode(h.decoded, vocab))) + '\t' +
           Join(vocab.Decode(h.reference)) + '\n';
  }
  return out;
}

EvalReport Summarize(const std::vector<Hypothesis> &hyps, const Corpus &corpus, Split split,
                     std::size_t worst_k) {
  std::map<std::string, LanguageResult> by_code;
  std::vector<std::string> order;
  for (const auto &h : hyps) {
    auto [it, fresh] = by_code.try_emplace(h.language);
    LanguageResult &l = it->second;
    if (fresh) {
      order.push_back(h.language);
      l.code = h.language;
      if (const LanguageInfo *info = corpus.FindLanguage(h.language)) l.tier = info->tier;
    }
    const std::vector<int> hyp = StripLanguageCode(h.decoded, corpus.vocab);
    ++l.utterances;
    l.reference_tokens += h.reference.size();
    l.edits += EditDistance<int>(h.reference, hyp);
    l.lid_correct += h.predicted_language == h.language;
  }
  std::vector<LanguageResult> langs;
  for (const auto &code : order) langs.push_back(by_code.at(code));
  return Aggregate(std::move(langs), worst_k, SplitName(split), split == Split::kDevDialect);
}

EvalReport Evaluate(const SpeechModel &model, const Corpus &corpus, Split split,
                    std::size_t worst_k) {
  if (corpus.split(split).empty()) {
    throw ContractError("evaluation split " + SplitName(split) + " is empty");
  }
  return Summarize(DecodeSplit(model, corpus, split), corpus, split, worst_k);
}

}  // namespace polyctc
