// polyctc/data/corpus.h
//
// SPDX-License-Identifier: Apache-2.0
//
// In-memory corpus and its on-disk layout:
//
//   <dir>/vocab.txt            joint vocabulary
//   <dir>/languages.json       language codes, tiers and dialect parents
//   <dir>/train.tsv            manifests, one per split
//   <dir>/dev_standard.tsv
//   <dir>/dev_dialect.tsv
//   <dir>/feats/<id>.mlft      one feature file per utterance
//
// Manifest lines are "id \t language \t feats-path \t tok tok ...". The
// language code is not part of the token field; Target() prepends it.

#ifndef POLYCTC_DATA_CORPUS_H_
#define POLYCTC_DATA_CORPUS_H_

#include <string>
#include <vector>

#include "polyctc/autodiff/tensor.h"
#include "polyctc/ctc/vocabulary.h"

namespace polyctc {

enum class Split { kTrain, kDevStandard, kDevDialect };

// "train", "dev_standard", "dev_dialect".
std::string SplitName(Split split);
// Also accepts the dashed forms ("dev-standard") and "dev". Throws
// ConfigError.
Split ParseSplit(const std::string &name);

enum class Tier { kNormal, kFewShot, kDialect };

std::string TierName(Tier tier);
Tier ParseTier(const std::string &name);

// Few-shot languages contribute at most this many training utterances.
inline constexpr std::size_t kFewShotCap = 5;

struct LanguageInfo {
  std::string code;
  Tier tier = Tier::kNormal;
  std::string parent;  // dialects only

  bool operator==(const LanguageInfo &) const = default;
};

struct Utterance {
  std::string id;
  // Dialect utterances carry their parent's code: the dialect itself is
  // never a training language and has no vocabulary entry.
  std::string language;
  ad::Tensor features;  // [T x D], values representable in 32 bits
  std::vector<std::string> transcript;
};

struct Corpus {
  Vocabulary vocab;
  std::vector<LanguageInfo> languages;
  std::vector<Utterance> train;
  std::vector<Utterance> dev_standard;
  std::vector<Utterance> dev_dialect;

  std::vector<Utterance> &split(Split s);
  const std::vector<Utterance> &split(Split s) const;

  const LanguageInfo *FindLanguage(const std::string &code) const;
  std::vector<std::string> CodesWithTier(Tier tier) const;
  // [language code] ++ transcript, as vocabulary ids.
  std::vector<int> Target(const Utterance &u) const;
  std::size_t feature_dim() const;

  // Copy restricted to utterances whose language is listed. The vocabulary
  // is kept whole so that ids stay comparable across subsets.
  Corpus Subset(const std::vector<std::string> &codes) const;
};

// Throws ContractError on duplicate ids within a split or a dialect split
// holding a language that is not a dialect's parent.
void CheckCorpus(const Corpus &corpus);

void SaveCorpus(const Corpus &corpus, const std::string &dir);
// Throws ParseError (with line number) on malformed manifests and
// FormatError on bad feature files.
Corpus LoadCorpus(const std::string &dir);

// "MLFT", u32 version, u32 T, u32 D, then T*D float32 little-endian.
void WriteFeatures(const ad::Tensor &features, const std::string &path);
ad::Tensor ReadFeatures(const std::string &path);

}  // namespace polyctc

#endif  // POLYCTC_DATA_CORPUS_H_
