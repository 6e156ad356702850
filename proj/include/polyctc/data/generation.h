// polyctc/data/generation.h
//
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic multilingual speech-like corpora. Every linguistic token has a
// characteristic D-dimensional vector, every language an offset; a frame is
// token vector + language offset + Gaussian noise, and each token is held
// for a few frames. Dialects reuse their parent's inventory with shifted
// vectors and appear only in the dialect dev split.

#ifndef POLYCTC_DATA_GENERATION_H_
#define POLYCTC_DATA_GENERATION_H_

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "polyctc/data/corpus.h"

namespace polyctc {

struct LanguageConfig {
  std::string code;
  Tier tier = Tier::kNormal;
  std::string parent;                  // dialects only
  std::vector<std::string> inventory;  // explicit tokens, or
  std::size_t inventory_size = 0;      // drawn from the token pool
  std::size_t train = 0;
  std::size_t dev = 0;
};

struct GenerationConfig {
  std::size_t feature_dim = 64;
  double noise_sigma = 0.3;
  std::uint64_t seed = 0;
  // Seeds the emission model (token vectors, offsets, inventories). Defaults
  // to seed; set it separately to redraw utterances over the same languages.
  std::optional<std::uint64_t> emission_seed;
  std::size_t token_pool = 30;
  // Largest inventory overlap allowed between unrelated languages; unset
  // means unlimited.
  std::optional<std::size_t> max_shared;
  std::size_t min_tokens = 3;
  std::size_t max_tokens = 12;
  std::size_t min_repeat = 2;
  std::size_t max_repeat = 4;
  // Downstream subsampling the targets must stay achievable under.
  std::size_t subsampling = 2;
  double token_scale = 1.0;
  double language_offset_scale = 0.5;
  // Per-coordinate shift of a dialect's vectors; unset means 0.5 * sigma.
  std::optional<double> dialect_scale;
  std::vector<LanguageConfig> languages;

  // Throws ConfigError naming the offending field.
  static GenerationConfig FromJson(const nlohmann::json &j);
  nlohmann::json ToJson() const;
  void Validate() const;

  std::uint64_t emission_seed_or_seed() const { return emission_seed.value_or(seed); }
  double dialect_scale_or_default() const { return dialect_scale.value_or(0.5 * noise_sigma); }
  const LanguageConfig *Find(const std::string &code) const;
};

// Linguistic token names of the pool, in pool order.
std::vector<std::string> TokenPool(std::size_t size);

// Emission model of one language (dialects resolved against their parent).
struct LanguageModel {
  std::string code;
  std::string label;  // code written to manifests
  std::vector<std::string> inventory;
  std::vector<std::vector<double>> token_vectors;  // aligned with inventory
  std::vector<double> offset;
};

LanguageModel BuildLanguageModel(const GenerationConfig &config, const std::string &code);

// One utterance drawn from the language model. The frame count is grown
// until the target (code + transcript) stays CTC-achievable after
// subsampling: floor((T-1)/kappa)+1 >= 2|Y|-1.
Utterance SampleUtterance(const GenerationConfig &config, const LanguageModel &lang,
                          const std::string &id, std::mt19937_64 &rng);

Corpus GenerateCorpus(const GenerationConfig &config);

// Reference average of added utterances per language at full scale.
inline constexpr std::size_t kReferenceAugmentationMean = 2123;

// Per-language counts uniform in [mean - spread, mean + spread].
std::map<std::string, std::size_t> SampleAugmentationCounts(
    const std::vector<std::string> &codes, std::size_t mean, std::size_t spread,
    std::uint64_t seed);

// Appends counts[code] fresh utterances per language to the training split
// ("<code>_aug_<i>"); dev splits are untouched. Throws ConfigError for a
// language absent from the corpus or a dialect.
Corpus AugmentCorpus(const Corpus &base, const GenerationConfig &config,
                     const std::map<std::string, std::size_t> &counts,
                     std::uint64_t seed);

}  // namespace polyctc

#endif  // POLYCTC_DATA_GENERATION_H_
