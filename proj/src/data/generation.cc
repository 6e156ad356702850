// polyctc/data/generation.cc
//
// SPDX-License-Identifier: Apache-2.0

#include "polyctc/data/generation.h"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <set>

#include "polyctc/common/errors.h"
#include "polyctc/common/random.h"

namespace polyctc {
namespace {

using nlohmann::json;

constexpr const char *kPoolSymbols =
    "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

template <typename T>
T Field(const json &j, const std::string &key, const std::string &where, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception &) {
    throw ConfigError(where + key + ": wrong type (" + j.at(key).dump() + ")");
  }
}

void RejectUnknownKeys(const json &j, const std::set<std::string> &known,
                       const std::string &where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto &[key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError(where + key + ": unknown field");
  }
}

std::vector<double> GaussianVector(std::size_t dim, double scale, std::mt19937_64 &rng) {
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> v(dim);
  for (double &x : v) x = scale > 0.0 ? dist(rng) : 0.0;
  return v;
}

std::string Numbered(const std::string &prefix, std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04zu", i);
  return prefix + buf;
}

std::size_t SharedTokens(const std::vector<std::string> &a, const std::vector<std::string> &b) {
  std::size_t n = 0;
  for (const auto &t : a) n += std::count(b.begin(), b.end(), t);
  return n;
}

}  // namespace

std::vector<std::string> TokenPool(std::size_t size) {
  const std::string symbols = kPoolSymbols;
  if (size > symbols.size()) {
    throw ConfigError("token_pool: at most " + std::to_string(symbols.size()) + " tokens");
  }
  std::vector<std::string> pool;
  for (std::size_t i = 0; i < size; ++i) pool.emplace_back(1, symbols[i]);
  return pool;
}

const LanguageConfig *GenerationConfig::Find(const std::string &code) const {
  for (const auto &l : languages) {
    if (l.code == code) return &l;
  }
  return nullptr;
}

GenerationConfig GenerationConfig::FromJson(const json &j) {
  const std::string where = "generation.";
  RejectUnknownKeys(j,
                    {"feature_dim", "noise_sigma", "seed", "emission_seed", "token_pool",
                     "max_shared", "min_tokens", "max_tokens", "min_repeat", "max_repeat",
                     "subsampling", "token_scale", "language_offset_scale", "dialect_scale",
                     "languages"},
                    where);
  GenerationConfig c;
  c.feature_dim = Field(j, "feature_dim", where, c.feature_dim);
  c.noise_sigma = Field(j, "noise_sigma", where, c.noise_sigma);
  c.seed = Field(j, "seed", where, c.seed);
  if (j.contains("emission_seed")) c.emission_seed = Field<std::uint64_t>(j, "emission_seed", where, 0);
  c.token_pool = Field(j, "token_pool", where, c.token_pool);
  if (j.contains("max_shared")) c.max_shared = Field<std::size_t>(j, "max_shared", where, 0);
  c.min_tokens = Field(j, "min_tokens", where, c.min_tokens);
  c.max_tokens = Field(j, "max_tokens", where, c.max_tokens);
  c.min_repeat = Field(j, "min_repeat", where, c.min_repeat);
  c.max_repeat = Field(j, "max_repeat", where, c.max_repeat);
  c.subsampling = Field(j, "subsampling", where, c.subsampling);
  c.token_scale = Field(j, "token_scale", where, c.token_scale);
  c.language_offset_scale = Field(j, "language_offset_scale", where, c.language_offset_scale);
  if (j.contains("dialect_scale")) c.dialect_scale = Field<double>(j, "dialect_scale", where, 0.0);
  if (!j.contains("languages") || !j.at("languages").is_array()) {
    throw ConfigError(where + "languages: required array");
  }
  for (std::size_t i = 0; i < j.at("languages").size(); ++i) {
    const json &lj = j.at("languages")[i];
    const std::string lw = where + "languages[" + std::to_string(i) + "].";
    RejectUnknownKeys(lj, {"code", "tier", "parent", "inventory", "inventory_size", "train", "dev"},
                      lw);
    LanguageConfig l;
    l.code = Field<std::string>(lj, "code", lw, "");
    l.tier = ParseTier(Field<std::string>(lj, "tier", lw, "normal"));
    l.parent = Field<std::string>(lj, "parent", lw, "");
    l.inventory = Field<std::vector<std::string>>(lj, "inventory", lw, {});
    l.inventory_size = Field<std::size_t>(lj, "inventory_size", lw, 0);
    l.train = Field<std::size_t>(lj, "train", lw, 0);
    l.dev = Field<std::size_t>(lj, "dev", lw, 0);
    c.languages.push_back(std::move(l));
  }
  c.Validate();
  return c;
}

json GenerationConfig::ToJson() const {
  nlohmann::ordered_json j;
  j["feature_dim"] = feature_dim;
  j["noise_sigma"] = noise_sigma;
  j["seed"] = seed;
  if (emission_seed) j["emission_seed"] = *emission_seed;
  j["token_pool"] = token_pool;
  if (max_shared) j["max_shared"] = *max_shared;
  j["min_tokens"] = min_tokens;
  j["max_tokens"] = max_tokens;
  j["min_repeat"] = min_repeat;
  j["max_repeat"] = max_repeat;
  j["subsampling"] = subsampling;
  j["token_scale"] = token_scale;
  j["language_offset_scale"] = language_offset_scale;
  if (dialect_scale) j["dialect_scale"] = *dialect_scale;
  j["languages"] = nlohmann::ordered_json::array();
  for (const auto &l : languages) {
    nlohmann::ordered_json lj{{"code", l.code}, {"tier", TierName(l.tier)}};
    if (!l.parent.empty()) lj["parent"] = l.parent;
    if (!l.inventory.empty()) lj["inventory"] = l.inventory;
    if (l.inventory_size) lj["inventory_size"] = l.inventory_size;
    lj["train"] = l.train;
    lj["dev"] = l.dev;
    j["languages"].push_back(lj);
  }
  return j;
}

void GenerationConfig::Validate() const {
  const std::string where = "generation.";
  if (feature_dim < 8) throw ConfigError(where + "feature_dim: must be at least 8");
  if (!(noise_sigma >= 0.0)) throw ConfigError(where + "noise_sigma: must be nonnegative");
  if (token_pool == 0) throw ConfigError(where + "token_pool: must be positive");
  const std::vector<std::string> pool = TokenPool(token_pool);
  if (min_tokens == 0 || min_tokens > max_tokens) {
    throw ConfigError(where + "min_tokens/max_tokens: need 1 <= min_tokens <= max_tokens");
  }
  if (min_repeat == 0 || min_repeat > max_repeat) {
    throw ConfigError(where + "min_repeat/max_repeat: need 1 <= min_repeat <= max_repeat");
  }
  if (subsampling == 0) throw ConfigError(where + "subsampling: must be positive");
  if (dialect_scale && !(*dialect_scale >= 0.0)) {
    throw ConfigError(where + "dialect_scale: must be nonnegative");
  }
  std::set<std::string> codes;
  std::size_t normal = 0;
  for (std::size_t i = 0; i < languages.size(); ++i) {
    const LanguageConfig &l = languages[i];
    const std::string lw = where + "languages[" + std::to_string(i) + "].";
    if (l.code.empty() || std::any_of(l.code.begin(), l.code.end(),
                                      [](unsigned char c) { return std::isspace(c); })) {
      throw ConfigError(lw + "code: must be a nonempty word");
    }
    if (std::find(pool.begin(), pool.end(), l.code) != pool.end()) {
      throw ConfigError(lw + "code: '" + l.code + "' collides with a token of the pool");
    }
    if (!codes.insert(l.code).second) throw ConfigError(lw + "code: duplicate '" + l.code + "'");
    if (l.tier == Tier::kDialect) {
      const LanguageConfig *parent = Find(l.parent);
      if (!parent || parent->tier == Tier::kDialect) {
        throw ConfigError(lw + "parent: '" + l.parent + "' is not a configured non-dialect language");
      }
      if (l.train > 0) throw ConfigError(lw + "train: dialects are evaluation-only");
      if (!l.inventory.empty() || l.inventory_size) {
        throw ConfigError(lw + "inventory: dialects share their parent's inventory");
      }
      continue;
    }
    if (!l.parent.empty()) throw ConfigError(lw + "parent: only dialects have a parent");
    if (l.tier == Tier::kNormal) ++normal;
    if (l.tier == Tier::kFewShot && l.train > kFewShotCap) {
      throw ConfigError(lw + "train: few-shot languages have at most " +
                        std::to_string(kFewShotCap) + " training utterances");
    }
    if (l.inventory.empty()) {
      if (l.inventory_size == 0 || l.inventory_size > token_pool) {
        throw ConfigError(lw + "inventory_size: must lie in [1, token_pool]");
      }
    } else {
      const std::set<std::string> unique(l.inventory.begin(), l.inventory.end());
      if (unique.size() != l.inventory.size()) throw ConfigError(lw + "inventory: duplicate token");
      for (const auto &t : l.inventory) {
        if (std::find(pool.begin(), pool.end(), t) == pool.end()) {
          throw ConfigError(lw + "inventory: '" + t + "' is not in the token pool");
        }
      }
    }
  }
  if (normal < 2) throw ConfigError(where + "languages: need at least 2 normal languages");
}

LanguageModel BuildLanguageModel(const GenerationConfig &config, const std::string &code) {
  const LanguageConfig *lc = config.Find(code);
  if (!lc) throw ConfigError("unknown language '" + code + "'");
  const std::uint64_t es = config.emission_seed_or_seed();
  if (lc->tier == Tier::kDialect) {
    LanguageModel m = BuildLanguageModel(config, lc->parent);
    m.code = code;
    std::mt19937_64 rng = DerivedRng(es, "dialect:" + code);
    const double scale = config.dialect_scale_or_default();
    for (auto &vec : m.token_vectors) {
      const std::vector<double> shift = GaussianVector(vec.size(), scale, rng);
      for (std::size_t d = 0; d < vec.size(); ++d) vec[d] += shift[d];
    }
    const std::vector<double> shift = GaussianVector(m.offset.size(), scale, rng);
    for (std::size_t d = 0; d < m.offset.size(); ++d) m.offset[d] += shift[d];
    return m;
  }
  LanguageModel m;
  m.code = code;
  m.label = code;
  if (!lc->inventory.empty()) {
    m.inventory = lc->inventory;
  } else {
    const std::vector<std::string> pool = TokenPool(config.token_pool);
    std::mt19937_64 rng = DerivedRng(es, "inventory:" + code);
    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(lc->inventory_size);
    std::sort(order.begin(), order.end());
    for (std::size_t i : order) m.inventory.push_back(pool[i]);
  }
  for (const auto &t : m.inventory) {
    std::mt19937_64 rng = DerivedRng(es, "token:" + t);
    m.token_vectors.push_back(GaussianVector(config.feature_dim, config.token_scale, rng));
  }
  std::mt19937_64 rng = DerivedRng(es, "language:" + code);
  m.offset = GaussianVector(config.feature_dim, config.language_offset_scale, rng);
  return m;
}

Utterance SampleUtterance(const GenerationConfig &config, const LanguageModel &lang,
                          const std::string &id, std::mt19937_64 &rng) {
  std::uniform_int_distribution<std::size_t> length(config.min_tokens, config.max_tokens);
  std::uniform_int_distribution<std::size_t> pick(0, lang.inventory.size() - 1);
  std::uniform_int_distribution<std::size_t> repeat(config.min_repeat, config.max_repeat);
  const std::size_t n = length(rng);
  std::vector<std::size_t> tokens(n), reps(n);
  for (std::size_t i = 0; i < n; ++i) {
    tokens[i] = pick(rng);
    reps[i] = repeat(rng);
  }
  std::size_t frames = 0;
  for (std::size_t r : reps) frames += r;
  const std::size_t need = 2 * (n + 1) - 1;
  for (std::size_t i = 0; (frames - 1) / config.subsampling + 1 < need; ++i) {
    ++reps[i % n];
    ++frames;
  }
  const std::size_t dim = config.feature_dim;
  std::normal_distribution<double> noise(0.0, config.noise_sigma);
  std::vector<double> values;
  values.reserve(frames * dim);
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<double> &vec = lang.token_vectors[tokens[i]];
    for (std::size_t r = 0; r < reps[i]; ++r) {
      for (std::size_t d = 0; d < dim; ++d) {
        const double e = config.noise_sigma > 0.0 ? noise(rng) : 0.0;
        values.push_back(static_cast<float>(vec[d] + lang.offset[d] + e));
      }
    }
  }
  Utterance u;
  u.id = id;
  u.language = lang.label;
  u.features = ad::Tensor::Matrix(frames, dim, std::move(values));
  for (std::size_t t : tokens) u.transcript.push_back(lang.inventory[t]);
  return u;
}

Corpus GenerateCorpus(const GenerationConfig &config) {
  config.Validate();
  std::vector<LanguageModel> models;
  for (const auto &l : config.languages) models.push_back(BuildLanguageModel(config, l.code));

  if (config.max_shared) {
    for (std::size_t a = 0; a < models.size(); ++a) {
      for (std::size_t b = a + 1; b < models.size(); ++b) {
        if (models[a].label == models[b].label) continue;  // dialect of its parent
        if (config.languages[a].tier == Tier::kDialect || config.languages[b].tier == Tier::kDialect) {
          continue;
        }
        const std::size_t shared = SharedTokens(models[a].inventory, models[b].inventory);
        if (shared > *config.max_shared) {
          throw ConfigError("generation.max_shared: " + models[a].code + " and " + models[b].code +
                            " share " + std::to_string(shared) + " tokens");
        }
      }
    }
  }

  std::vector<std::string> codes, tokens;
  const std::vector<std::string> pool = TokenPool(config.token_pool);
  std::set<std::string> used;
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (config.languages[i].tier != Tier::kDialect) codes.push_back(models[i].code);
    used.insert(models[i].inventory.begin(), models[i].inventory.end());
  }
  for (const auto &t : pool) {
    if (used.count(t)) tokens.push_back(t);
  }

  Corpus corpus;
  corpus.vocab = Vocabulary(codes, tokens);
  for (const auto &l : config.languages) corpus.languages.push_back({l.code, l.tier, l.parent});
  for (std::size_t i = 0; i < models.size(); ++i) {
    const LanguageConfig &lc = config.languages[i];
    std::mt19937_64 train_rng = DerivedRng(config.seed, lc.code + "/train");
    for (std::size_t k = 0; k < lc.train; ++k) {
      corpus.train.push_back(
          SampleUtterance(config, models[i], Numbered(lc.code + "_train_", k), train_rng));
    }
    std::mt19937_64 dev_rng = DerivedRng(config.seed, lc.code + "/dev");
    auto &dev = lc.tier == Tier::kDialect ? corpus.dev_dialect : corpus.dev_standard;
    for (std::size_t k = 0; k < lc.dev; ++k) {
      dev.push_back(SampleUtterance(config, models[i], Numbered(lc.code + "_dev_", k), dev_rng));
    }
  }
  CheckCorpus(corpus);
  return corpus;
}

std::map<std::string, std::size_t> SampleAugmentationCounts(
    const std::vector<std::string> &codes, std::size_t mean, std::size_t spread,
    std::uint64_t seed) {
  std::mt19937_64 rng = DerivedRng(seed, "augment-counts");
  const std::size_t lo = spread > mean ? 0 : mean - spread;
  std::uniform_int_distribution<std::size_t> dist(lo, mean + spread);
  std::map<std::string, std::size_t> counts;
  for (const auto &c : codes) counts[c] = dist(rng);
  return counts;
}

Corpus AugmentCorpus(const Corpus &base, const GenerationConfig &config,
                     const std::map<std::string, std::size_t> &counts,
                     std::uint64_t seed) {
  Corpus out = base;
  for (const auto &[code, count] : counts) {
    const LanguageInfo *info = base.FindLanguage(code);
    if (!info) throw ConfigError("augmentation: language '" + code + "' is not in the corpus");
    if (info->tier == Tier::kDialect) {
      throw ConfigError("augmentation: '" + code + "' is a dialect (evaluation only)");
    }
    if (!config.Find(code)) {
      throw ConfigError("augmentation: language '" + code + "' has no generation entry");
    }
    const LanguageModel model = BuildLanguageModel(config, code);
    std::mt19937_64 rng = DerivedRng(seed, code + "/augment");
    for (std::size_t k = 0; k < count; ++k) {
      out.train.push_back(SampleUtterance(config, model, Numbered(code + "_aug_", k), rng));
    }
  }
  CheckCorpus(out);
  return out;
}

}  // namespace polyctc
