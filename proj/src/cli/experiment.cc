// polyctc/cli/experiment.cc
//
// SPDX-License-Identifier: Apache-2.0

#include "polyctc/cli/experiment.h"

#include <set>
#include <sstream>

#include "polyctc/common/errors.h"

namespace polyctc {
namespace {

using json = nlohmann::json;

void CheckKeys(const json &j, const std::string &where, const std::set<std::string> &known) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto &[key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError(where + "." + key + ": unknown field");
  }
}

template <typename T>
T Get(const json &j, const std::string &key, const T &fallback, const std::string &where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception &) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

json UpstreamJson(const UpstreamConfig &u) {
  return nlohmann::ordered_json{
      {"num_layers", u.num_layers}, {"num_heads", u.num_heads}, {"ff_dim", u.ff_dim}};
}

json DownstreamJson(const DownstreamConfig &d) {
  return nlohmann::ordered_json{{"proj_dim", d.proj_dim},     {"subsampling", d.subsampling},
                                {"hidden_dim", d.hidden_dim}, {"num_layers", d.num_layers},
                                {"num_heads", d.num_heads},   {"ff_dim", d.ff_dim}};
}

ModelConfig ModelFromJson(const json &j, const ModelConfig &base) {
  CheckKeys(j, "model", {"upstream", "downstream"});
  ModelConfig m = base;
  if (j.contains("upstream")) {
    const json &u = j.at("upstream");
    const std::string w = "model.upstream";
    CheckKeys(u, w, {"num_layers", "num_heads", "ff_dim"});
    m.upstream.num_layers = Get(u, "num_layers", m.upstream.num_layers, w);
    m.upstream.num_heads = Get(u, "num_heads", m.upstream.num_heads, w);
    m.upstream.ff_dim = Get(u, "ff_dim", m.upstream.ff_dim, w);
  }
  if (j.contains("downstream")) {
    const json &d = j.at("downstream");
    const std::string w = "model.downstream";
    CheckKeys(d, w, {"proj_dim", "subsampling", "hidden_dim", "num_layers", "num_heads", "ff_dim"});
    m.downstream.proj_dim = Get(d, "proj_dim", m.downstream.proj_dim, w);
    m.downstream.subsampling = Get(d, "subsampling", m.downstream.subsampling, w);
    m.downstream.hidden_dim = Get(d, "hidden_dim", m.downstream.hidden_dim, w);
    m.downstream.num_layers = Get(d, "num_layers", m.downstream.num_layers, w);
    m.downstream.num_heads = Get(d, "num_heads", m.downstream.num_heads, w);
    m.downstream.ff_dim = Get(d, "ff_dim", m.downstream.ff_dim, w);
  }
  return m;
}

// Prefixes a train-section diagnostic with the section it came from.
TrainConfig TrainSection(const json &j, const TrainConfig &base, const std::string &section) {
  try {
    return TrainConfig::FromJson(j, base);
  } catch (const ConfigError &e) {
    std::string what = e.what();
    if (what.rfind("train", 0) == 0) what = section + what.substr(5);
    throw ConfigError(what);
  }
}

}  // namespace

StrategyPreset StrategyPreset::Parse(const std::string &text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string part; std::getline(ss, part, '+');) parts.push_back(part);
  if (parts.empty() || parts[0].empty()) throw ConfigError("strategy: empty preset name");
  StrategyPreset p;
  p.mode = ParseMode(parts[0]);
  for (std::size_t i = 1; i < parts.size(); ++i) {
    if (parts[i] == "lidctc") {
      p.lidctc = true;
    } else if (parts[i] == "aug") {
      p.augmentation = true;
    } else {
      throw ConfigError("strategy: unknown modifier '" + parts[i] + "' in '" + text + "'");
    }
  }
  if (p.lidctc && p.mode != AdaptationMode::kFineTuneWindow) {
    throw ConfigError("strategy: +lidctc needs finetune-window, got '" + text + "'");
  }
  return p;
}

std::string StrategyPreset::Name() const {
  return ModeName(mode) + (lidctc ? "+lidctc" : "") + (augmentation ? "+aug" : "");
}

ExperimentConfig ExperimentConfig::Default() {
  ExperimentConfig c;
  GenerationConfig &g = c.generation;
  g.feature_dim = 32;
  g.noise_sigma = 0.5;
  g.token_pool = 30;
  g.emission_seed = 100;
  for (const char *code : {"aaa", "bbb", "ccc", "ddd", "eee"}) {
    g.languages.push_back({code, Tier::kNormal, "", {}, 12, 100, 20});
  }
  for (const char *code : {"fsa", "fsb", "fsc"}) {
    g.languages.push_back({code, Tier::kFewShot, "", {}, 12, 5, 20});
  }
  for (const char *parent : {"aaa", "bbb"}) {
    g.languages.push_back({std::string(parent) + "-d", Tier::kDialect, parent, {}, 0, 0, 20});
  }

  c.model.upstream = {32, 6, 4, 128};
  c.model.downstream.proj_dim = 32;
  c.model.downstream.subsampling = 2;
  c.model.downstream.hidden_dim = 64;
  c.model.downstream.num_layers = 2;
  c.model.downstream.num_heads = 4;
  c.model.downstream.ff_dim = 128;

  c.pretrain.epochs = 4;
  c.pretrain.steps_per_epoch = 125;
  c.pretrain.batch_size = 8;
  c.pretrain.accumulation_every = 1;
  c.pretrain.peak_lr = 2e-3;
  c.pretrain.warmup_steps = 50;

  c.train = c.pretrain;
  c.train.steps_per_epoch = 100;
  return c;
}

ExperimentConfig ExperimentConfig::FromJson(const json &j, const ExperimentConfig &base) {
  CheckKeys(j, "config", {"seed", "strategy", "paths", "generation", "model", "pretrain",
                          "train", "augmentation", "eval", "gradcheck"});
  ExperimentConfig c = base;
  if (j.contains("paths")) {
    const json &p = j.at("paths");
    CheckKeys(p, "paths", {"corpus", "upstream", "checkpoint", "report"});
    c.paths.corpus = Get(p, "corpus", c.paths.corpus, "paths");
    c.paths.upstream = Get(p, "upstream", c.paths.upstream, "paths");
    c.paths.checkpoint = Get(p, "checkpoint", c.paths.checkpoint, "paths");
    c.paths.report = Get(p, "report", c.paths.report, "paths");
  }
  if (j.contains("generation")) {
    json merged = c.generation.ToJson();
    merged.merge_patch(j.at("generation"));
    c.generation = GenerationConfig::FromJson(merged);
  }
  if (j.contains("model")) c.model = ModelFromJson(j.at("model"), c.model);
  if (j.contains("pretrain")) {
    json p = j.at("pretrain");
    if (p.is_object() && p.contains("languages")) {
      c.pretrain_languages = Get(p, "languages", c.pretrain_languages, "pretrain");
      p.erase("languages");
    }
    c.pretrain = TrainSection(p, c.pretrain, "pretrain");
  }
  if (j.contains("train")) c.train = TrainSection(j.at("train"), c.train, "train");
  if (j.contains("augmentation")) {
    const json &a = j.at("augmentation");
    CheckKeys(a, "augmentation", {"per_language", "counts", "seed"});
    c.augmentation.per_language = Get(a, "per_language", c.augmentation.per_language, "augmentation");
    c.augmentation.counts = Get(a, "counts", c.augmentation.counts, "augmentation");
    c.augmentation.seed = Get(a, "seed", c.augmentation.seed, "augmentation");
  }
  if (j.contains("eval")) {
    const json &e = j.at("eval");
    CheckKeys(e, "eval", {"split", "worst_k"});
    if (e.contains("split")) c.eval.split = ParseSplit(Get<std::string>(e, "split", "", "eval"));
    c.eval.worst_k = Get(e, "worst_k", c.eval.worst_k, "eval");
  }
  if (j.contains("gradcheck")) {
    const json &g = j.at("gradcheck");
    CheckKeys(g, "gradcheck", {"oracle_instances", "seeds"});
    c.gradcheck.oracle_instances =
        Get(g, "oracle_instances", c.gradcheck.oracle_instances, "gradcheck");
    c.gradcheck.seeds = Get(g, "seeds", c.gradcheck.seeds, "gradcheck");
  }
  if (j.contains("strategy")) {
    c.strategy = StrategyPreset::Parse(Get<std::string>(j, "strategy", "", "config"));
    c.ApplyStrategy(*c.strategy);
  }
  if (j.contains("seed")) c.SetSeed(Get<std::uint64_t>(j, "seed", 0, "config"));
  return c;
}

json ExperimentConfig::ToJson() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  if (strategy) j["strategy"] = strategy->Name();
  j["paths"] = {{"corpus", paths.corpus},
                {"upstream", paths.upstream},
                {"checkpoint", paths.checkpoint},
                {"report", paths.report}};
  j["generation"] = generation.ToJson();
  j["model"] = {{"upstream", UpstreamJson(model.upstream)},
                {"downstream", DownstreamJson(model.downstream)}};
  nlohmann::ordered_json pre = pretrain.ToJson();
  pre["languages"] = pretrain_languages;
  j["pretrain"] = pre;
  j["train"] = train.ToJson();
  j["augmentation"] = {{"per_language", augmentation.per_language},
                       {"counts", augmentation.counts},
                       {"seed", augmentation.seed}};
  j["eval"] = {{"split", SplitName(eval.split)}, {"worst_k", eval.worst_k}};
  j["gradcheck"] = {{"oracle_instances", gradcheck.oracle_instances},
                    {"seeds", gradcheck.seeds}};
  return j;
}

void ExperimentConfig::SetSeed(std::uint64_t value) {
  seed = value;
  generation.seed = value;
  pretrain.seed = value;
  train.seed = value;
  augmentation.seed = value;
}

void ExperimentConfig::ApplyStrategy(const StrategyPreset &preset) {
  strategy = preset;
  AdaptationPlan &plan = train.plan;
  switch (preset.mode) {
    case AdaptationMode::kFrozen:
      plan = AdaptationPlan::Frozen();
      break;
    case AdaptationMode::kFineTuneWindow: {
      if (plan.mode != AdaptationMode::kFineTuneWindow) {
        const WindowPreset toy = ToyWindowPreset();
        plan = AdaptationPlan::FineTuneWindow(toy.window_first, toy.window_last);
      }
      train.warmup_steps = 0;
      break;
    }
    case AdaptationMode::kLowRank:
      if (plan.mode != AdaptationMode::kLowRank) plan = AdaptationPlan::LowRank(4, 8.0);
      break;
  }
  if (preset.lidctc) {
    if (train.objective.beta == 0.0) train.objective.beta = 0.3;
    if (train.objective.lid_layers.empty()) {
      for (std::size_t l : ToyWindowPreset().lid_layers) {
        if (plan.InWindow(l)) train.objective.lid_layers.push_back(l);
      }
    }
  }
}

ModelConfig ResolveModel(const ModelConfig &model, const Corpus &corpus) {
  ModelConfig m = model;
  m.upstream.input_dim = corpus.feature_dim();
  m.downstream.vocab_size = static_cast<std::size_t>(corpus.vocab.size());
  return m;
}

std::map<std::string, std::size_t> AugmentationCounts(const AugmentationSettings &settings,
                                                      const Corpus &corpus) {
  std::map<std::string, std::size_t> counts;
  for (const std::string &code : corpus.CodesWithTier(Tier::kFewShot)) {
    counts[code] = settings.per_language;
  }
  for (const auto &[code, n] : settings.counts) counts[code] = n;
  return counts;
}

}  // namespace polyctc
