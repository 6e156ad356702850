// polyctc/cli/experiment.h
//
// SPDX-License-Identifier: Apache-2.0
//
// Experiment configuration shared by the command-line entry points: corpus
// generation, model shape, pretraining and training recipes, augmentation,
// evaluation, and named strategy presets.

#ifndef POLYCTC_CLI_EXPERIMENT_H_
#define POLYCTC_CLI_EXPERIMENT_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "polyctc/data/corpus.h"
#include "polyctc/data/generation.h"
#include "polyctc/eval/report.h"
#include "polyctc/model/speech_model.h"
#include "polyctc/train/trainer.h"

namespace polyctc {

// A base strategy ("frozen", "finetune-window", "lora") with optional
// "+lidctc" and "+aug" modifiers, e.g. "finetune-window+lidctc".
struct StrategyPreset {
  AdaptationMode mode = AdaptationMode::kFrozen;
  bool lidctc = false;
  bool augmentation = false;

  // Throws ConfigError naming the offending part.
  static StrategyPreset Parse(const std::string &text);
  std::string Name() const;
};

struct ExperimentPaths {
  std::string corpus;      // corpus directory read by pretrain/train/eval/decode
  std::string upstream;    // pretrained upstream checkpoint for train (optional)
  std::string checkpoint;  // model checkpoint for eval/decode
  std::string report = "report.json";  // file name under the output directory
};

struct AugmentationSettings {
  // Added utterances per few-shot language, unless listed in `counts`.
  std::size_t per_language = 100;
  std::map<std::string, std::size_t> counts;
  std::uint64_t seed = 0;
};

struct EvalSettings {
  Split split = Split::kDevStandard;
  std::size_t worst_k = kReferenceWorstK;
};

struct GradcheckSettings {
  std::size_t oracle_instances = 500;
  std::size_t seeds = 50;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::optional<StrategyPreset> strategy;
  ExperimentPaths paths;
  GenerationConfig generation;
  // input_dim and vocab_size are taken from the corpus at run time.
  ModelConfig model;
  TrainConfig pretrain;
  // Languages used for pretraining; empty selects every normal-tier one.
  std::vector<std::string> pretrain_languages;
  TrainConfig train;
  AugmentationSettings augmentation;
  EvalSettings eval;
  GradcheckSettings gradcheck;

  // Desk-scale defaults: 32-dimensional features, 5 normal, 3 few-shot and
  // 2 dialect languages, a 6-layer upstream.
  static ExperimentConfig Default();
  // Overlays `j` on `base`. Unknown keys are ConfigErrors named by path.
  static ExperimentConfig FromJson(const nlohmann::json &j, const ExperimentConfig &base);
  nlohmann::json ToJson() const;

  // Sets the run seed everywhere a seed is consumed.
  void SetSeed(std::uint64_t value);
  // Applies a preset to the training recipe.
  void ApplyStrategy(const StrategyPreset &preset);
};

// Model shape for a corpus: feature dimension and vocabulary size filled in.
ModelConfig ResolveModel(const ModelConfig &model, const Corpus &corpus);

// Few-shot languages receive `per_language` utterances unless overridden.
std::map<std::string, std::size_t> AugmentationCounts(const AugmentationSettings &settings,
                                                      const Corpus &corpus);

}  // namespace polyctc

#endif  // POLYCTC_CLI_EXPERIMENT_H_
