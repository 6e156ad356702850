// polyctc/train/trainer.h
//
// SPDX-License-Identifier: Apache-2.0
//
// Adam training with linear warm-up, gradient accumulation, SpecAugment on
// the upstream output and per-epoch model selection by validation loss.
//
// Full-scale reference recipe (defaults here are desk-sized):
//   batch_size 8, steps_per_epoch 30000, epochs 10, peak_lr 1e-4,
//   warmup_steps 25000 (not used when fine-tuning upstream layers),
//   accumulation_every 4, beta 0.3.

#ifndef POLYCTC_TRAIN_TRAINER_H_
#define POLYCTC_TRAIN_TRAINER_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "polyctc/data/corpus.h"
#include "polyctc/data/spec_augment.h"
#include "polyctc/model/adaptation.h"
#include "polyctc/model/checkpoint.h"
#include "polyctc/model/speech_model.h"
#include "polyctc/objective/objective.h"

namespace polyctc {

struct TrainConfig {
  std::size_t epochs = 4;
  // Micro-batches per epoch, drawn from a reshuffled pass over the data.
  std::size_t steps_per_epoch = 100;
  std::size_t batch_size = 8;
  // Micro-batches per optimizer update.
  std::size_t accumulation_every = 4;
  double peak_lr = 1e-3;
  // Optimizer updates of linear ramp from 0 to peak_lr; 0 disables.
  std::size_t warmup_steps = 0;
  AdaptationPlan plan = AdaptationPlan::Frozen();
  ObjectiveConfig objective;
  SpecAugmentConfig specaugment;
  std::uint64_t seed = 0;

  // Throws ConfigError naming the field, including warm-up combined with
  // upstream window fine-tuning.
  void Validate() const;
  // Missing keys keep the values of `base`.
  static TrainConfig FromJson(const nlohmann::json &j, const TrainConfig &base);
  static TrainConfig FromJson(const nlohmann::json &j);
  nlohmann::json ToJson() const;
};

// lr for the u-th optimizer update (1-based).
double LearningRate(const TrainConfig &config, std::size_t update);

class Adam {
 public:
  explicit Adam(ParamList params, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  // Applies one bias-corrected step from the accumulated gradients, then
  // clears them.
  void Step(double lr);
  std::size_t steps() const { return t_; }

 private:
  ParamList params_;
  std::vector<std::vector<double>> m_, v_;
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  std::size_t skipped_utts = 0;

  std::string ToJsonLine() const;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochRecord> log;
  std::size_t updates = 0;
  std::size_t skipped_ctc = 0;  // utterances dropped: target unachievable
  std::size_t skipped_lid = 0;  // utterances trained on ASR CTC only
  bool diverged = false;
  std::string diagnostic;
};

struct TrainObserver {
  // After every micro-batch; `updated` tells whether the optimizer stepped.
  std::function<void(std::size_t micro_step, bool updated)> on_micro_step;
};

// Mean combined loss over the achievable utterances of a split, untaped and
// without SpecAugment.
double MeanLoss(const SpeechModel &model, const Corpus &corpus, Split split,
                const ObjectiveConfig &objective);

// Adapts `model` per config.plan (attaching LID heads on
// config.objective.lid_layers), trains on corpus.train, validates on
// corpus.dev_standard and leaves the model at the best checkpoint.
TrainResult Train(SpeechModel &model, const Corpus &corpus, const TrainConfig &config,
                  const TrainObserver &observer = {});

// Trains every upstream parameter with plain CTC through a temporary linear
// head on Z^L, then drops the head. `best` holds upstream weights only.
TrainResult PretrainUpstream(UpstreamModel &upstream, const Corpus &corpus,
                             const TrainConfig &config);

// Order-sensitive hash of parameter values.
std::uint64_t HashParams(const ParamList &params);

}  // namespace polyctc

#endif  // POLYCTC_TRAIN_TRAINER_H_
