// polyctc/model/speech_model.h
//
// SPDX-License-Identifier: Apache-2.0

#ifndef POLYCTC_MODEL_SPEECH_MODEL_H_
#define POLYCTC_MODEL_SPEECH_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

#include "polyctc/autodiff/tensor.h"
#include "polyctc/model/adaptation.h"
#include "polyctc/model/checkpoint.h"
#include "polyctc/model/downstream.h"
#include "polyctc/model/layers.h"
#include "polyctc/model/upstream.h"

namespace polyctc {

struct ModelConfig {
  UpstreamConfig upstream;
  DownstreamConfig downstream;
};

struct ForwardOptions {
  // Multiplied into the upstream output before the downstream (SpecAugment).
  const ad::Tensor *upstream_mask = nullptr;
  // Precomputed Z^1..Z^p for p = FrozenPrefixDepth(); only the layers above
  // are recomputed.
  const std::vector<ad::Tensor> *cached_prefix = nullptr;
};

// Upstream encoder + downstream CTC head, adapted according to a plan, with
// optional per-layer language-identification heads.
//
// In Frozen mode the downstream consumes the featurizer's weighted sum of all
// layer outputs; in the other modes it consumes the last layer output.
class SpeechModel {
 public:
  struct Output {
    ad::Tensor log_probs;                  // [T' x |V|]
    std::vector<ad::Tensor> layer_outputs; // Z^1..Z^L
  };

  SpeechModel(const ModelConfig &config, std::uint64_t seed);

  // Resets trainability: downstream always trains, the featurizer trains in
  // Frozen mode, the upstream per ApplyPlan. Low-rank factors are drawn from
  // a stream of their own.
  void Adapt(const AdaptationPlan &plan);
  // One linear head D -> |codes|+1 per listed upstream layer, drawn from a
  // separate stream so that adding heads leaves other initial values intact.
  void AttachLidHeads(const std::vector<std::size_t> &layers,
                      std::size_t num_language_codes);

  Output Forward(const ad::Tensor &features, const ForwardOptions &options = {}) const;
  // Log-probabilities over blank + language codes for layer l.
  ad::Tensor LidLogProbs(std::size_t layer, const ad::Tensor &layer_output) const;

  // Upstream layers whose outputs cannot change under the current plan.
  std::size_t FrozenPrefixDepth() const;

  ParamList Params() const;
  ParamList TrainableParams() const;

  // Parameters plus the model shape, plan and LID layout as meta entries.
  Checkpoint ToCheckpoint() const;
  static SpeechModel FromCheckpoint(const Checkpoint &checkpoint);
  // Loads only upstream.* values, e.g. from a pretraining run.
  void LoadUpstream(const Checkpoint &checkpoint);

  const ModelConfig &config() const { return config_; }
  const AdaptationPlan &plan() const { return plan_; }
  std::uint64_t seed() const { return seed_; }
  UpstreamModel &upstream() { return upstream_; }
  const UpstreamModel &upstream() const { return upstream_; }
  Featurizer &featurizer() { return featurizer_; }
  const Featurizer &featurizer() const { return featurizer_; }
  const DownstreamModel &downstream() const { return downstream_; }
  const std::map<std::size_t, Linear> &lid_heads() const { return lid_heads_; }
  std::size_t num_lid_codes() const { return num_lid_codes_; }

 private:
  ModelConfig config_;
  std::uint64_t seed_;
  AdaptationPlan plan_;
  UpstreamModel upstream_;
  Featurizer featurizer_;
  DownstreamModel downstream_;
  std::map<std::size_t, Linear> lid_heads_;
  std::size_t num_lid_codes_ = 0;
};

// Upstream-only checkpoint with its shape metadata.
Checkpoint UpstreamCheckpoint(const UpstreamModel &upstream);
UpstreamConfig UpstreamConfigFromCheckpoint(const Checkpoint &checkpoint);

}  // namespace polyctc

#endif  // POLYCTC_MODEL_SPEECH_MODEL_H_
