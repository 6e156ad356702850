// polyctc/objective/objective.cc
//
// SPDX-License-Identifier: Apache-2.0

#include "polyctc/objective/objective.h"

#include <algorithm>

#include "polyctc/autodiff/ops.h"
#include "polyctc/common/errors.h"

namespace polyctc {
namespace {

void CheckBeta(double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw ContractError("beta must lie in [0, 1], got " + std::to_string(beta));
  }
}

ad::Tensor MeanOf(std::span<const ad::Tensor> losses) {
  ad::Tensor total = losses.front();
  for (std::size_t i = 1; i < losses.size(); ++i) total = ad::Add(total, losses[i]);
  return losses.size() == 1
             ? total
             : ad::Scale(total, 1.0 / static_cast<double>(losses.size()));
}

}  // namespace

void ObjectiveConfig::Validate(const AdaptationPlan &plan) const {
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw ConfigError("objective.beta must lie in [0, 1], got " + std::to_string(beta));
  }
  if (beta > 0.0 && lid_layers.empty()) {
    throw ConfigError("objective.lid_layers must be nonempty when beta > 0");
  }
  for (std::size_t l : lid_layers) {
    if (!plan.InWindow(l)) {
      throw ConfigError("objective.lid_layers: layer " + std::to_string(l) +
                        " is not inside the fine-tuning window");
    }
  }
}

LidVocabulary::LidVocabulary(const Vocabulary &joint) : codes_(joint.language_codes()) {}

int LidVocabulary::id(const std::string &code) const {
  auto it = std::find(codes_.begin(), codes_.end(), code);
  if (it == codes_.end()) throw VocabularyError("unknown language code '" + code + "'");
  return static_cast<int>(it - codes_.begin()) + 1;
}

std::vector<int> BuildLidTarget(const std::string &language,
                                std::size_t target_length,
                                const LidVocabulary &vocab) {
  if (target_length == 0) throw ContractError("LID target needs a nonempty transcription");
  return std::vector<int>(target_length, vocab.id(language));
}

CtcLoss LidCtcLoss(const SpeechModel &model, std::size_t layer,
                   const ad::Tensor &layer_output, std::span<const int> lid_target) {
  return CtcForward(model.LidLogProbs(layer, layer_output), lid_target);
}

ad::Tensor AuxiliaryTerm(std::span<const ad::Tensor> lid_losses, double beta) {
  CheckBeta(beta);
  if (lid_losses.empty()) throw ContractError("auxiliary term needs at least one LID loss");
  return ad::Scale(MeanOf(lid_losses), beta);
}

ad::Tensor CombinedLoss(const ad::Tensor &ctc, std::span<const ad::Tensor> lid_losses,
                        double beta) {
  CheckBeta(beta);
  if (beta == 0.0) return ctc;
  if (lid_losses.empty()) throw ContractError("beta > 0 requires at least one LID loss");
  const ad::Tensor mean = MeanOf(lid_losses);
  if (beta == 1.0) return mean;
  return ad::Add(ctc, ad::Scale(ad::Sub(mean, ctc), beta));
}

}  // namespace polyctc
