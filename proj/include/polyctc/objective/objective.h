// polyctc/objective/objective.h
//
// SPDX-License-Identifier: Apache-2.0
//
// Auxiliary language-identification CTC at selected upstream layers and the
// combined objective
//
//   L = (1 - beta) * L_ctc + beta * mean_{l in M} L_lid^l,  beta in [0, 1].

#ifndef POLYCTC_OBJECTIVE_OBJECTIVE_H_
#define POLYCTC_OBJECTIVE_OBJECTIVE_H_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "polyctc/autodiff/tensor.h"
#include "polyctc/ctc/ctc.h"
#include "polyctc/ctc/vocabulary.h"
#include "polyctc/model/adaptation.h"
#include "polyctc/model/speech_model.h"

namespace polyctc {

struct ObjectiveConfig {
  double beta = 0.0;
  // Upstream layers (1-based) carrying a LID head; must lie inside the
  // fine-tuning window.
  std::vector<std::size_t> lid_layers;

  // Throws ConfigError: beta outside [0, 1], beta > 0 without layers, or a
  // layer outside the plan's window.
  void Validate(const AdaptationPlan &plan) const;
  bool uses_lid() const { return beta > 0.0 && !lid_layers.empty(); }
};

// Language-code-only vocabulary for the LID heads: blank at 0, then the
// codes in the order of the joint vocabulary.
class LidVocabulary {
 public:
  explicit LidVocabulary(const Vocabulary &joint);
  std::size_t num_codes() const { return codes_.size(); }
  // LID-head id of a language code; throws VocabularyError.
  int id(const std::string &code) const;
  const std::string &code(int id) const { return codes_.at(id - 1); }

 private:
  std::vector<std::string> codes_;
};

// The utterance's language code repeated |Y| times, where Y is the joint
// target including its leading code. Throws VocabularyError for an unknown
// code and ContractError for an empty target.
std::vector<int> BuildLidTarget(const std::string &language,
                                std::size_t target_length,
                                const LidVocabulary &vocab);

// CTC of the LID target against the layer's head over all T upstream frames.
CtcLoss LidCtcLoss(const SpeechModel &model, std::size_t layer,
                   const ad::Tensor &layer_output, std::span<const int> lid_target);

// beta * mean(lid_losses).
ad::Tensor AuxiliaryTerm(std::span<const ad::Tensor> lid_losses, double beta);

// Combined objective. Evaluated as L_ctc + beta * (mean - L_ctc), which is
// algebraically the weighted form but exact at the usual decimal inputs;
// beta = 0 returns ctc itself and beta = 1 returns the mean.
// Throws ContractError for beta outside [0, 1] or no LID losses at beta > 0.
ad::Tensor CombinedLoss(const ad::Tensor &ctc, std::span<const ad::Tensor> lid_losses,
                        double beta);

}  // namespace polyctc

#endif  // POLYCTC_OBJECTIVE_OBJECTIVE_H_
