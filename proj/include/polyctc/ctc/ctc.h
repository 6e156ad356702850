// polyctc/ctc/ctc.h
//
// SPDX-License-Identifier: Apache-2.0

#ifndef POLYCTC_CTC_CTC_H_
#define POLYCTC_CTC_CTC_H_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "polyctc/autodiff/tensor.h"

namespace polyctc {

struct CtcLoss {
  // Scalar -log P(target | log_probs); +inf when the target cannot be
  // aligned to the available frames.
  ad::Tensor value;
  // Empty when the loss is finite by construction.
  std::string diagnostic;

  bool achievable() const { return diagnostic.empty(); }
};

// Frames needed to emit target: one per symbol plus one blank between each
// pair of equal neighbours.
std::size_t CtcMinFrames(std::span<const int> target);

// Negative log-likelihood of target under per-frame log-distributions
// log_probs [frames x vocab], summed over every alignment with the
// log-space forward recursion. Differentiable through the active tape.
//
// Throws ContractError if a row is not normalized (|logsumexp| > 1e-6),
// target contains the blank, or a target id is outside the vocabulary.
CtcLoss CtcForward(const ad::Tensor &log_probs, std::span<const int> target,
                   int blank = 0);

// Exhaustive sum over all vocab^frames labellings whose collapse equals
// target. Refuses (SizeError) beyond vocab 6 or frames 8.
double CtcBruteForce(const ad::Tensor &log_probs, std::span<const int> target,
                     int blank = 0);

// Removes repeats, then blanks.
std::vector<int> CollapsePath(std::span<const int> path, int blank = 0);

// Best path: per-frame argmax (ties to the lowest id), collapsed.
std::vector<int> GreedyDecode(const ad::Tensor &log_probs, int blank = 0);

}  // namespace polyctc

#endif  // POLYCTC_CTC_CTC_H_
