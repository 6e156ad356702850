// polyctc/autodiff/tape.cc
//
// SPDX-License-Identifier: Apache-2.0

#include "polyctc/autodiff/tape.h"

#include "polyctc/common/errors.h"

namespace polyctc::ad {

Tape *&Tape::ActiveSlot() {
  thread_local Tape *active = nullptr;
  return active;
}

Tape *Tape::Active() { return ActiveSlot(); }

void Tape::Record(const char *op, std::shared_ptr<TensorImpl> output,
                  std::function<void()> backward) {
  entries_.push_back(Entry{op, std::move(output), std::move(backward)});
}

void Tape::Backward(const Tensor &loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("Backward: loss must be a scalar, got shape " +
                        (loss.defined() ? ShapeString(loss.shape())
                                        : std::string("<undefined>")));
  }
  for (Entry &e : entries_) e.output->grad.clear();
  if (!loss.requires_grad()) return;
  loss.impl()->GradBuffer()[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->output->grad.empty()) continue;
    it->backward();
  }
}

TapeScope::TapeScope(Tape &tape) : previous_(Tape::ActiveSlot()) {
  Tape::ActiveSlot() = &tape;
}

TapeScope::~TapeScope() { Tape::ActiveSlot() = previous_; }

NoGradScope::NoGradScope() : previous_(Tape::ActiveSlot()) {
  Tape::ActiveSlot() = nullptr;
}

NoGradScope::~NoGradScope() { Tape::ActiveSlot() = previous_; }

}  // namespace polyctc::ad
