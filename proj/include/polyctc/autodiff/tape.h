// polyctc/autodiff/tape.h
//
// SPDX-License-Identifier: Apache-2.0

#ifndef POLYCTC_AUTODIFF_TAPE_H_
#define POLYCTC_AUTODIFF_TAPE_H_

#include <functional>
#include <memory>
#include <vector>

#include "polyctc/autodiff/tensor.h"

namespace polyctc::ad {

// Ordered record of executed primitives. Primitives append themselves to the
// thread's active tape when at least one input requires a gradient; with no
// active tape they compute values only.
//
// A tape and the tensors it references belong to one thread.
class Tape {
 public:
  struct Entry {
    const char *op;
    std::shared_ptr<TensorImpl> output;
    // Reads output->grad and accumulates into the inputs it captured.
    std::function<void()> backward;
  };

  Tape() = default;
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  void Record(const char *op, std::shared_ptr<TensorImpl> output,
              std::function<void()> backward);

  // Reverse pass from a scalar loss. Intermediate gradients are reset before
  // the pass; leaf gradients accumulate across calls.
  void Backward(const Tensor &loss);

  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry> &entries() const { return entries_; }
  void Clear() { entries_.clear(); }

  static Tape *Active();

 private:
  friend class TapeScope;
  friend class NoGradScope;
  static Tape *&ActiveSlot();

  std::vector<Entry> entries_;
};

// Makes a tape the thread's active tape for the lifetime of the scope.
class TapeScope {
 public:
  explicit TapeScope(Tape &tape);
  ~TapeScope();
  TapeScope(const TapeScope &) = delete;
  TapeScope &operator=(const TapeScope &) = delete;

 private:
  Tape *previous_;
};

// Suspends recording.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope &) = delete;
  NoGradScope &operator=(const NoGradScope &) = delete;

 private:
  Tape *previous_;
};

}  // namespace polyctc::ad

#endif  // POLYCTC_AUTODIFF_TAPE_H_
