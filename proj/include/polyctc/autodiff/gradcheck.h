// polyctc/autodiff/gradcheck.h
//
// SPDX-License-Identifier: Apache-2.0

#ifndef POLYCTC_AUTODIFF_GRADCHECK_H_
#define POLYCTC_AUTODIFF_GRADCHECK_H_

#include <functional>

#include "polyctc/autodiff/tensor.h"

namespace polyctc::ad {

using ScalarFunction = std::function<Tensor(const Tensor &)>;

// Compares the taped gradient of f at x with central differences of step h.
// Returns max_i |analytic_i - numeric_i| / max(1, |analytic_i|).
//
// x is perturbed in place and restored, so f may close over a model that
// owns x. f must be deterministic. Throws NumericError if f(x) is not finite.
double FiniteDiffCheck(const ScalarFunction &f, Tensor x, double h = 1e-5);

struct FiniteDiffResult {
  double max_rel_error = 0.0;  // over smooth coordinates
  std::size_t nonsmooth = 0;
};

// As FiniteDiffCheck, but a coordinate whose central differences at h and
// h/10 disagree by more than smoothness_tol (relative) lies within h of a
// kink, e.g. a ReLU switching sign; it is counted and left out of the error.
// smoothness_tol = 0 disables the test.
FiniteDiffResult FiniteDiffCompare(const ScalarFunction &f, Tensor x, double h,
                                   double smoothness_tol);

}  // namespace polyctc::ad

#endif  // POLYCTC_AUTODIFF_GRADCHECK_H_
