// polyctc/autodiff/gradcheck.cc
//
// SPDX-License-Identifier: Apache-2.0

#include "polyctc/autodiff/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "polyctc/autodiff/tape.h"
#include "polyctc/common/errors.h"

namespace polyctc::ad {
namespace {

double EvalNoGrad(const ScalarFunction &f, const Tensor &x) {
  NoGradScope no_grad;
  const Tensor y = f(x);
  if (y.size() != 1) {
    throw ContractError("FiniteDiffCheck: function must return a scalar, got " +
                        ShapeString(y.shape()));
  }
  return y.item();
}

}  // namespace

FiniteDiffResult FiniteDiffCompare(const ScalarFunction &f, Tensor x, double h,
                                   double smoothness_tol) {
  if (!(h > 0.0)) throw ContractError("FiniteDiffCheck: step must be positive");

  const bool had_requires_grad = x.requires_grad();
  x.set_requires_grad(true);
  x.zero_grad();
  std::vector<double> analytic;
  {
    Tape tape;
    TapeScope scope(tape);
    const Tensor y = f(x);
    if (y.size() != 1) {
      throw ContractError("FiniteDiffCheck: function must return a scalar, got " +
                          ShapeString(y.shape()));
    }
    if (!std::isfinite(y.item())) {
      throw NumericError("FiniteDiffCheck: f(x) is not finite (" +
                         std::to_string(y.item()) + ")");
    }
    tape.Backward(y);
    analytic = x.grad();
  }
  x.zero_grad();
  x.set_requires_grad(had_requires_grad);

  auto values = x.mutable_data();
  auto central = [&](std::size_t i, double step) {
    const double saved = values[i];
    values[i] = saved + step;
    const double up = EvalNoGrad(f, x);
    values[i] = saved - step;
    const double down = EvalNoGrad(f, x);
    values[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("FiniteDiffCheck: f is not finite near coordinate " +
                         std::to_string(i));
    }
    return (up - down) / (2.0 * step);
  };

  FiniteDiffResult r;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double numeric = central(i, h);
    if (smoothness_tol > 0.0) {
      const double fine = central(i, h / 10.0);
      if (std::abs(numeric - fine) / std::max(1.0, std::abs(numeric)) > smoothness_tol) {
        ++r.nonsmooth;
        continue;
      }
    }
    const double err = std::abs(analytic[i] - numeric) /
                       std::max(1.0, std::abs(analytic[i]));
    r.max_rel_error = std::max(r.max_rel_error, err);
  }
  return r;
}

double FiniteDiffCheck(const ScalarFunction &f, Tensor x, double h) {
  return FiniteDiffCompare(f, std::move(x), h, 0.0).max_rel_error;
}

}  // namespace polyctc::ad
