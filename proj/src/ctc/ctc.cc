// polyctc/ctc/ctc.cc
//
// SPDX-License-Identifier: Apache-2.0

#include "polyctc/ctc/ctc.h"

#include <cmath>
#include <limits>

#include "polyctc/autodiff/ops.h"
#include "polyctc/common/errors.h"

namespace polyctc {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kNormTolerance = 1e-6;

void CheckInputs(const ad::Tensor &log_probs, std::span<const int> target,
                 int blank, const char *who) {
  if (log_probs.ndim() != 2) {
    throw DimensionError(std::string(who) + ": log_probs must be [frames x vocab], got " +
                         ad::ShapeString(log_probs.shape()));
  }
  const int vocab = static_cast<int>(log_probs.cols());
  if (blank < 0 || blank >= vocab) {
    throw ContractError(std::string(who) + ": blank id out of range");
  }
  for (int y : target) {
    if (y == blank) throw ContractError(std::string(who) + ": target contains the blank");
    if (y < 0 || y >= vocab) {
      throw ContractError(std::string(who) + ": target id " + std::to_string(y) +
                          " outside vocabulary of " + std::to_string(vocab));
    }
  }
  for (std::size_t t = 0; t < log_probs.rows(); ++t) {
    double mx = kNegInf;
    for (int v = 0; v < vocab; ++v) mx = std::max(mx, log_probs.at(t, v));
    double s = 0.0;
    for (int v = 0; v < vocab; ++v) s += std::exp(log_probs.at(t, v) - mx);
    const double lse = mx + std::log(s);
    if (!(std::abs(lse) <= kNormTolerance)) {
      throw ContractError(std::string(who) + ": row " + std::to_string(t) +
                          " is not a normalized log-distribution (logsumexp " +
                          std::to_string(lse) + ")");
    }
  }
}

}  // namespace

std::size_t CtcMinFrames(std::span<const int> target) {
  std::size_t n = target.size();
  for (std::size_t i = 1; i < target.size(); ++i) {
    if (target[i] == target[i - 1]) ++n;
  }
  return n;
}

CtcLoss CtcForward(const ad::Tensor &log_probs, std::span<const int> target,
                   int blank) {
  CheckInputs(log_probs, target, blank, "ctc_loss");
  const std::size_t frames = log_probs.rows();
  const std::size_t needed = CtcMinFrames(target);
  if (frames < needed) {
    return {ad::Tensor::Scalar(std::numeric_limits<double>::infinity()),
            "target of length " + std::to_string(target.size()) + " needs " +
                std::to_string(needed) + " frames, only " +
                std::to_string(frames) + " available"};
  }

  // Blank-interleaved target: blank y1 blank y2 ... yS blank.
  const std::size_t states = 2 * target.size() + 1;
  std::vector<int> ext(states, blank);
  for (std::size_t s = 0; s < target.size(); ++s) ext[2 * s + 1] = target[s];
  std::vector<char> skip(states, 0);
  for (std::size_t s = 2; s < states; ++s) {
    skip[s] = ext[s] != blank && ext[s] != ext[s - 2];
  }

  std::vector<double> init(states, kNegInf);
  init[0] = 0.0;
  if (states > 1) init[1] = 0.0;
  ad::Tensor alpha = ad::Add(ad::GatherRow(log_probs, 0, ext),
                             ad::Tensor::Vector(std::move(init)));
  for (std::size_t t = 1; t < frames; ++t) {
    std::vector<ad::Tensor> paths{alpha};
    if (states > 1) paths.push_back(ad::ShiftRight(alpha, 1, kNegInf));
    if (states > 2) paths.push_back(ad::ShiftRight(alpha, 2, kNegInf, skip));
    alpha = ad::Add(ad::LogSumExp(paths), ad::GatherRow(log_probs, t, ext));
  }

  // Valid paths end on the last symbol or the trailing blank.
  std::vector<ad::Tensor> finals{ad::Pick(alpha, states - 1)};
  if (states > 1) finals.push_back(ad::Pick(alpha, states - 2));
  return {ad::Neg(ad::LogSumExp(finals)), {}};
}

double CtcBruteForce(const ad::Tensor &log_probs, std::span<const int> target,
                     int blank) {
  CheckInputs(log_probs, target, blank, "ctc_brute_force");
  const std::size_t frames = log_probs.rows();
  const std::size_t vocab = log_probs.cols();
  if (vocab > 6 || frames > 8) {
    throw SizeError("ctc_brute_force: vocab " + std::to_string(vocab) +
                    " x frames " + std::to_string(frames) +
                    " exceeds the enumeration limit (vocab <= 6, frames <= 8)");
  }
  std::vector<int> path(frames, 0);
  double total = 0.0;
  while (true) {
    if (CollapsePath(path, blank) == std::vector<int>(target.begin(), target.end())) {
      double lp = 0.0;
      for (std::size_t t = 0; t < frames; ++t) lp += log_probs.at(t, path[t]);
      total += std::exp(lp);
    }
    // Odometer increment over vocab^frames labellings.
    std::size_t t = 0;
    while (t < frames && ++path[t] == static_cast<int>(vocab)) path[t++] = 0;
    if (t == frames) break;
  }
  return total;
}

std::vector<int> CollapsePath(std::span<const int> path, int blank) {
  std::vector<int> out;
  int prev = -1;
  for (int id : path) {
    if (id != prev && id != blank) out.push_back(id);
    prev = id;
  }
  return out;
}

std::vector<int> GreedyDecode(const ad::Tensor &log_probs, int blank) {
  if (log_probs.ndim() != 2) {
    throw DimensionError("greedy_decode: log_probs must be [frames x vocab], got " +
                         ad::ShapeString(log_probs.shape()));
  }
  const std::size_t vocab = log_probs.cols();
  std::vector<int> best(log_probs.rows());
  for (std::size_t t = 0; t < log_probs.rows(); ++t) {
    std::size_t arg = 0;
    for (std::size_t v = 1; v < vocab; ++v) {
      if (log_probs.at(t, v) > log_probs.at(t, arg)) arg = v;
    }
    best[t] = static_cast<int>(arg);
  }
  return CollapsePath(best, blank);
}

}  // namespace polyctc
