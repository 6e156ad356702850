// polyctc/cli/self_check.h
//
// SPDX-License-Identifier: Apache-2.0
//
// Built-in verification suites: the CTC recursion against exhaustive path
// enumeration, and taped gradients of the training objectives against
// central finite differences.

#ifndef POLYCTC_CLI_SELF_CHECK_H_
#define POLYCTC_CLI_SELF_CHECK_H_

#include <cstdint>
#include <string>
#include <vector>

namespace polyctc {

inline constexpr double kOracleTolerance = 1e-9;
inline constexpr double kGradientTolerance = 1e-5;

struct OracleResult {
  std::size_t instances = 0;
  std::size_t unachievable = 0;  // instances whose target needs more frames
  double max_abs_diff = 0.0;     // |exp(-loss) - enumerated probability|
  bool passed() const { return max_abs_diff <= kOracleTolerance; }
};

// Random instances with at most 6 frames, targets of 1..3 symbols and a
// vocabulary of at most 4 entries including blank.
OracleResult CtcOracleSuite(std::uint64_t seed, std::size_t instances);

struct GradientResult {
  std::string target;
  std::size_t seeds = 0;     // instances compared
  std::size_t redrawn = 0;   // instances within a step of a kink, replaced
  double max_rel_error = 0.0;
  bool passed() const { return max_rel_error <= kGradientTolerance; }
};

// Instances whose loss has a kink (ReLU) within one difference step of the
// evaluation point are replaced by fresh draws and counted.
// Targets: ctc_loss, lid_ctc_loss, combined_loss, featurizer, downstream,
// lora_attention.
const std::vector<std::string> &GradientTargets();
// Throws ConfigError for an unknown target.
GradientResult GradientSuite(const std::string &target, std::uint64_t seed, std::size_t seeds);

}  // namespace polyctc

#endif  // POLYCTC_CLI_SELF_CHECK_H_
