// polyctc/data/spec_augment.h
//
// SPDX-License-Identifier: Apache-2.0

#ifndef POLYCTC_DATA_SPEC_AUGMENT_H_
#define POLYCTC_DATA_SPEC_AUGMENT_H_

#include <random>

#include "json.hpp"

#include "polyctc/autodiff/tensor.h"

namespace polyctc {

// Fixed-width masks: `time_masks` runs of `time_width` rows and
// `feature_masks` runs of `feature_width` columns. A width of zero or one
// not smaller than the extent disables that kind of mask.
struct SpecAugmentConfig {
  std::size_t time_masks = 0;
  std::size_t time_width = 0;
  std::size_t feature_masks = 0;
  std::size_t feature_width = 0;

  bool enabled() const {
    return (time_masks > 0 && time_width > 0) || (feature_masks > 0 && feature_width > 0);
  }
  static SpecAugmentConfig FromJson(const nlohmann::json &j);
  nlohmann::json ToJson() const;
};

// 0/1 mask of shape [rows x cols]; starts are uniform over valid offsets.
ad::Tensor SpecAugmentMask(std::size_t rows, std::size_t cols,
                           const SpecAugmentConfig &config, std::mt19937_64 &rng);

// Untaped copy of `features` with the masked entries set to zero.
ad::Tensor SpecAugment(const ad::Tensor &features, const SpecAugmentConfig &config,
                       std::mt19937_64 &rng);

}  // namespace polyctc

#endif  // POLYCTC_DATA_SPEC_AUGMENT_H_
