// polyctc/data/spec_augment.cc
//
// SPDX-License-Identifier: Apache-2.0

#include "polyctc/data/spec_augment.h"

#include "polyctc/common/errors.h"

namespace polyctc {
namespace {

// Zeroes `count` runs of `width` consecutive indices along one axis.
template <typename ZeroRun>
void MaskAxis(std::size_t extent, std::size_t count, std::size_t width,
              std::mt19937_64 &rng, ZeroRun zero) {
  if (count == 0 || width == 0 || width >= extent) return;
  std::uniform_int_distribution<std::size_t> start(0, extent - width);
  for (std::size_t m = 0; m < count; ++m) {
    const std::size_t s = start(rng);
    for (std::size_t i = s; i < s + width; ++i) zero(i);
  }
}

}  // namespace

SpecAugmentConfig SpecAugmentConfig::FromJson(const nlohmann::json &j) {
  SpecAugmentConfig c;
  for (const auto &[key, value] : j.items()) {
    if (!value.is_number_unsigned()) {
      throw ConfigError("specaugment." + key + ": expected a nonnegative integer");
    }
    if (key == "time_masks") c.time_masks = value.get<std::size_t>();
    else if (key == "time_width") c.time_width = value.get<std::size_t>();
    else if (key == "feature_masks") c.feature_masks = value.get<std::size_t>();
    else if (key == "feature_width") c.feature_width = value.get<std::size_t>();
    else throw ConfigError("specaugment." + key + ": unknown field");
  }
  return c;
}

nlohmann::json SpecAugmentConfig::ToJson() const {
  nlohmann::ordered_json j;
  j["time_masks"] = time_masks;
  j["time_width"] = time_width;
  j["feature_masks"] = feature_masks;
  j["feature_width"] = feature_width;
  return j;
}

ad::Tensor SpecAugmentMask(std::size_t rows, std::size_t cols,
                           const SpecAugmentConfig &config, std::mt19937_64 &rng) {
  ad::Tensor mask = ad::Tensor::Filled({rows, cols}, 1.0);
  std::span<double> m = mask.mutable_data();
  MaskAxis(rows, config.time_masks, config.time_width, rng, [&](std::size_t r) {
    std::fill(m.begin() + r * cols, m.begin() + (r + 1) * cols, 0.0);
  });
  MaskAxis(cols, config.feature_masks, config.feature_width, rng, [&](std::size_t c) {
    for (std::size_t r = 0; r < rows; ++r) m[r * cols + c] = 0.0;
  });
  return mask;
}

ad::Tensor SpecAugment(const ad::Tensor &features, const SpecAugmentConfig &config,
                       std::mt19937_64 &rng) {
  const ad::Tensor mask = SpecAugmentMask(features.rows(), features.cols(), config, rng);
  ad::Tensor out = features.Detached();
  std::span<double> v = out.mutable_data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= mask[i];
  return out;
}

}  // namespace polyctc
