// polyctc/model/adaptation.h
//
// SPDX-License-Identifier: Apache-2.0

#ifndef POLYCTC_MODEL_ADAPTATION_H_
#define POLYCTC_MODEL_ADAPTATION_H_

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "polyctc/model/params.h"
#include "polyctc/model/upstream.h"

namespace polyctc {

enum class AdaptationMode { kFrozen, kFineTuneWindow, kLowRank };

std::string ModeName(AdaptationMode mode);
// Accepts "frozen", "finetune-window" and "lora"; throws ConfigError.
AdaptationMode ParseMode(const std::string &name);

// Which upstream parameters train.
struct AdaptationPlan {
  AdaptationMode mode = AdaptationMode::kFrozen;
  // 1-based inclusive window of unfrozen layers (FineTuneWindow only).
  std::size_t window_first = 0;
  std::size_t window_last = 0;
  // Low-rank factors (LowRank only); effective scale is alpha / rank.
  std::size_t rank = 16;
  double alpha = 16.0;

  static AdaptationPlan Frozen();
  static AdaptationPlan FineTuneWindow(std::size_t first, std::size_t last);
  // Throws ContractError unless layers are consecutive.
  static AdaptationPlan FineTuneLayers(const std::vector<std::size_t> &layers);
  static AdaptationPlan LowRank(std::size_t rank = 16, double alpha = 16.0);

  bool InWindow(std::size_t layer) const;
  std::vector<std::size_t> WindowLayers() const;
  // Throws ContractError when the window falls outside 1..num_layers.
  void Validate(std::size_t num_layers) const;
};

// Named partial fine-tuning configuration: window and LID layer subset.
struct WindowPreset {
  std::string name;
  std::size_t num_layers;
  std::size_t window_first;
  std::size_t window_last;
  std::vector<std::size_t> lid_layers;
};

// Windows selected for the three reference upstreams (48, 19 and 27 layers).
const std::vector<WindowPreset> &ReferenceWindowPresets();
// Middle-upper window for the 6-layer desk-scale upstream.
WindowPreset ToyWindowPreset();

// Freezes every base upstream parameter, then unfreezes what the plan
// selects: nothing (Frozen), the window's layers (FineTuneWindow), or freshly
// attached adapters on the q/k/v/o projections of every layer (LowRank).
// Returns exactly the upstream parameters that now require gradients.
ParamList ApplyPlan(UpstreamModel &upstream, const AdaptationPlan &plan,
                    std::mt19937_64 &rng);

}  // namespace polyctc

#endif  // POLYCTC_MODEL_ADAPTATION_H_
