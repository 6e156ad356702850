// polyctc/model/adaptation.cc
//
// SPDX-License-Identifier: Apache-2.0

#include "polyctc/model/adaptation.h"

#include "polyctc/common/errors.h"

namespace polyctc {

std::string ModeName(AdaptationMode mode) {
  switch (mode) {
    case AdaptationMode::kFrozen: return "frozen";
    case AdaptationMode::kFineTuneWindow: return "finetune-window";
    case AdaptationMode::kLowRank: return "lora";
  }
  return "unknown";
}

AdaptationMode ParseMode(const std::string &name) {
  if (name == "frozen") return AdaptationMode::kFrozen;
  if (name == "finetune-window" || name == "finetune") return AdaptationMode::kFineTuneWindow;
  if (name == "lora" || name == "low-rank") return AdaptationMode::kLowRank;
  throw ConfigError("unknown adaptation mode '" + name + "'");
}

AdaptationPlan AdaptationPlan::Frozen() { return {}; }

AdaptationPlan AdaptationPlan::FineTuneWindow(std::size_t first, std::size_t last) {
  AdaptationPlan p;
  p.mode = AdaptationMode::kFineTuneWindow;
  p.window_first = first;
  p.window_last = last;
  return p;
}

AdaptationPlan AdaptationPlan::FineTuneLayers(const std::vector<std::size_t> &layers) {
  if (layers.empty()) throw ContractError("fine-tune window is empty");
  for (std::size_t i = 1; i < layers.size(); ++i) {
    if (layers[i] != layers[i - 1] + 1) {
      throw ContractError("fine-tune window must be consecutive layers");
    }
  }
  return FineTuneWindow(layers.front(), layers.back());
}

AdaptationPlan AdaptationPlan::LowRank(std::size_t rank, double alpha) {
  AdaptationPlan p;
  p.mode = AdaptationMode::kLowRank;
  p.rank = rank;
  p.alpha = alpha;
  return p;
}

bool AdaptationPlan::InWindow(std::size_t layer) const {
  return mode == AdaptationMode::kFineTuneWindow && layer >= window_first &&
         layer <= window_last;
}

std::vector<std::size_t> AdaptationPlan::WindowLayers() const {
  std::vector<std::size_t> out;
  if (mode != AdaptationMode::kFineTuneWindow) return out;
  for (std::size_t l = window_first; l <= window_last; ++l) out.push_back(l);
  return out;
}

void AdaptationPlan::Validate(std::size_t num_layers) const {
  switch (mode) {
    case AdaptationMode::kFrozen:
      return;
    case AdaptationMode::kFineTuneWindow:
      if (window_first < 1 || window_last < window_first || window_last > num_layers) {
        throw ContractError("fine-tune window {" + std::to_string(window_first) +
                            ".." + std::to_string(window_last) +
                            "} is not within layers 1.." + std::to_string(num_layers));
      }
      return;
    case AdaptationMode::kLowRank:
      if (rank == 0) throw ContractError("low-rank plan needs rank >= 1");
      if (!(alpha > 0.0)) throw ContractError("low-rank plan needs alpha > 0");
      return;
  }
}

const std::vector<WindowPreset> &ReferenceWindowPresets() {
  static const std::vector<WindowPreset> presets = {
      {"mms-1b", 48, 25, 36, {27, 30, 33, 36}},
      {"xeus", 19, 12, 19, {14, 17}},
      {"owsm-ctc", 27, 8, 13, {10, 13}},
  };
  return presets;
}

WindowPreset ToyWindowPreset() { return {"toy", 6, 3, 5, {4, 5}}; }

ParamList ApplyPlan(UpstreamModel &upstream, const AdaptationPlan &plan,
                    std::mt19937_64 &rng) {
  plan.Validate(upstream.num_layers());
  for (std::size_t l = 1; l <= upstream.num_layers(); ++l) {
    MultiHeadAttention &attn = upstream.layer(l).attention();
    for (Linear *proj : {&attn.q(), &attn.k(), &attn.v(), &attn.o()}) {
      proj->DetachAdapter();
    }
  }
  SetRequiresGrad(upstream.Params(), false);

  ParamList trainable;
  for (std::size_t l = 1; l <= upstream.num_layers(); ++l) {
    if (plan.mode == AdaptationMode::kFineTuneWindow && plan.InWindow(l)) {
      ParamList layer = upstream.LayerParams(l);
      trainable.insert(trainable.end(), layer.begin(), layer.end());
    } else if (plan.mode == AdaptationMode::kLowRank) {
      MultiHeadAttention &attn = upstream.layer(l).attention();
      const std::string prefix = "upstream.layer" + std::to_string(l) + ".attn.";
      const std::pair<Linear *, const char *> projs[] = {
          {&attn.q(), "q"}, {&attn.k(), "k"}, {&attn.v(), "v"}, {&attn.o(), "o"}};
      for (auto [proj, name] : projs) {
        proj->AttachAdapter(plan.rank, plan.alpha, rng);
        proj->CollectAdapter(prefix + name, trainable);
      }
    }
  }
  SetRequiresGrad(trainable, true);
  return trainable;
}

}  // namespace polyctc
