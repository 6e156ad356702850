// polyctc/model/speech_model.cc
//
// SPDX-License-Identifier: Apache-2.0

#include "polyctc/model/speech_model.h"

#include <string>

#include "polyctc/autodiff/ops.h"
#include "polyctc/common/errors.h"

namespace polyctc {
namespace {

std::size_t AsSize(double v) { return static_cast<std::size_t>(v); }

std::vector<double> UpstreamMeta(const UpstreamConfig &c) {
  return {static_cast<double>(c.input_dim), static_cast<double>(c.num_layers),
          static_cast<double>(c.num_heads), static_cast<double>(c.ff_dim)};
}

}  // namespace

SpeechModel::SpeechModel(const ModelConfig &config, std::uint64_t seed)
    : config_(config), seed_(seed) {
  auto up_rng = DerivedRng(seed, "upstream");
  upstream_ = UpstreamModel(config.upstream, up_rng);
  featurizer_ = Featurizer(config.upstream.num_layers);
  auto down_rng = DerivedRng(seed, "downstream");
  downstream_ = DownstreamModel(config.upstream.input_dim, config.downstream, down_rng);
  Adapt(AdaptationPlan::Frozen());
}

void SpeechModel::Adapt(const AdaptationPlan &plan) {
  auto rng = DerivedRng(seed_, "low-rank");
  ApplyPlan(upstream_, plan, rng);
  plan_ = plan;
  ad::Tensor raw = featurizer_.raw_weights();
  raw.set_requires_grad(plan.mode == AdaptationMode::kFrozen);
  SetRequiresGrad(downstream_.Params(), true);
}

void SpeechModel::AttachLidHeads(const std::vector<std::size_t> &layers,
                                 std::size_t num_language_codes) {
  lid_heads_.clear();
  num_lid_codes_ = num_language_codes;
  auto rng = DerivedRng(seed_, "lid-heads");
  for (std::size_t l : layers) {
    if (l < 1 || l > upstream_.num_layers()) {
      throw ContractError("LID head layer " + std::to_string(l) +
                          " outside 1.." + std::to_string(upstream_.num_layers()));
    }
    Linear head(config_.upstream.input_dim, num_language_codes + 1, rng);
    ParamList p;
    head.Collect("lid", p);
    SetRequiresGrad(p, true);
    lid_heads_.emplace(l, std::move(head));
  }
}

SpeechModel::Output SpeechModel::Forward(const ad::Tensor &features,
                                         const ForwardOptions &options) const {
  Output out;
  if (options.cached_prefix && !options.cached_prefix->empty()) {
    out.layer_outputs = *options.cached_prefix;
    const std::size_t start = out.layer_outputs.size();
    auto rest = upstream_.ForwardFrom(out.layer_outputs.back(), start);
    out.layer_outputs.insert(out.layer_outputs.end(), rest.begin(), rest.end());
  } else {
    out.layer_outputs = upstream_.Forward(features);
  }
  ad::Tensor z = plan_.mode == AdaptationMode::kFrozen
                     ? featurizer_.Forward(out.layer_outputs)
                     : out.layer_outputs.back();
  if (options.upstream_mask) z = ad::Mul(z, *options.upstream_mask);
  out.log_probs = downstream_.Forward(z);
  return out;
}

ad::Tensor SpeechModel::LidLogProbs(std::size_t layer,
                                    const ad::Tensor &layer_output) const {
  auto it = lid_heads_.find(layer);
  if (it == lid_heads_.end()) {
    throw ContractError("no LID head on layer " + std::to_string(layer));
  }
  return ad::LogSoftmax(it->second.Forward(layer_output));
}

std::size_t SpeechModel::FrozenPrefixDepth() const {
  switch (plan_.mode) {
    case AdaptationMode::kFrozen: return upstream_.num_layers();
    case AdaptationMode::kFineTuneWindow: return plan_.window_first - 1;
    case AdaptationMode::kLowRank: return 0;
  }
  return 0;
}

ParamList SpeechModel::Params() const {
  ParamList out = upstream_.Params();
  featurizer_.Collect("featurizer", out);
  ParamList down = downstream_.Params();
  out.insert(out.end(), down.begin(), down.end());
  for (const auto &[layer, head] : lid_heads_) {
    head.Collect("lid.layer" + std::to_string(layer), out);
  }
  return out;
}

ParamList SpeechModel::TrainableParams() const {
  ParamList out;
  for (auto &p : Params()) {
    if (p.tensor.requires_grad()) out.push_back(p);
  }
  return out;
}

Checkpoint SpeechModel::ToCheckpoint() const {
  Checkpoint ck = Snapshot(Params());
  const DownstreamConfig &d = config_.downstream;
  ck.PutMeta("model.upstream", UpstreamMeta(config_.upstream));
  ck.PutMeta("model.downstream",
             {static_cast<double>(d.proj_dim), static_cast<double>(d.subsampling),
              static_cast<double>(d.hidden_dim), static_cast<double>(d.num_layers),
              static_cast<double>(d.num_heads), static_cast<double>(d.ff_dim),
              static_cast<double>(d.vocab_size)});
  ck.PutMeta("model.seed", {static_cast<double>(seed_ & 0xffffffffu),
                            static_cast<double>(seed_ >> 32)});
  ck.PutMeta("plan", {static_cast<double>(plan_.mode), static_cast<double>(plan_.window_first),
                      static_cast<double>(plan_.window_last), static_cast<double>(plan_.rank),
                      plan_.alpha});
  std::vector<double> lid{static_cast<double>(num_lid_codes_)};
  for (const auto &[layer, head] : lid_heads_) lid.push_back(static_cast<double>(layer));
  ck.PutMeta("lid", std::move(lid));
  return ck;
}

SpeechModel SpeechModel::FromCheckpoint(const Checkpoint &ck) {
  ModelConfig config;
  config.upstream = UpstreamConfigFromCheckpoint(ck);
  const auto &d = ck.Get("meta.model.downstream").values;
  if (d.size() != 7) throw FormatError("meta.model.downstream: expected 7 values");
  config.downstream = {AsSize(d[0]), AsSize(d[1]), AsSize(d[2]), AsSize(d[3]),
                       AsSize(d[4]), AsSize(d[5]), AsSize(d[6])};
  const auto &s = ck.Get("meta.model.seed").values;
  const std::uint64_t seed = static_cast<std::uint64_t>(s.at(0)) |
                             (static_cast<std::uint64_t>(s.at(1)) << 32);
  SpeechModel model(config, seed);

  const auto &p = ck.Get("meta.plan").values;
  if (p.size() != 5) throw FormatError("meta.plan: expected 5 values");
  AdaptationPlan plan;
  plan.mode = static_cast<AdaptationMode>(AsSize(p[0]));
  plan.window_first = AsSize(p[1]);
  plan.window_last = AsSize(p[2]);
  plan.rank = AsSize(p[3]);
  plan.alpha = p[4];
  model.Adapt(plan);

  const auto &lid = ck.Get("meta.lid").values;
  if (lid.size() > 1) {
    std::vector<std::size_t> layers;
    for (std::size_t i = 1; i < lid.size(); ++i) layers.push_back(AsSize(lid[i]));
    model.AttachLidHeads(layers, AsSize(lid[0]));
  }
  Restore(ck, model.Params());
  return model;
}

void SpeechModel::LoadUpstream(const Checkpoint &checkpoint) {
  const UpstreamConfig stored = UpstreamConfigFromCheckpoint(checkpoint);
  const UpstreamConfig &mine = config_.upstream;
  if (stored.input_dim != mine.input_dim || stored.num_layers != mine.num_layers ||
      stored.num_heads != mine.num_heads || stored.ff_dim != mine.ff_dim) {
    throw FormatError("upstream checkpoint shape does not match the model");
  }
  ParamList base;
  for (auto &p : upstream_.Params()) {
    if (p.name.find(".lora_") == std::string::npos) base.push_back(p);
  }
  Restore(checkpoint, base);
}

Checkpoint UpstreamCheckpoint(const UpstreamModel &upstream) {
  ParamList base;
  for (auto &p : upstream.Params()) {
    if (p.name.find(".lora_") == std::string::npos) base.push_back(p);
  }
  Checkpoint ck = Snapshot(base);
  ck.PutMeta("model.upstream", UpstreamMeta(upstream.config()));
  return ck;
}

UpstreamConfig UpstreamConfigFromCheckpoint(const Checkpoint &checkpoint) {
  const auto &u = checkpoint.Get("meta.model.upstream").values;
  if (u.size() != 4) throw FormatError("meta.model.upstream: expected 4 values");
  return {AsSize(u[0]), AsSize(u[1]), AsSize(u[2]), AsSize(u[3])};
}

}  // namespace polyctc
