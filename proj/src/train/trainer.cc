// polyctc/train/trainer.cc
//
// SPDX-License-Identifier: Apache-2.0

#include "polyctc/train/trainer.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <numeric>
#include <optional>

#include "polyctc/autodiff/ops.h"
#include "polyctc/autodiff/tape.h"
#include "polyctc/common/errors.h"
#include "polyctc/common/random.h"
#include "polyctc/ctc/ctc.h"

namespace polyctc {
namespace {

using nlohmann::json;

struct UtteranceLoss {
  ad::Tensor loss;
  bool skipped = false;      // ASR target unachievable
  bool lid_skipped = false;  // LID target unachievable, ASR CTC kept
};

// What the generic loop needs from a concrete model.
struct LoopSpec {
  ParamList trainable;
  std::size_t num_train = 0;
  std::function<UtteranceLoss(std::size_t index, std::mt19937_64 &augment_rng)> loss;
  std::function<double()> validate;
  std::function<Checkpoint()> snapshot;
  std::function<void(const Checkpoint &)> restore;
  std::function<void()> after_epoch;
};

bool ParamsFinite(const ParamList &params) {
  return std::all_of(params.begin(), params.end(),
                     [](const NamedParam &p) { return p.tensor.AllFinite(); });
}

TrainResult RunLoop(const LoopSpec &spec, const TrainConfig &config,
                    const TrainObserver &observer) {
  if (spec.num_train == 0) throw ContractError("training split is empty");
  for (const auto &p : spec.trainable) {
    ad::Tensor t = p.tensor;
    t.zero_grad();
  }
  Adam adam(spec.trainable);
  std::mt19937_64 batch_rng = DerivedRng(config.seed, "batches");
  std::mt19937_64 augment_rng = DerivedRng(config.seed, "specaugment");
  std::vector<std::size_t> order(spec.num_train);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), batch_rng);
  std::size_t cursor = 0;

  TrainResult result;
  result.best = spec.snapshot();
  const double scale =
      1.0 / static_cast<double>(config.batch_size * config.accumulation_every);
  std::size_t micro = 0;

  auto diverge = [&](const std::string &why) {
    result.diverged = true;
    result.diagnostic = why;
    spec.restore(result.best);
    return result;
  };

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t counted = 0, skipped = 0;
    for (std::size_t step = 0; step < config.steps_per_epoch; ++step) {
      for (std::size_t b = 0; b < config.batch_size; ++b) {
        if (cursor == order.size()) {
          std::shuffle(order.begin(), order.end(), batch_rng);
          cursor = 0;
        }
        const std::size_t index = order[cursor++];
        ad::Tape tape;
        ad::TapeScope scope(tape);
        UtteranceLoss u;
        try {
          u = spec.loss(index, augment_rng);
        } catch (const NumericError &e) {
          return diverge(std::string("epoch ") + std::to_string(epoch) + ": " + e.what());
        }
        if (u.skipped) {
          ++result.skipped_ctc;
          ++skipped;
          continue;
        }
        if (u.lid_skipped) ++result.skipped_lid;
        const double value = u.loss.item();
        if (!std::isfinite(value)) {
          return diverge("non-finite training loss at epoch " + std::to_string(epoch) +
                         ", micro-step " + std::to_string(micro + 1));
        }
        loss_sum += value;
        ++counted;
        tape.Backward(ad::Scale(u.loss, scale));
      }
      ++micro;
      const bool update = micro % config.accumulation_every == 0;
      if (update) {
        ++result.updates;
        adam.Step(LearningRate(config, result.updates));
        if (!ParamsFinite(spec.trainable)) {
          return diverge("non-finite parameters after update " + std::to_string(result.updates));
        }
      }
      if (observer.on_micro_step) observer.on_micro_step(micro, update);
    }

    const double val = spec.validate();
    if (std::isnan(val)) return diverge("non-finite validation loss at epoch " + std::to_string(epoch));
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = counted ? loss_sum / static_cast<double>(counted) : 0.0;
    rec.val_loss = val;
    rec.lr = LearningRate(config, std::max<std::size_t>(result.updates, 1));
    rec.skipped_utts = skipped;
    result.log.push_back(rec);
    if (val < result.best.validation_loss) {
      result.best = spec.snapshot();
      result.best.validation_loss = val;
      result.best.step = result.updates;
    }
    if (spec.after_epoch) spec.after_epoch();
  }
  spec.restore(result.best);
  return result;
}

// Lazily filled per-utterance Z^1..Z^p for the frozen prefix.
class PrefixCache {
 public:
  PrefixCache(const SpeechModel &model, std::size_t size)
      : model_(model), depth_(model.FrozenPrefixDepth()), entries_(size) {}

  const std::vector<ad::Tensor> *Get(std::size_t index, const ad::Tensor &features) {
    if (depth_ == 0) return nullptr;
    auto &slot = entries_[index];
    if (!slot) {
      ad::NoGradScope no_grad;
      std::vector<ad::Tensor> outs;
      ad::Tensor z = features;
      for (std::size_t l = 1; l <= depth_; ++l) {
        z = model_.upstream().layer(l).Forward(z);
        outs.push_back(z);
      }
      slot = std::move(outs);
    }
    return &*slot;
  }

 private:
  const SpeechModel &model_;
  std::size_t depth_;
  std::vector<std::optional<std::vector<ad::Tensor>>> entries_;
};

UtteranceLoss SpeechLoss(const SpeechModel &model, const Corpus &corpus, const Utterance &u,
                         const ObjectiveConfig &objective, const LidVocabulary *lid_vocab,
                         const ForwardOptions &options) {
  UtteranceLoss r;
  const std::vector<int> target = corpus.Target(u);
  const SpeechModel::Output out = model.Forward(u.features, options);
  if (!out.log_probs.AllFinite()) throw NumericError("non-finite log-probabilities for " + u.id);
  const CtcLoss ctc = CtcForward(out.log_probs, target);
  if (!ctc.achievable()) {
    r.skipped = true;
    return r;
  }
  r.loss = ctc.value;
  if (!objective.uses_lid()) return r;
  const std::vector<int> lid_target = BuildLidTarget(u.language, target.size(), *lid_vocab);
  std::vector<ad::Tensor> lids;
  for (const auto &[layer, head] : model.lid_heads()) {
    const CtcLoss lid = LidCtcLoss(model, layer, out.layer_outputs[layer - 1], lid_target);
    if (!lid.achievable()) {
      r.lid_skipped = true;
      return r;
    }
    lids.push_back(lid.value);
  }
  r.loss = CombinedLoss(ctc.value, lids, objective.beta);
  return r;
}

double MeanOver(const std::vector<Utterance> &utts,
                const std::function<UtteranceLoss(std::size_t)> &loss) {
  ad::NoGradScope no_grad;
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < utts.size(); ++i) {
    const UtteranceLoss u = loss(i);
    if (u.skipped) continue;
    sum += u.loss.item();
    ++n;
  }
  return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::infinity();
}

AdaptationPlan PlanFromJson(const json &j, const AdaptationPlan &base) {
  AdaptationPlan plan = base;
  if (j.contains("strategy")) {
    const AdaptationMode mode = ParseMode(j.at("strategy").get<std::string>());
    if (mode != plan.mode) {
      plan = mode == AdaptationMode::kFrozen ? AdaptationPlan::Frozen()
             : mode == AdaptationMode::kLowRank
                 ? AdaptationPlan::LowRank(base.rank, base.alpha)
                 : AdaptationPlan::FineTuneWindow(base.window_first ? base.window_first : 1,
                                                  base.window_last ? base.window_last : 1);
    }
  }
  if (j.contains("window")) {
    const auto w = j.at("window").get<std::vector<std::size_t>>();
    if (w.size() != 2) throw ConfigError("train.window: expected [first, last]");
    plan.window_first = w[0];
    plan.window_last = w[1];
  }
  if (j.contains("lora_rank")) plan.rank = j.at("lora_rank").get<std::size_t>();
  if (j.contains("lora_alpha")) plan.alpha = j.at("lora_alpha").get<double>();
  return plan;
}

}  // namespace

void TrainConfig::Validate() const {
  const std::string w = "train.";
  if (epochs == 0) throw ConfigError(w + "epochs: must be positive");
  if (steps_per_epoch == 0) throw ConfigError(w + "steps_per_epoch: must be positive");
  if (batch_size == 0) throw ConfigError(w + "batch_size: must be positive");
  if (accumulation_every == 0) throw ConfigError(w + "accumulation_every: must be positive");
  if (!(peak_lr > 0.0)) throw ConfigError(w + "peak_lr: must be positive");
  if (warmup_steps > 0 && plan.mode == AdaptationMode::kFineTuneWindow) {
    throw ConfigError(w + "warmup_steps: warm-up is not used when fine-tuning upstream layers");
  }
  if (plan.mode == AdaptationMode::kLowRank && (plan.rank == 0 || !(plan.alpha > 0.0))) {
    throw ConfigError(w + "lora_rank/lora_alpha: must be positive");
  }
  objective.Validate(plan);
}

TrainConfig TrainConfig::FromJson(const json &j, const TrainConfig &base) {
  static const std::set<std::string> known = {
      "epochs", "steps_per_epoch", "batch_size", "accumulation_every", "peak_lr",
      "warmup_steps", "seed", "strategy", "window", "lora_rank", "lora_alpha",
      "beta", "lid_layers", "specaugment"};
  if (!j.is_object()) throw ConfigError("train: expected an object");
  TrainConfig c = base;
  for (const auto &[key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("train." + key + ": unknown field");
  }
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.steps_per_epoch = j.value("steps_per_epoch", c.steps_per_epoch);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.accumulation_every = j.value("accumulation_every", c.accumulation_every);
    c.peak_lr = j.value("peak_lr", c.peak_lr);
    c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
    c.seed = j.value("seed", c.seed);
    c.plan = PlanFromJson(j, c.plan);
    c.objective.beta = j.value("beta", c.objective.beta);
    c.objective.lid_layers = j.value("lid_layers", c.objective.lid_layers);
  } catch (const json::exception &e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
  if (j.contains("specaugment")) c.specaugment = SpecAugmentConfig::FromJson(j.at("specaugment"));
  return c;
}

TrainConfig TrainConfig::FromJson(const json &j) { return FromJson(j, TrainConfig{}); }

json TrainConfig::ToJson() const {
  nlohmann::ordered_json j;
  j["epochs"] = epochs;
  j["steps_per_epoch"] = steps_per_epoch;
  j["batch_size"] = batch_size;
  j["accumulation_every"] = accumulation_every;
  j["peak_lr"] = peak_lr;
  j["warmup_steps"] = warmup_steps;
  j["seed"] = seed;
  j["strategy"] = ModeName(plan.mode);
  if (plan.mode == AdaptationMode::kFineTuneWindow) {
    j["window"] = {plan.window_first, plan.window_last};
  }
  if (plan.mode == AdaptationMode::kLowRank) {
    j["lora_rank"] = plan.rank;
    j["lora_alpha"] = plan.alpha;
  }
  j["beta"] = objective.beta;
  j["lid_layers"] = objective.lid_layers;
  j["specaugment"] = specaugment.ToJson();
  return j;
}

double LearningRate(const TrainConfig &config, std::size_t update) {
  if (config.warmup_steps == 0 || update >= config.warmup_steps) return config.peak_lr;
  return config.peak_lr * static_cast<double>(update) / static_cast<double>(config.warmup_steps);
}

Adam::Adam(ParamList params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto &p : params_) {
    m_.emplace_back(p.tensor.size(), 0.0);
    v_.emplace_back(p.tensor.size(), 0.0);
  }
}

void Adam::Step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ad::Tensor t = params_[i].tensor;
    if (!t.has_grad()) {
      // A zero gradient still decays the moments.
      for (std::size_t k = 0; k < m_[i].size(); ++k) {
        m_[i][k] *= beta1_;
        v_[i][k] *= beta2_;
      }
    }
    const std::vector<double> g = t.has_grad() ? t.grad() : std::vector<double>();
    std::span<double> w = t.mutable_data();
    for (std::size_t k = 0; k < w.size(); ++k) {
      if (!g.empty()) {
        m_[i][k] = beta1_ * m_[i][k] + (1.0 - beta1_) * g[k];
        v_[i][k] = beta2_ * v_[i][k] + (1.0 - beta2_) * g[k] * g[k];
      }
      w[k] -= lr * (m_[i][k] / c1) / (std::sqrt(v_[i][k] / c2) + eps_);
    }
    t.zero_grad();
  }
}

std::string EpochRecord::ToJsonLine() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["train_loss"] = train_loss;
  if (std::isfinite(val_loss)) j["val_loss"] = val_loss;
  else j["val_loss"] = nullptr;
  j["lr"] = lr;
  j["skipped_utts"] = skipped_utts;
  return j.dump();
}

std::uint64_t HashParams(const ParamList &params) {
  std::string bytes;
  for (const auto &p : params) {
    bytes += p.name;
    const auto d = p.tensor.data();
    bytes.append(reinterpret_cast<const char *>(d.data()), d.size() * sizeof(double));
  }
  return StableHash(bytes);
}

double MeanLoss(const SpeechModel &model, const Corpus &corpus, Split split,
                const ObjectiveConfig &objective) {
  const std::vector<Utterance> &utts = corpus.split(split);
  const LidVocabulary lid_vocab(corpus.vocab);
  return MeanOver(utts, [&](std::size_t i) {
    return SpeechLoss(model, corpus, utts[i], objective, &lid_vocab, {});
  });
}

TrainResult Train(SpeechModel &model, const Corpus &corpus, const TrainConfig &config,
                  const TrainObserver &observer) {
  config.Validate();
  if (corpus.dev_standard.empty()) throw ContractError("validation split is empty");
  model.Adapt(config.plan);
  if (!config.objective.lid_layers.empty()) {
    model.AttachLidHeads(config.objective.lid_layers, corpus.vocab.num_language_codes());
  }
  const LidVocabulary lid_vocab(corpus.vocab);
  PrefixCache train_cache(model, corpus.train.size());
  PrefixCache dev_cache(model, corpus.dev_standard.size());
  const bool frozen = config.plan.mode == AdaptationMode::kFrozen;
  const std::uint64_t upstream_hash = frozen ? HashParams(model.upstream().Params()) : 0;

  LoopSpec spec;
  spec.trainable = model.TrainableParams();
  spec.num_train = corpus.train.size();
  spec.loss = [&](std::size_t index, std::mt19937_64 &augment_rng) {
    const Utterance &u = corpus.train[index];
    ForwardOptions options;
    options.cached_prefix = train_cache.Get(index, u.features);
    ad::Tensor mask;
    if (config.specaugment.enabled()) {
      mask = SpecAugmentMask(u.features.rows(), model.config().upstream.input_dim,
                             config.specaugment, augment_rng);
      options.upstream_mask = &mask;
    }
    return SpeechLoss(model, corpus, u, config.objective, &lid_vocab, options);
  };
  spec.validate = [&] {
    return MeanOver(corpus.dev_standard, [&](std::size_t i) {
      const Utterance &u = corpus.dev_standard[i];
      ForwardOptions options;
      options.cached_prefix = dev_cache.Get(i, u.features);
      return SpeechLoss(model, corpus, u, config.objective, &lid_vocab, options);
    });
  };
  spec.snapshot = [&] { return model.ToCheckpoint(); };
  spec.restore = [&](const Checkpoint &ck) { Restore(ck, model.Params()); };
  if (frozen) {
    spec.after_epoch = [&] {
      if (HashParams(model.upstream().Params()) != upstream_hash) {
        throw ContractError("frozen upstream changed during training");
      }
    };
  }
  return RunLoop(spec, config, observer);
}

TrainResult PretrainUpstream(UpstreamModel &upstream, const Corpus &corpus,
                             const TrainConfig &config) {
  TrainConfig c = config;
  // Only used for validation of the shared fields; every upstream weight trains.
  c.plan = AdaptationPlan::Frozen();
  c.objective = {};
  c.Validate();
  if (corpus.dev_standard.empty()) throw ContractError("validation split is empty");
  for (const auto &p : upstream.Params()) {
    if (p.name.find(".lora_") != std::string::npos) {
      throw ContractError("pretraining expects an upstream without adapters");
    }
  }
  std::mt19937_64 head_rng = DerivedRng(config.seed, "pretrain-head");
  Linear head(upstream.config().input_dim, static_cast<std::size_t>(corpus.vocab.size()), head_rng);
  ParamList params = upstream.Params();
  head.Collect("pretrain_head", params);
  SetRequiresGrad(params, true);

  auto loss_of = [&](const Utterance &u, const ad::Tensor *mask) {
    UtteranceLoss r;
    ad::Tensor x = u.features;
    if (mask) x = ad::Mul(x, *mask);
    const ad::Tensor lp = ad::LogSoftmax(head.Forward(upstream.Forward(x).back()));
    const CtcLoss ctc = CtcForward(lp, corpus.Target(u));
    r.skipped = !ctc.achievable();
    r.loss = ctc.value;
    return r;
  };

  LoopSpec spec;
  spec.trainable = params;
  spec.num_train = corpus.train.size();
  spec.loss = [&](std::size_t index, std::mt19937_64 &augment_rng) {
    const Utterance &u = corpus.train[index];
    if (!c.specaugment.enabled()) return loss_of(u, nullptr);
    const ad::Tensor mask =
        SpecAugmentMask(u.features.rows(), u.features.cols(), c.specaugment, augment_rng);
    return loss_of(u, &mask);
  };
  spec.validate = [&] {
    return MeanOver(corpus.dev_standard,
                    [&](std::size_t i) { return loss_of(corpus.dev_standard[i], nullptr); });
  };
  spec.snapshot = [&] { return Snapshot(params); };
  spec.restore = [&](const Checkpoint &ck) { Restore(ck, params); };
  TrainResult result = RunLoop(spec, c, {});
  SetRequiresGrad(upstream.Params(), false);
  Checkpoint up = UpstreamCheckpoint(upstream);
  up.validation_loss = result.best.validation_loss;
  up.step = result.best.step;
  result.best = std::move(up);
  return result;
}

}  // namespace polyctc
