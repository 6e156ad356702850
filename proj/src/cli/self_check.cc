// polyctc/cli/self_check.cc
//
// SPDX-License-Identifier: Apache-2.0

#include "polyctc/cli/self_check.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

#include "polyctc/autodiff/gradcheck.h"
#include "polyctc/autodiff/ops.h"
#include "polyctc/common/errors.h"
#include "polyctc/common/random.h"
#include "polyctc/ctc/ctc.h"
#include "polyctc/model/speech_model.h"
#include "polyctc/objective/objective.h"

namespace polyctc {
namespace {

constexpr double kStep = 1e-5;
constexpr double kSmoothnessTolerance = 1e-6;

std::size_t Uniform(std::mt19937_64 &rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

ad::Tensor Gaussian(std::mt19937_64 &rng, std::size_t rows, std::size_t cols, double scale) {
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> v(rows * cols);
  for (double &x : v) x = dist(rng);
  return ad::Tensor::Matrix(rows, cols, std::move(v));
}

std::vector<int> RandomTarget(std::mt19937_64 &rng, std::size_t length, std::size_t vocab) {
  std::vector<int> y(length);
  for (int &s : y) s = static_cast<int>(Uniform(rng, 1, vocab - 1));
  return y;
}

// Three upstream layers, one-layer downstream; small enough for a
// coordinate-wise difference loop over every parameter.
ModelConfig TinyModel(std::size_t vocab) {
  ModelConfig c;
  c.upstream = {6, 3, 2, 8};
  c.downstream.proj_dim = 4;
  c.downstream.subsampling = 2;
  c.downstream.hidden_dim = 4;
  c.downstream.num_layers = 1;
  c.downstream.num_heads = 1;
  c.downstream.ff_dim = 8;
  c.downstream.vocab_size = vocab;
  return c;
}

void Perturb(const ParamList &params, const std::string &needle, std::mt19937_64 &rng,
             double scale) {
  std::normal_distribution<double> dist(0.0, scale);
  for (const auto &p : params) {
    if (p.name.find(needle) == std::string::npos) continue;
    ad::Tensor t = p.tensor;
    for (double &v : t.mutable_data()) v = dist(rng);
  }
}

using Outcome = ad::FiniteDiffResult;

void Merge(Outcome &into, const Outcome &r) {
  into.max_rel_error = std::max(into.max_rel_error, r.max_rel_error);
  into.nonsmooth += r.nonsmooth;
}

Outcome Compare(const ad::ScalarFunction &f, const ad::Tensor &x) {
  return ad::FiniteDiffCompare(f, x, kStep, kSmoothnessTolerance);
}

Outcome CheckParams(const ad::ScalarFunction &f, const ParamList &params,
                    const std::function<bool(const std::string &)> &select) {
  Outcome worst;
  for (const auto &p : params) {
    if (select(p.name)) Merge(worst, Compare(f, p.tensor));
  }
  return worst;
}

bool StartsWith(const std::string &s, const std::string &prefix) {
  return s.rfind(prefix, 0) == 0;
}

Outcome CtcLossCase(std::mt19937_64 &rng) {
  std::vector<int> y;
  std::size_t frames = 0, vocab = 0;
  do {
    frames = Uniform(rng, 3, 7);
    vocab = Uniform(rng, 2, 5);
    y = RandomTarget(rng, Uniform(rng, 1, 3), vocab);
  } while (CtcMinFrames(y) > frames);
  const ad::Tensor logits = Gaussian(rng, frames, vocab, 1.5);
  return Compare([&y](const ad::Tensor &x) { return CtcForward(ad::LogSoftmax(x), y).value; },
                 logits);
}

Outcome LidCtcLossCase(std::mt19937_64 &rng, std::uint64_t seed) {
  SpeechModel model(TinyModel(6), seed);
  model.Adapt(AdaptationPlan::FineTuneWindow(2, 3));
  const std::size_t codes = Uniform(rng, 1, 3);
  model.AttachLidHeads({2}, codes);
  const std::size_t length = Uniform(rng, 1, 3);
  const std::vector<int> target(length, static_cast<int>(Uniform(rng, 1, codes)));
  const ad::Tensor z = Gaussian(rng, 2 * length + Uniform(rng, 0, 4), 6, 1.0);
  auto f = [&](const ad::Tensor &) { return LidCtcLoss(model, 2, z, target).value; };
  Outcome worst =
      Compare([&](const ad::Tensor &x) { return LidCtcLoss(model, 2, x, target).value; }, z);
  Merge(worst, CheckParams(f, model.TrainableParams(),
                           [](const std::string &n) { return StartsWith(n, "lid."); }));
  return worst;
}

// Joint target of random tokens behind a language code, and its LID target.
struct Labels {
  std::vector<int> joint;
  std::vector<int> lid;
};

Labels RandomLabels(std::mt19937_64 &rng, std::size_t codes, std::size_t vocab) {
  Labels l;
  const int code = static_cast<int>(Uniform(rng, 1, codes));
  l.joint.push_back(code);
  for (std::size_t i = Uniform(rng, 1, 2); i > 0; --i) {
    l.joint.push_back(static_cast<int>(Uniform(rng, codes + 1, vocab - 1)));
  }
  l.lid.assign(l.joint.size(), code);
  return l;
}

ad::Tensor ModelLoss(const SpeechModel &model, const ad::Tensor &x, const Labels &labels,
                     double beta) {
  const auto out = model.Forward(x);
  std::vector<ad::Tensor> lids;
  for (const auto &[layer, head] : model.lid_heads()) {
    lids.push_back(LidCtcLoss(model, layer, out.layer_outputs[layer - 1], labels.lid).value);
  }
  return CombinedLoss(CtcForward(out.log_probs, labels.joint).value, lids, beta);
}

Outcome CombinedLossCase(std::mt19937_64 &rng, std::uint64_t seed) {
  SpeechModel model(TinyModel(6), seed);
  model.Adapt(AdaptationPlan::FineTuneWindow(2, 3));
  model.AttachLidHeads({2, 3}, 2);
  const Labels labels = RandomLabels(rng, 2, 6);
  const double beta = std::uniform_real_distribution<double>(0.05, 0.95)(rng);
  const ad::Tensor x = Gaussian(rng, 12, 6, 1.0);
  auto f = [&](const ad::Tensor &) { return ModelLoss(model, x, labels, beta); };
  return CheckParams(f, model.TrainableParams(), [](const std::string &n) {
    return StartsWith(n, "lid.") || n.find("layer3.ff") != std::string::npos ||
           StartsWith(n, "downstream.head");
  });
}

Outcome FeaturizerCase(std::mt19937_64 &rng, std::uint64_t seed) {
  SpeechModel model(TinyModel(6), seed);
  model.Adapt(AdaptationPlan::Frozen());
  Perturb(model.TrainableParams(), "featurizer", rng, 1.0);
  const Labels labels = RandomLabels(rng, 2, 6);
  const ad::Tensor x = Gaussian(rng, 10, 6, 1.0);
  auto f = [&](const ad::Tensor &) { return ModelLoss(model, x, labels, 0.0); };
  return Compare(f, model.featurizer().raw_weights());
}

Outcome DownstreamCase(std::mt19937_64 &rng, std::uint64_t seed) {
  SpeechModel model(TinyModel(6), seed);
  model.Adapt(AdaptationPlan::Frozen());
  const Labels labels = RandomLabels(rng, 2, 6);
  const ad::Tensor x = Gaussian(rng, 9, 6, 1.0);
  auto f = [&](const ad::Tensor &) { return ModelLoss(model, x, labels, 0.0); };
  return CheckParams(f, model.downstream().Params(), [](const std::string &) { return true; });
}

Outcome LowRankCase(std::mt19937_64 &rng, std::uint64_t seed) {
  SpeechModel model(TinyModel(6), seed);
  model.Adapt(AdaptationPlan::LowRank(2, 4.0));
  // Nonzero B so that the gradient of A is exercised too.
  Perturb(model.upstream().Params(), ".lora_b", rng, 0.3);
  const Labels labels = RandomLabels(rng, 2, 6);
  const ad::Tensor x = Gaussian(rng, 8, 6, 1.0);
  auto f = [&](const ad::Tensor &) { return ModelLoss(model, x, labels, 0.0); };
  return CheckParams(f, model.upstream().Params(), [](const std::string &n) {
    return n.find(".lora_") != std::string::npos;
  });
}

constexpr std::size_t kMaxDrawsPerSeed = 4;

}  // namespace

OracleResult CtcOracleSuite(std::uint64_t seed, std::size_t instances) {
  std::mt19937_64 rng = DerivedRng(seed, "ctc-oracle");
  OracleResult r;
  r.instances = instances;
  for (std::size_t i = 0; i < instances; ++i) {
    const std::size_t frames = Uniform(rng, 1, 6);
    const std::size_t vocab = Uniform(rng, 2, 4);
    const std::vector<int> y = RandomTarget(rng, Uniform(rng, 1, 3), vocab);
    const ad::Tensor log_probs = ad::LogSoftmax(Gaussian(rng, frames, vocab, 1.5));
    const CtcLoss loss = CtcForward(log_probs, y);
    if (!loss.achievable()) ++r.unachievable;
    const double diff = std::abs(std::exp(-loss.value.item()) - CtcBruteForce(log_probs, y));
    r.max_abs_diff = std::max(r.max_abs_diff, diff);
  }
  return r;
}

const std::vector<std::string> &GradientTargets() {
  static const std::vector<std::string> targets = {
      "ctc_loss", "lid_ctc_loss", "combined_loss", "featurizer", "downstream", "lora_attention"};
  return targets;
}

GradientResult GradientSuite(const std::string &target, std::uint64_t seed, std::size_t seeds) {
  using Case = std::function<Outcome(std::mt19937_64 &, std::uint64_t)>;
  static const std::map<std::string, Case> cases = {
      {"ctc_loss", [](std::mt19937_64 &rng, std::uint64_t) { return CtcLossCase(rng); }},
      {"lid_ctc_loss", LidCtcLossCase},
      {"combined_loss", CombinedLossCase},
      {"featurizer", FeaturizerCase},
      {"downstream", DownstreamCase},
      {"lora_attention", LowRankCase},
  };
  auto it = cases.find(target);
  if (it == cases.end()) throw ConfigError("gradcheck: unknown target '" + target + "'");
  GradientResult r;
  r.target = target;
  r.seeds = seeds;
  std::size_t checked = 0;
  for (std::size_t i = 0; checked < seeds; ++i) {
    if (i >= kMaxDrawsPerSeed * seeds) {
      throw NumericError("gradcheck: " + target + " found only " + std::to_string(checked) +
                         " smooth instances");
    }
    const std::uint64_t instance = seed * 1000 + i;
    std::mt19937_64 rng = DerivedRng(instance, "gradcheck/" + target);
    const Outcome o = it->second(rng, instance);
    if (o.nonsmooth > 0) {
      ++r.redrawn;
      continue;
    }
    r.max_rel_error = std::max(r.max_rel_error, o.max_rel_error);
    ++checked;
  }
  return r;
}

}  // namespace polyctc
