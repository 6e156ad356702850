// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any selected criterion fails. `--only N` runs one criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "polyctc/autodiff/tape.h"
#include "polyctc/cli/self_check.h"
#include "polyctc/common/errors.h"
#include "polyctc/common/random.h"
#include "polyctc/data/corpus.h"
#include "polyctc/data/generation.h"
#include "polyctc/eval/report.h"
#include "polyctc/model/checkpoint.h"
#include "polyctc/objective/objective.h"
#include "polyctc/train/trainer.h"

namespace polyctc {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool passed = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string Format(const char *fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

fs::path ScratchDir(const std::string &name) {
  const fs::path dir = fs::temp_directory_path() / ("polyctc-acceptance-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string ReadBytes(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Relative path -> bytes for every regular file under dir.
std::map<std::string, std::string> Snapshot(const fs::path &dir) {
  std::map<std::string, std::string> files;
  for (const auto &e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = ReadBytes(e.path());
  }
  return files;
}

// ---- desk-scale setup shared by the end-to-end criteria ------------------

constexpr std::size_t kDim = 32;
constexpr std::uint64_t kEmissionSeed = 100;
// Dialect emission shift for the regularization trend; the generator default
// (half the noise level) leaves dialect CER at the standard-set level.
constexpr double kDialectShift = 1.0;
const std::vector<std::string> kPretrainCodes = {"aaa", "bbb", "ccc", "ddd", "eee"};

GenerationConfig BaseGeneration(std::uint64_t seed) {
  GenerationConfig g;
  g.feature_dim = kDim;
  g.noise_sigma = 0.5;
  g.token_pool = 30;
  g.seed = seed;
  g.emission_seed = kEmissionSeed;
  return g;
}

LanguageConfig Normal(const std::string &code, std::size_t train, std::size_t dev) {
  return {code, Tier::kNormal, "", {}, 12, train, dev};
}

UpstreamConfig UpstreamShape() { return {kDim, 6, 4, 4 * kDim}; }

ModelConfig ModelFor(const Corpus &corpus) {
  ModelConfig m;
  m.upstream = UpstreamShape();
  m.downstream.proj_dim = 32;
  m.downstream.subsampling = 2;
  m.downstream.hidden_dim = 64;
  m.downstream.num_layers = 2;
  m.downstream.num_heads = 4;
  m.downstream.ff_dim = 128;
  m.downstream.vocab_size = static_cast<std::size_t>(corpus.vocab.size());
  return m;
}

TrainConfig Recipe(std::uint64_t seed, std::size_t steps_per_epoch) {
  TrainConfig c;
  c.epochs = 4;
  c.steps_per_epoch = steps_per_epoch;
  c.batch_size = 8;
  c.accumulation_every = 1;
  c.peak_lr = 2e-3;
  c.warmup_steps = 50;
  c.seed = seed;
  return c;
}

// Upstream pretrained on 5 normal languages x 200 utterances.
const TrainResult &PretrainedUpstream() {
  static const TrainResult result = [] {
    GenerationConfig g = BaseGeneration(1);
    for (const auto &code : kPretrainCodes) g.languages.push_back(Normal(code, 200, 20));
    const Corpus corpus = GenerateCorpus(g);
    std::mt19937_64 rng = DerivedRng(1, "pretrain-upstream");
    UpstreamModel upstream(UpstreamShape(), rng);
    return PretrainUpstream(upstream, corpus, Recipe(1, 125));
  }();
  return result;
}

// ---- criteria ------------------------------------------------------------

Outcome CtcOracle() {
  const Stopwatch clock;
  const OracleResult r = CtcOracleSuite(2024, 600);
  const double t = clock.seconds();
  return {r.passed() && r.instances >= 500 && t < 30.0,
          Format("%zu instances (%zu unachievable), max |exp(-loss) - enumeration| = %.3e "
                 "(tol 1e-9), %.1fs (limit 30s)",
                 r.instances, r.unachievable, r.max_abs_diff, t)};
}

Outcome Gradients() {
  const Stopwatch clock;
  bool ok = true;
  std::string detail;
  for (const std::string &target : GradientTargets()) {
    const GradientResult r = GradientSuite(target, 11, 50);
    ok = ok && r.passed() && r.seeds >= 50;
    detail += Format("%s %.2e (%zu redrawn); ", target.c_str(), r.max_rel_error, r.redrawn);
  }
  const double t = clock.seconds();
  ok = ok && t < 300.0;
  return {ok, detail + Format("tol 1e-5, 50 seeds each, %.1fs (limit 300s)", t)};
}

Corpus SmallCorpus(std::uint64_t seed) {
  GenerationConfig g = BaseGeneration(seed);
  g.feature_dim = 16;
  g.languages = {Normal("aaa", 40, 8), Normal("bbb", 40, 8)};
  return GenerateCorpus(g);
}

ModelConfig SmallModel(const Corpus &corpus) {
  ModelConfig m;
  m.upstream = {16, 6, 2, 32};
  m.downstream.proj_dim = 8;
  m.downstream.hidden_dim = 16;
  m.downstream.num_layers = 1;
  m.downstream.num_heads = 2;
  m.downstream.ff_dim = 32;
  m.downstream.vocab_size = static_cast<std::size_t>(corpus.vocab.size());
  return m;
}

// Names of upstream entries whose values differ between two checkpoints.
std::vector<std::string> Changed(const Checkpoint &before, const Checkpoint &after,
                                 const std::function<bool(const std::string &)> &select) {
  std::vector<std::string> changed;
  for (const auto &e : before.entries) {
    if (!select(e.name)) continue;
    const CheckpointEntry *a = after.Find(e.name);
    if (!a || a->values != e.values) changed.push_back(e.name);
  }
  return changed;
}

bool IsBaseUpstream(const std::string &name) {
  return name.rfind("upstream.", 0) == 0 && name.find(".lora_") == std::string::npos;
}

bool InLayers(const std::string &name, std::size_t first, std::size_t last) {
  for (std::size_t l = first; l <= last; ++l) {
    if (name.rfind("upstream.layer" + std::to_string(l) + ".", 0) == 0) return true;
  }
  return false;
}

Outcome AdaptationInvariants() {
  const Corpus corpus = SmallCorpus(3);
  TrainConfig c = Recipe(5, 100);
  c.epochs = 1;
  c.warmup_steps = 0;
  std::string detail;
  bool ok = true;

  struct Case {
    std::string name;
    AdaptationPlan plan;
    std::function<bool(const std::string &)> frozen;
  };
  const std::vector<Case> cases = {
      {"frozen", AdaptationPlan::Frozen(), IsBaseUpstream},
      {"window 3-5", AdaptationPlan::FineTuneWindow(3, 5),
       [](const std::string &n) { return IsBaseUpstream(n) && !InLayers(n, 3, 5); }},
      {"lora", AdaptationPlan::LowRank(2, 4.0), IsBaseUpstream},
  };
  for (const Case &k : cases) {
    SpeechModel model(SmallModel(corpus), 9);
    model.Adapt(k.plan);
    const Checkpoint before = model.ToCheckpoint();
    c.plan = k.plan;
    const TrainResult r = Train(model, corpus, c);
    const Checkpoint after = model.ToCheckpoint();
    const auto frozen_changed = Changed(before, after, k.frozen);
    const auto trained_changed =
        Changed(before, after, [&](const std::string &n) { return !k.frozen(n); });
    const bool case_ok = r.updates == 100 && frozen_changed.empty() && !trained_changed.empty();
    ok = ok && case_ok;
    detail += Format("%s: %zu updates, %zu frozen tensors changed, %zu trainable changed; ",
                     k.name.c_str(), r.updates, frozen_changed.size(), trained_changed.size());
  }

  ad::NoGradScope no_grad;
  const Corpus big = SmallCorpus(4);
  SpeechModel base(SmallModel(big), 21);
  SpeechModel adapted(SmallModel(big), 21);
  adapted.Adapt(AdaptationPlan::LowRank(4, 8.0));
  std::mt19937_64 rng(22);
  std::normal_distribution<double> dist(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t frames = 4 + static_cast<std::size_t>(i % 9);
    std::vector<double> v(frames * 16);
    for (double &x : v) x = dist(rng);
    const ad::Tensor x = ad::Tensor::Matrix(frames, 16, std::move(v));
    const auto a = base.upstream().Forward(x);
    const auto b = adapted.upstream().Forward(x);
    for (std::size_t l = 0; l < a.size(); ++l) {
      for (std::size_t k = 0; k < a[l].size(); ++k) {
        worst = std::max(worst, std::abs(a[l][k] - b[l][k]));
      }
    }
  }
  ok = ok && worst == 0.0;
  detail += Format("adapters at init on 1000 inputs: max abs diff %.3e (must be 0)", worst);
  return {ok, detail};
}

Outcome Eq7Arithmetic() {
  const ad::Tensor lids[] = {ad::Tensor::Scalar(2.0), ad::Tensor::Scalar(4.0)};
  const double combined = CombinedLoss(ad::Tensor::Scalar(1.0), lids, 0.3).item();
  const bool exact = combined == 1.6;

  const Corpus corpus = SmallCorpus(6);
  TrainConfig c = Recipe(8, 30);
  c.epochs = 2;
  c.warmup_steps = 0;
  c.plan = AdaptationPlan::FineTuneWindow(3, 5);
  SpeechModel plain(SmallModel(corpus), 12);
  const TrainResult a = Train(plain, corpus, c);
  c.objective.lid_layers = {4, 5};
  c.objective.beta = 0.0;
  SpeechModel with_heads(SmallModel(corpus), 12);
  const TrainResult b = Train(with_heads, corpus, c);

  const Checkpoint ca = plain.ToCheckpoint(), cb = with_heads.ToCheckpoint();
  std::size_t compared = 0, differing = 0;
  for (const auto &e : ca.entries) {
    if (e.name.rfind("meta.lid", 0) == 0) continue;
    ++compared;
    const CheckpointEntry *o = cb.Find(e.name);
    if (!o || o->values != e.values) ++differing;
  }
  bool logs_equal = a.log.size() == b.log.size();
  for (std::size_t i = 0; logs_equal && i < a.log.size(); ++i) {
    logs_equal = a.log[i].train_loss == b.log[i].train_loss &&
                 a.log[i].val_loss == b.log[i].val_loss;
  }
  return {exact && differing == 0 && logs_equal && compared > 0,
          Format("combined(1.0, {2.0, 4.0}, beta 0.3) = %.15g (exactly 1.6: %s); beta 0 with "
                 "LID heads vs no LID: %zu of %zu entries differ, logs %s",
                 combined, exact ? "yes" : "no", differing, compared,
                 logs_equal ? "identical" : "differ")};
}

Outcome EndToEnd() {
  const Stopwatch clock;
  const TrainResult &pre = PretrainedUpstream();
  GenerationConfig g = BaseGeneration(2);
  for (const auto &code : kPretrainCodes) g.languages.push_back(Normal(code, 100, 30));
  g.languages.push_back(Normal("fff", 100, 30));
  g.languages.push_back(Normal("ggg", 100, 30));
  const Corpus corpus = GenerateCorpus(g);
  SpeechModel model(ModelFor(corpus), 3);
  model.LoadUpstream(pre.best);
  const TrainResult r = Train(model, corpus, Recipe(3, 100));
  const EvalReport rep = Evaluate(model, corpus, Split::kDevStandard, kReferenceWorstK);

  SpeechModel scratch(ModelFor(corpus), 3);
  Train(scratch, corpus, Recipe(3, 100));
  const double scratch_cer = Evaluate(scratch, corpus, Split::kDevStandard, 3).cer;
  const double t = clock.seconds();
  return {!r.diverged && rep.cer <= 0.10 && rep.lid_accuracy >= 0.95 && t <= 900.0,
          Format("7 languages, dev_standard CER %.2f%% (limit 10%%), LID %.2f%% (min 95%%), "
                 "%.0fs incl. a random-init comparison run (limit 900s); random-init CER %.2f%%",
                 100 * rep.cer, 100 * rep.lid_accuracy, t, 100 * scratch_cer)};
}

Outcome Augmentation() {
  const TrainResult &pre = PretrainedUpstream();
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    GenerationConfig g = BaseGeneration(10 + seed);
    for (const auto &code : kPretrainCodes) g.languages.push_back(Normal(code, 100, 30));
    for (const char *code : {"fsa", "fsb", "fsc"}) {
      g.languages.push_back({code, Tier::kFewShot, "", {}, 12, 5, 30});
    }
    const Corpus base = GenerateCorpus(g);
    const Corpus augmented =
        AugmentCorpus(base, g, {{"fsa", 100}, {"fsb", 100}, {"fsc", 100}}, 1000 + seed);
    double cer[2], lid[2];
    const Corpus *corpora[2] = {&base, &augmented};
    for (int arm = 0; arm < 2; ++arm) {
      SpeechModel model(ModelFor(base), seed);
      model.LoadUpstream(pre.best);
      Train(model, *corpora[arm], Recipe(seed, 100));
      const EvalReport rep = Evaluate(model, base, Split::kDevStandard, 3);
      cer[arm] = *rep.few_shot_cer;
      lid[arm] = *rep.few_shot_lid_accuracy;
    }
    const bool win = lid[1] - lid[0] >= 0.20 && cer[1] < cer[0];
    wins += win;
    detail += Format("seed %llu LID %.1f->%.1f CER %.1f->%.1f%s; ",
                     static_cast<unsigned long long>(seed), 100 * lid[0], 100 * lid[1],
                     100 * cer[0], 100 * cer[1], win ? "" : " (miss)");
  }
  return {wins >= 4, detail + Format("%d/5 seeds (need 4)", wins)};
}

Outcome LidRegularization() {
  const TrainResult &pre = PretrainedUpstream();
  const WindowPreset toy = ToyWindowPreset();
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    GenerationConfig g = BaseGeneration(10 + seed);
    g.dialect_scale = kDialectShift;
    for (const auto &code : kPretrainCodes) g.languages.push_back(Normal(code, 100, 30));
    for (const char *parent : {"aaa", "bbb"}) {
      g.languages.push_back({std::string(parent) + "-d", Tier::kDialect, parent, {}, 0, 0, 30});
    }
    const Corpus corpus = GenerateCorpus(g);
    double cer[2];
    for (int arm = 0; arm < 2; ++arm) {
      TrainConfig c = Recipe(seed, 100);
      c.warmup_steps = 0;
      c.plan = AdaptationPlan::FineTuneWindow(toy.window_first, toy.window_last);
      c.objective.lid_layers = toy.lid_layers;
      c.objective.beta = arm ? 0.3 : 0.0;
      SpeechModel model(ModelFor(corpus), seed);
      model.LoadUpstream(pre.best);
      Train(model, corpus, c);
      cer[arm] = Evaluate(model, corpus, Split::kDevDialect, 3).cer;
    }
    const bool win = cer[1] <= cer[0];
    wins += win;
    detail += Format("seed %llu %.2f->%.2f%s; ", static_cast<unsigned long long>(seed),
                     100 * cer[0], 100 * cer[1], win ? "" : " (miss)");
  }
  return {wins >= 3, "dialect CER without->with LID CTC: " + detail +
                         Format("%d/5 seeds (need 3)", wins)};
}

Outcome RoundTrips() {
  std::string detail;
  bool ok = true;
  const fs::path dir = ScratchDir("roundtrip");
  GenerationConfig g = BaseGeneration(31);
  g.feature_dim = 12;
  g.languages = {Normal("aaa", 6, 3), Normal("bbb", 6, 3),
                 {"fsa", Tier::kFewShot, "", {}, 8, 2, 2},
                 {"aaa-d", Tier::kDialect, "aaa", {}, 0, 0, 2}};
  const Corpus corpus = GenerateCorpus(g);
  SaveCorpus(corpus, (dir / "a").string());
  const Corpus loaded = LoadCorpus((dir / "a").string());
  SaveCorpus(loaded, (dir / "b").string());
  bool same = Snapshot(dir / "a") == Snapshot(dir / "b");
  for (Split s : {Split::kTrain, Split::kDevStandard, Split::kDevDialect}) {
    const auto &x = corpus.split(s), &y = loaded.split(s);
    same = same && x.size() == y.size();
    for (std::size_t i = 0; same && i < x.size(); ++i) {
      same = x[i].id == y[i].id && x[i].language == y[i].language &&
             x[i].transcript == y[i].transcript && x[i].features.shape() == y[i].features.shape();
      for (std::size_t k = 0; same && k < x[i].features.size(); ++k) {
        same = x[i].features[k] == y[i].features[k];
      }
    }
  }
  ok = ok && same;
  detail += Format("corpus %s; ", same ? "lossless" : "differs");

  ModelConfig m = SmallModel(corpus);
  m.upstream.input_dim = 12;
  SpeechModel model(m, 32);
  model.Adapt(AdaptationPlan::LowRank(2, 4.0));
  Checkpoint ck = model.ToCheckpoint();
  ck.validation_loss = 1.25;
  ck.step = 77;
  WriteCheckpoint(ck, (dir / "a.ckpt").string());
  const Checkpoint back = ReadCheckpoint((dir / "a.ckpt").string());
  WriteCheckpoint(back, (dir / "b.ckpt").string());
  const bool ck_same = back.entries == ck.entries && back.validation_loss == 1.25 &&
                       back.step == 77 &&
                       ReadBytes(dir / "a.ckpt") == ReadBytes(dir / "b.ckpt");
  ok = ok && ck_same;
  detail += Format("checkpoint %s; ", ck_same ? "lossless" : "differs");

  auto corrupt = [](const fs::path &path) {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.put('X');
  };
  auto rejects = [](const std::function<void()> &load) {
    try {
      load();
    } catch (const FormatError &) {
      return true;
    } catch (...) {
      return false;
    }
    return false;
  };
  corrupt(dir / "b.ckpt");
  const bool ck_rejected = rejects([&] { ReadCheckpoint((dir / "b.ckpt").string()); });
  const fs::path feats = dir / "b" / "feats" / (corpus.train.front().id + ".mlft");
  corrupt(feats);
  const bool feat_rejected = rejects([&] { ReadFeatures(feats.string()); }) &&
                             rejects([&] { LoadCorpus((dir / "b").string()); });
  ok = ok && ck_rejected && feat_rejected;
  detail += Format("corrupt magic rejected with format error: checkpoint %s, features %s",
                   ck_rejected ? "yes" : "no", feat_rejected ? "yes" : "no");
  fs::remove_all(dir);
  return {ok, detail};
}

int Run(const std::string &cli, const std::vector<std::string> &args, const fs::path &log) {
  std::string cmd = "\"" + cli + "\"";
  for (const auto &a : args) cmd += " \"" + a + "\"";
  cmd += " > \"" + log.string() + "\" 2>&1";
  return std::system(cmd.c_str());
}

Outcome CliDeterminism(const std::string &cli) {
  const fs::path root = ScratchDir("cli");
  const fs::path config = root / "config.json";
  std::ofstream(config) << R"({
  "generation": {
    "feature_dim": 16,
    "languages": [
      {"code": "aaa", "tier": "normal", "inventory_size": 8, "train": 30, "dev": 6},
      {"code": "bbb", "tier": "normal", "inventory_size": 8, "train": 30, "dev": 6},
      {"code": "fsa", "tier": "few_shot", "inventory_size": 8, "train": 5, "dev": 6},
      {"code": "aaa-d", "tier": "dialect", "parent": "aaa", "train": 0, "dev": 6}
    ]
  },
  "model": {"upstream": {"num_layers": 6, "num_heads": 2, "ff_dim": 32},
            "downstream": {"proj_dim": 8, "hidden_dim": 16, "num_layers": 1,
                           "num_heads": 2, "ff_dim": 32}},
  "pretrain": {"epochs": 2, "steps_per_epoch": 10},
  "train": {"epochs": 2, "steps_per_epoch": 10,
            "specaugment": {"time_masks": 1, "time_width": 2,
                            "feature_masks": 1, "feature_width": 2}},
  "augmentation": {"per_language": 10},
  "gradcheck": {"oracle_instances": 100, "seeds": 3}
})";
  struct Step {
    std::string name;
    std::vector<std::string> args;
  };
  std::vector<std::string> lines;
  bool ok = true;
  for (int run = 0; run < 2; ++run) {
    // Same paths both times, since resolved configs record them.
    const fs::path out = root / "run";
    const std::string c = config.string(), o = out.string();
    const std::vector<Step> steps = {
        {"gen-data", {"gen-data", "--config", c, "--seed", "5", "--out", o + "/corpus"}},
        {"pretrain",
         {"pretrain", "--config", c, "--seed", "5", "--corpus", o + "/corpus", "--out",
          o + "/pretrain"}},
        {"train",
         {"train", "--config", c, "--seed", "5", "--corpus", o + "/corpus", "--upstream",
          o + "/pretrain/upstream.ckpt", "--strategy", "finetune-window+lidctc+aug", "--out",
          o + "/train"}},
        {"eval",
         {"eval", "--config", c, "--corpus", o + "/corpus", "--checkpoint",
          o + "/train/best.ckpt", "--split", "dev-dialect", "--out", o + "/eval"}},
        {"decode",
         {"decode", "--config", c, "--corpus", o + "/corpus", "--checkpoint",
          o + "/train/best.ckpt", "--out", o + "/decode"}},
        {"gradcheck", {"gradcheck", "--config", c, "--seed", "5", "--out", o + "/gradcheck"}},
    };
    for (const Step &s : steps) {
      const int status = Run(cli, s.args, root / ("run" + std::to_string(run) + "-" + s.name + ".log"));
      if (status != 0) {
        ok = false;
        lines.push_back(s.name + " exited with status " + std::to_string(status));
      }
    }
    fs::rename(out, root / ("run" + std::to_string(run)));
  }
  std::size_t compared = 0;
  for (const char *sub : {"corpus", "pretrain", "train", "eval", "decode", "gradcheck"}) {
    const fs::path a = root / "run0" / sub, b = root / "run1" / sub;
    if (!fs::exists(a) || !fs::exists(b)) {
      ok = false;
      lines.push_back(std::string(sub) + " produced no output");
      continue;
    }
    const auto fa = Snapshot(a), fb = Snapshot(b);
    compared += fa.size();
    if (fa != fb) {
      ok = false;
      lines.push_back(std::string(sub) + " outputs differ");
    }
  }
  std::string detail = Format("6 subcommands run twice, %zu files compared byte for byte", compared);
  for (const auto &l : lines) detail += "; " + l;
  if (ok) fs::remove_all(root);
  return {ok, detail};
}

}  // namespace
}  // namespace polyctc

int main(int argc, char **argv) {
  using namespace polyctc;
  CLI::App app{"acceptance criteria"};
  int only = 0;
  std::string cli = POLYCTC_CLI_PATH;
  app.add_option("--only", only, "run a single criterion (1-9)")->check(CLI::Range(1, 9));
  app.add_option("--cli", cli, "command-line tool used by the determinism criterion");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"ctc oracle equivalence", CtcOracle},
      {"gradient correctness", Gradients},
      {"adaptation-plan invariants", AdaptationInvariants},
      {"combined objective arithmetic", Eq7Arithmetic},
      {"end-to-end toy convergence", EndToEnd},
      {"augmentation trend", Augmentation},
      {"LID CTC regularization trend", LidRegularization},
      {"format round trips", RoundTrips},
      {"CLI determinism", [&] { return CliDeterminism(cli); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only && static_cast<std::size_t>(only) != i + 1) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.passed;
    std::printf("%s C%zu %s: %s\n", o.passed ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failures ? 1 : 0;
}
