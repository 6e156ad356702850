// polyctc/cli/commands.cc
//
// SPDX-License-Identifier: Apache-2.0

#include "polyctc/cli/commands.h"

#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "polyctc/cli/experiment.h"
#include "polyctc/cli/self_check.h"
#include "polyctc/common/errors.h"
#include "polyctc/common/random.h"
#include "polyctc/eval/report.h"

namespace polyctc {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string strategy;
  std::optional<double> beta;
  std::string out;
  std::string corpus;
  std::string upstream;
  std::string checkpoint;
  std::string split;
  std::optional<std::size_t> seeds;
  std::optional<std::size_t> instances;
};

json ReadJson(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error &e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void WriteText(const fs::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

std::string Dump(const json &j) { return j.dump(2) + "\n"; }

// File values first, then flags in a fixed order: strategy, seed, beta,
// paths, split.
ExperimentConfig Resolve(const Flags &f) {
  ExperimentConfig c = ExperimentConfig::Default();
  if (!f.config.empty()) c = ExperimentConfig::FromJson(ReadJson(f.config), c);
  if (!f.strategy.empty()) c.ApplyStrategy(StrategyPreset::Parse(f.strategy));
  if (f.seed) c.SetSeed(*f.seed);
  if (f.beta) c.train.objective.beta = *f.beta;
  if (!f.corpus.empty()) c.paths.corpus = f.corpus;
  if (!f.upstream.empty()) c.paths.upstream = f.upstream;
  if (!f.checkpoint.empty()) c.paths.checkpoint = f.checkpoint;
  if (!f.split.empty()) c.eval.split = ParseSplit(f.split);
  if (f.seeds) c.gradcheck.seeds = *f.seeds;
  if (f.instances) c.gradcheck.oracle_instances = *f.instances;
  return c;
}

fs::path PrepareOut(const std::string &out, const ExperimentConfig &c) {
  fs::create_directories(out);
  WriteText(fs::path(out) / "resolved_config.json", Dump(c.ToJson()));
  return out;
}

Corpus RequireCorpus(const ExperimentConfig &c) {
  if (c.paths.corpus.empty()) throw ConfigError("paths.corpus: no corpus directory given (--corpus)");
  return LoadCorpus(c.paths.corpus);
}

std::string LogLines(const std::vector<EpochRecord> &log) {
  std::string s;
  for (const auto &r : log) s += r.ToJsonLine() + "\n";
  return s;
}

int ReportTraining(const TrainResult &r, const fs::path &ckpt, std::ostream &out,
                   std::ostream &err) {
  WriteCheckpoint(r.best, ckpt.string());
  std::ostringstream os;
  os << std::setprecision(17) << "best validation loss " << r.best.validation_loss << " at update "
     << r.best.step << " of " << r.updates;
  if (r.skipped_ctc || r.skipped_lid) {
    os << "; skipped " << r.skipped_ctc << " CTC and " << r.skipped_lid << " LID targets";
  }
  out << os.str() << "\n";
  if (r.diverged) {
    err << "error: training diverged: " << r.diagnostic << "\n";
    return 1;
  }
  return 0;
}

int GenData(const Flags &f, std::ostream &out, std::ostream &) {
  const ExperimentConfig c = Resolve(f);
  c.generation.Validate();
  const fs::path dir = PrepareOut(f.out, c);
  const Corpus corpus = GenerateCorpus(c.generation);
  SaveCorpus(corpus, dir.string());
  WriteText(dir / "generation.json", Dump(c.generation.ToJson()));
  out << "wrote " << corpus.train.size() << " train, " << corpus.dev_standard.size()
      << " dev_standard, " << corpus.dev_dialect.size() << " dev_dialect utterances to "
      << dir.string() << "\n";
  return 0;
}

int Pretrain(const Flags &f, std::ostream &out, std::ostream &err) {
  const ExperimentConfig c = Resolve(f);
  c.pretrain.Validate();
  const Corpus corpus = RequireCorpus(c);
  std::vector<std::string> codes = c.pretrain_languages;
  if (codes.empty()) codes = corpus.CodesWithTier(Tier::kNormal);
  for (const std::string &code : codes) {
    const LanguageInfo *info = corpus.FindLanguage(code);
    if (!info) throw ConfigError("pretrain.languages: '" + code + "' is not in the corpus");
    if (info->tier != Tier::kNormal) {
      throw ConfigError("pretrain.languages: '" + code + "' is " + TierName(info->tier) +
                        "; pretraining uses normal languages only");
    }
  }
  const fs::path dir = PrepareOut(f.out, c);
  UpstreamConfig shape = c.model.upstream;
  shape.input_dim = corpus.feature_dim();
  std::mt19937_64 rng = DerivedRng(c.pretrain.seed, "pretrain-upstream");
  UpstreamModel upstream(shape, rng);
  const TrainResult r = PretrainUpstream(upstream, corpus.Subset(codes), c.pretrain);
  WriteText(dir / "pretrain_log.jsonl", LogLines(r.log));
  return ReportTraining(r, dir / "upstream.ckpt", out, err);
}

int TrainCommand(const Flags &f, std::ostream &out, std::ostream &err) {
  const ExperimentConfig c = Resolve(f);
  c.train.Validate();
  Corpus corpus = RequireCorpus(c);
  if (c.strategy && c.strategy->augmentation) {
    GenerationConfig gen = c.generation;
    const fs::path stored = fs::path(c.paths.corpus) / "generation.json";
    if (fs::exists(stored)) gen = GenerationConfig::FromJson(ReadJson(stored.string()));
    corpus = AugmentCorpus(corpus, gen, AugmentationCounts(c.augmentation, corpus),
                           c.augmentation.seed);
  }
  const fs::path dir = PrepareOut(f.out, c);
  SpeechModel model(ResolveModel(c.model, corpus), c.train.seed);
  if (!c.paths.upstream.empty()) model.LoadUpstream(ReadCheckpoint(c.paths.upstream));
  const TrainResult r = Train(model, corpus, c.train);
  WriteText(dir / "train_log.jsonl", LogLines(r.log));
  return ReportTraining(r, dir / "best.ckpt", out, err);
}

SpeechModel RequireModel(const ExperimentConfig &c) {
  if (c.paths.checkpoint.empty()) {
    throw ConfigError("paths.checkpoint: no checkpoint given (--checkpoint)");
  }
  return SpeechModel::FromCheckpoint(ReadCheckpoint(c.paths.checkpoint));
}

int EvalCommand(const Flags &f, std::ostream &out, std::ostream &) {
  const ExperimentConfig c = Resolve(f);
  const Corpus corpus = RequireCorpus(c);
  const SpeechModel model = RequireModel(c);
  const fs::path dir = PrepareOut(f.out, c);
  const EvalReport report = Evaluate(model, corpus, c.eval.split, c.eval.worst_k);
  const std::string text = Dump(report.ToJson());
  WriteText(dir / c.paths.report, text);
  WriteText((dir / c.paths.report).replace_extension(".tsv"), report.ToTsv());
  out << text;
  return 0;
}

int Decode(const Flags &f, std::ostream &out, std::ostream &) {
  const ExperimentConfig c = Resolve(f);
  const Corpus corpus = RequireCorpus(c);
  const SpeechModel model = RequireModel(c);
  const fs::path dir = PrepareOut(f.out, c);
  const auto hyps = DecodeSplit(model, corpus, c.eval.split);
  WriteText(dir / "hypotheses.tsv", HypothesesTsv(hyps, corpus.vocab));
  out << "decoded " << hyps.size() << " utterances of " << SplitName(c.eval.split) << "\n";
  return 0;
}

int Gradcheck(const Flags &f, std::ostream &out, std::ostream &) {
  const ExperimentConfig c = Resolve(f);
  std::optional<fs::path> dir;
  if (!f.out.empty()) dir = PrepareOut(f.out, c);
  bool ok = true;
  nlohmann::ordered_json summary;
  std::ostringstream os;
  os << std::setprecision(3) << std::scientific;
  const OracleResult oracle = CtcOracleSuite(c.seed, c.gradcheck.oracle_instances);
  ok = ok && oracle.passed();
  os << (oracle.passed() ? "PASS" : "FAIL") << " ctc_oracle instances=" << oracle.instances
     << " max_abs_diff=" << oracle.max_abs_diff << " tol=" << kOracleTolerance << "\n";
  summary["ctc_oracle"] = {{"instances", oracle.instances},
                           {"max_abs_diff", oracle.max_abs_diff},
                           {"passed", oracle.passed()}};
  for (const std::string &target : GradientTargets()) {
    const GradientResult g = GradientSuite(target, c.seed, c.gradcheck.seeds);
    ok = ok && g.passed();
    os << (g.passed() ? "PASS" : "FAIL") << " " << target << " seeds=" << g.seeds
       << " redrawn=" << g.redrawn << " max_rel_error=" << g.max_rel_error << " tol=" << kGradientTolerance << "\n";
    summary[target] = {{"seeds", g.seeds}, {"redrawn", g.redrawn},
                       {"max_rel_error", g.max_rel_error},
                       {"passed", g.passed()}};
  }
  out << os.str();
  if (dir) WriteText(*dir / "gradcheck.json", Dump(summary));
  return ok ? 0 : 1;
}

void AddCommon(CLI::App *cmd, Flags &f, bool out_required) {
  cmd->add_option("--config", f.config, "experiment config JSON")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "run seed");
  auto *out = cmd->add_option("--out", f.out, "output directory");
  if (out_required) out->required();
}

}  // namespace

int RunCli(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
  CLI::App app{"Multilingual CTC training toolkit on synthetic corpora", "polyctc"};
  app.require_subcommand(1);
  Flags f;

  auto *gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  AddCommon(gen, f, true);

  auto *pre = app.add_subcommand("pretrain", "pretrain the upstream encoder");
  AddCommon(pre, f, true);
  pre->add_option("--corpus", f.corpus, "corpus directory");

  auto *train = app.add_subcommand("train", "train a model under an adaptation strategy");
  AddCommon(train, f, true);
  train->add_option("--corpus", f.corpus, "corpus directory");
  train->add_option("--upstream", f.upstream, "pretrained upstream checkpoint");
  train->add_option("--strategy", f.strategy,
                    "frozen | finetune-window | lora, with +lidctc and +aug modifiers");
  train->add_option("--beta", f.beta, "weight of the LID CTC term");

  auto *eval = app.add_subcommand("eval", "write a CER / LID report");
  auto *decode = app.add_subcommand("decode", "write per-utterance hypotheses");
  for (auto *cmd : {eval, decode}) {
    AddCommon(cmd, f, true);
    cmd->add_option("--corpus", f.corpus, "corpus directory");
    cmd->add_option("--checkpoint", f.checkpoint, "model checkpoint");
    cmd->add_option("--split", f.split, "train | dev-standard | dev-dialect");
  }

  auto *grad = app.add_subcommand("gradcheck", "run the CTC oracle and gradient checks");
  AddCommon(grad, f, false);
  grad->add_option("--seeds", f.seeds, "random instances per gradient target");
  grad->add_option("--instances", f.instances, "CTC oracle instances");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  const std::map<CLI::App *, std::function<int(const Flags &, std::ostream &, std::ostream &)>>
      handlers = {{gen, GenData},   {pre, Pretrain}, {train, TrainCommand},
                  {eval, EvalCommand}, {decode, Decode}, {grad, Gradcheck}};
  CLI::App *cmd = app.get_subcommands().front();
  try {
    return handlers.at(cmd)(f, out, err);
  } catch (const ConfigError &e) {
    err << "error: " << e.what() << "\n" << cmd->help();
    return 2;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace polyctc
