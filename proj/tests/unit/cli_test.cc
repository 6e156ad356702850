// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "polyctc/cli/commands.h"
#include "polyctc/cli/experiment.h"
#include "polyctc/cli/self_check.h"
#include "polyctc/common/errors.h"

namespace polyctc {
namespace {

namespace fs = std::filesystem;

struct Result {
  int status;
  std::string out;
  std::string err;
};

Result Cli(std::vector<std::string> args) {
  args.insert(args.begin(), "polyctc");
  std::vector<const char *> argv;
  for (const auto &a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int status = RunCli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {status, out.str(), err.str()};
}

fs::path TempDir(const std::string &name) {
  const fs::path dir = fs::temp_directory_path() / ("polyctc-cli-test-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TEST(StrategyPresetTest, ParsesModifiers) {
  const StrategyPreset p = StrategyPreset::Parse("finetune-window+lidctc+aug");
  EXPECT_EQ(p.mode, AdaptationMode::kFineTuneWindow);
  EXPECT_TRUE(p.lidctc);
  EXPECT_TRUE(p.augmentation);
  EXPECT_EQ(p.Name(), "finetune-window+lidctc+aug");
  EXPECT_EQ(StrategyPreset::Parse("lora").mode, AdaptationMode::kLowRank);
  EXPECT_THROW(StrategyPreset::Parse("frozen+lidctc"), ConfigError);
  EXPECT_THROW(StrategyPreset::Parse("frozen+dropout"), ConfigError);
  EXPECT_THROW(StrategyPreset::Parse("full"), ConfigError);
}

TEST(ExperimentConfigTest, WindowPresetWithLid) {
  ExperimentConfig c = ExperimentConfig::Default();
  c.ApplyStrategy(StrategyPreset::Parse("finetune-window+lidctc"));
  EXPECT_EQ(c.train.plan.window_first, 3u);
  EXPECT_EQ(c.train.plan.window_last, 5u);
  EXPECT_EQ(c.train.warmup_steps, 0u);
  EXPECT_EQ(c.train.objective.beta, 0.3);
  EXPECT_EQ(c.train.objective.lid_layers, (std::vector<std::size_t>{4, 5}));
  EXPECT_NO_THROW(c.train.Validate());
}

TEST(ExperimentConfigTest, JsonRoundTripAndOverlay) {
  ExperimentConfig c = ExperimentConfig::Default();
  c.SetSeed(9);
  c.ApplyStrategy(StrategyPreset::Parse("lora+aug"));
  c.pretrain_languages = {"aaa", "bbb"};
  c.eval.split = Split::kDevDialect;
  const ExperimentConfig back = ExperimentConfig::FromJson(c.ToJson(), ExperimentConfig{});
  EXPECT_EQ(back.ToJson(), c.ToJson());

  const nlohmann::json partial = {{"generation", {{"noise_sigma", 0.7}}},
                                  {"train", {{"epochs", 2}}}};
  const ExperimentConfig overlay = ExperimentConfig::FromJson(partial, c);
  EXPECT_EQ(overlay.generation.noise_sigma, 0.7);
  EXPECT_EQ(overlay.generation.languages.size(), c.generation.languages.size());
  EXPECT_EQ(overlay.train.epochs, 2u);
  EXPECT_EQ(overlay.train.plan.mode, AdaptationMode::kLowRank);
}

TEST(ExperimentConfigTest, UnknownFieldsAreNamed) {
  try {
    ExperimentConfig::FromJson({{"model", {{"upstream", {{"depth", 3}}}}}},
                               ExperimentConfig::Default());
    FAIL();
  } catch (const ConfigError &e) {
    EXPECT_NE(std::string(e.what()).find("model.upstream.depth"), std::string::npos);
  }
  try {
    ExperimentConfig::FromJson({{"pretrain", {{"lr", 1}}}}, ExperimentConfig::Default());
    FAIL();
  } catch (const ConfigError &e) {
    EXPECT_NE(std::string(e.what()).find("pretrain.lr"), std::string::npos);
  }
}

TEST(AugmentationCountsTest, FewShotDefaultsAndOverrides) {
  Corpus corpus;
  corpus.languages = {{"aaa", Tier::kNormal, ""}, {"fsa", Tier::kFewShot, ""},
                      {"fsb", Tier::kFewShot, ""}};
  AugmentationSettings s;
  s.counts = {{"fsb", 7}, {"aaa", 3}};
  const auto counts = AugmentationCounts(s, corpus);
  EXPECT_EQ(counts.at("fsa"), 100u);
  EXPECT_EQ(counts.at("fsb"), 7u);
  EXPECT_EQ(counts.at("aaa"), 3u);
}

TEST(SelfCheckTest, SuitesPass) {
  const OracleResult oracle = CtcOracleSuite(1, 100);
  EXPECT_TRUE(oracle.passed()) << oracle.max_abs_diff;
  for (const auto &target : GradientTargets()) {
    const GradientResult g = GradientSuite(target, 1, 2);
    EXPECT_EQ(g.seeds, 2u);
    EXPECT_TRUE(g.passed()) << target << " " << g.max_rel_error;
  }
  EXPECT_THROW(GradientSuite("softmax", 1, 1), ConfigError);
}

TEST(RunCliTest, UsageErrorsExitNonzero) {
  EXPECT_EQ(Cli({}).status, 2);
  const Result unknown = Cli({"frobnicate"});
  EXPECT_EQ(unknown.status, 2);
  EXPECT_FALSE(unknown.err.empty());
  EXPECT_EQ(Cli({"gradcheck", "--bogus"}).status, 2);
  EXPECT_EQ(Cli({"gen-data"}).status, 2);  // --out is required
  EXPECT_EQ(Cli({"--help"}).status, 0);
}

TEST(RunCliTest, ConfigErrorsNameTheField) {
  const fs::path dir = TempDir("config");
  std::ofstream(dir / "bad.json") << R"({"train": {"beta": 2.0, "lid_layers": [4]}})";
  const Result r = Cli({"train", "--config", (dir / "bad.json").string(), "--strategy",
                        "finetune-window", "--out", (dir / "out").string()});
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("beta"), std::string::npos) << r.err;
  const Result warm = Cli({"train", "--strategy", "lora", "--beta", "0.3", "--out",
                           (dir / "out").string()});
  EXPECT_EQ(warm.status, 2);
  EXPECT_NE(warm.err.find("lid_layers"), std::string::npos) << warm.err;
}

TEST(RunCliTest, GradcheckPrintsOracleAndExitsZero) {
  const Result r = Cli({"gradcheck", "--seed", "7", "--seeds", "2", "--instances", "50"});
  EXPECT_EQ(r.status, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("PASS ctc_oracle"), std::string::npos);
  EXPECT_NE(r.out.find("lora_attention"), std::string::npos);
}

TEST(RunCliTest, PipelineWritesArtifacts) {
  const fs::path dir = TempDir("pipeline");
  std::ofstream(dir / "exp.json") << R"({
    "generation": {"feature_dim": 12, "languages": [
      {"code": "aaa", "tier": "normal", "inventory_size": 6, "train": 12, "dev": 3},
      {"code": "bbb", "tier": "normal", "inventory_size": 6, "train": 12, "dev": 3},
      {"code": "aaa-d", "tier": "dialect", "parent": "aaa", "train": 0, "dev": 3}]},
    "model": {"upstream": {"num_layers": 6, "num_heads": 2, "ff_dim": 16},
              "downstream": {"proj_dim": 4, "hidden_dim": 8, "num_layers": 1,
                             "num_heads": 2, "ff_dim": 16}},
    "pretrain": {"epochs": 1, "steps_per_epoch": 3},
    "train": {"epochs": 2, "steps_per_epoch": 3}
  })";
  const std::string cfg = (dir / "exp.json").string();
  const std::string corpus = (dir / "corpus").string();
  ASSERT_EQ(Cli({"gen-data", "--config", cfg, "--seed", "3", "--out", corpus}).status, 0);
  EXPECT_TRUE(fs::exists(dir / "corpus" / "resolved_config.json"));
  EXPECT_TRUE(fs::exists(dir / "corpus" / "generation.json"));

  ASSERT_EQ(Cli({"pretrain", "--config", cfg, "--corpus", corpus, "--out",
                 (dir / "pre").string()}).status, 0);
  EXPECT_TRUE(fs::exists(dir / "pre" / "upstream.ckpt"));

  const Result tr = Cli({"train", "--config", cfg, "--corpus", corpus, "--upstream",
                         (dir / "pre" / "upstream.ckpt").string(), "--strategy", "lora",
                         "--out", (dir / "train").string()});
  ASSERT_EQ(tr.status, 0) << tr.err;
  std::ifstream log(dir / "train" / "train_log.jsonl");
  std::string line;
  int records = 0;
  while (std::getline(log, line)) {
    const auto j = nlohmann::json::parse(line);
    for (const char *key : {"epoch", "train_loss", "val_loss", "lr", "skipped_utts"}) {
      EXPECT_TRUE(j.contains(key)) << key;
    }
    ++records;
  }
  EXPECT_EQ(records, 2);

  const std::string ckpt = (dir / "train" / "best.ckpt").string();
  const Result ev = Cli({"eval", "--config", cfg, "--corpus", corpus, "--checkpoint", ckpt,
                         "--split", "dev-dialect", "--out", (dir / "eval").string()});
  ASSERT_EQ(ev.status, 0) << ev.err;
  const auto report = nlohmann::json::parse(ev.out);
  EXPECT_EQ(report.at("split"), "dev_dialect");
  EXPECT_TRUE(report.at("dialect_cer").is_number());
  EXPECT_TRUE(fs::exists(dir / "eval" / "report.tsv"));

  ASSERT_EQ(Cli({"decode", "--config", cfg, "--corpus", corpus, "--checkpoint", ckpt, "--out",
                 (dir / "decode").string()}).status, 0);
  std::ifstream hyps(dir / "decode" / "hypotheses.tsv");
  int rows = 0;
  while (std::getline(hyps, line)) ++rows;
  EXPECT_EQ(rows, 6);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace polyctc
