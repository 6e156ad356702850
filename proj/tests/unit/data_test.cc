// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <set>
#include <string>

#include <unistd.h>

#include <gtest/gtest.h>

#include "polyctc/common/errors.h"
#include "polyctc/ctc/ctc.h"
#include "polyctc/data/corpus.h"
#include "polyctc/data/generation.h"
#include "polyctc/data/spec_augment.h"
#include "test_util.h"

namespace polyctc {
namespace {

namespace fs = std::filesystem;

GenerationConfig SmallGeneration() {
  GenerationConfig c;
  c.feature_dim = 8;
  c.seed = 11;
  c.token_pool = 12;
  c.languages = {
      {"eng", Tier::kNormal, "", {}, 6, 20, 4},
      {"fra", Tier::kNormal, "", {}, 6, 20, 4},
      {"swa", Tier::kFewShot, "", {}, 5, 5, 3},
      {"eng-x", Tier::kDialect, "eng", {}, 0, 0, 3},
  };
  return c;
}

std::string ReadBytes(const fs::path &path) {
  std::ifstream is(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

bool SameFeatures(const ad::Tensor &a, const ad::Tensor &b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

bool SameUtterances(const std::vector<Utterance> &a, const std::vector<Utterance> &b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].id != b[i].id || a[i].language != b[i].language ||
        a[i].transcript != b[i].transcript || !SameFeatures(a[i].features, b[i].features)) {
      return false;
    }
  }
  return true;
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto *info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() /
           ("polyctc_data_" + std::to_string(::getpid()) + "_" + info->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

TEST(GenerationTest, TierCountsAddUp) {
  GenerationConfig c;
  c.feature_dim = 8;
  c.token_pool = 20;
  for (const char *code : {"aaa", "bbb", "ccc", "ddd", "eee"}) {
    c.languages.push_back({code, Tier::kNormal, "", {}, 8, 200, 0});
  }
  for (const char *code : {"fff", "ggg", "hhh"}) {
    c.languages.push_back({code, Tier::kFewShot, "", {}, 8, 5, 0});
  }
  const Corpus corpus = GenerateCorpus(c);
  EXPECT_EQ(corpus.train.size(), 1015u);
  for (const char *code : {"fff", "ggg", "hhh"}) {
    EXPECT_EQ(std::count_if(corpus.train.begin(), corpus.train.end(),
                            [&](const Utterance &u) { return u.language == code; }),
              static_cast<long>(kFewShotCap));
  }
}

TEST(GenerationTest, TargetsAreAchievableAfterSubsampling) {
  const Corpus corpus = GenerateCorpus(SmallGeneration());
  for (const auto *split : {&corpus.train, &corpus.dev_standard, &corpus.dev_dialect}) {
    for (const Utterance &u : *split) {
      const std::vector<int> y = corpus.Target(u);
      const std::size_t frames = (u.features.rows() - 1) / 2 + 1;
      EXPECT_GE(frames, 2 * y.size() - 1) << u.id;
      EXPECT_GE(frames, CtcMinFrames(y)) << u.id;
      EXPECT_TRUE(corpus.vocab.is_language_code(y.front()));
      for (std::size_t i = 1; i < y.size(); ++i) EXPECT_FALSE(corpus.vocab.is_language_code(y[i]));
      EXPECT_GE(u.transcript.size(), 3u);
      EXPECT_LE(u.transcript.size(), 12u);
    }
  }
}

TEST(GenerationTest, DialectsAreEvaluationOnlyWithParentInventory) {
  const GenerationConfig c = SmallGeneration();
  const Corpus corpus = GenerateCorpus(c);
  ASSERT_EQ(corpus.dev_dialect.size(), 3u);
  EXPECT_FALSE(corpus.vocab.contains("eng-x"));
  const LanguageModel parent = BuildLanguageModel(c, "eng");
  const LanguageModel dialect = BuildLanguageModel(c, "eng-x");
  EXPECT_EQ(parent.inventory, dialect.inventory);
  EXPECT_NE(parent.offset, dialect.offset);
  for (const Utterance &u : corpus.dev_dialect) {
    EXPECT_EQ(u.language, "eng");
    EXPECT_EQ(u.id.rfind("eng-x_", 0), 0u);
    for (const auto &t : u.transcript) {
      EXPECT_NE(std::find(parent.inventory.begin(), parent.inventory.end(), t),
                parent.inventory.end());
    }
  }
  for (const Utterance &u : corpus.train) EXPECT_EQ(u.id.find("eng-x"), std::string::npos);
}

TEST(GenerationTest, LanguagesDrawIndependently) {
  GenerationConfig c = SmallGeneration();
  const Corpus before = GenerateCorpus(c);
  c.languages.insert(c.languages.begin() + 1, {"deu", Tier::kNormal, "", {}, 6, 10, 2});
  const Corpus after = GenerateCorpus(c);
  auto of = [](const Corpus &k, const std::string &code) {
    std::vector<Utterance> out;
    for (const auto &u : k.train) {
      if (u.language == code) out.push_back(u);
    }
    return out;
  };
  EXPECT_TRUE(SameUtterances(of(before, "fra"), of(after, "fra")));
  EXPECT_TRUE(SameUtterances(of(before, "swa"), of(after, "swa")));
}

TEST(GenerationTest, ConfigErrorsNameTheField) {
  GenerationConfig c = SmallGeneration();
  c.languages[2].train = 6;
  try {
    c.Validate();
    FAIL();
  } catch (const ConfigError &e) {
    EXPECT_NE(std::string(e.what()).find("languages[2].train"), std::string::npos);
  }
  nlohmann::json j = SmallGeneration().ToJson();
  j["noise"] = 1.0;
  EXPECT_THROW(GenerationConfig::FromJson(j), ConfigError);
  j = SmallGeneration().ToJson();
  j["languages"][3]["parent"] = "zzz";
  EXPECT_THROW(GenerationConfig::FromJson(j), ConfigError);
}

TEST(GenerationTest, InventoryOverlapBeyondSharingIsRejected) {
  GenerationConfig c = SmallGeneration();
  c.languages[0].inventory = {"a", "b", "c", "d"};
  c.languages[0].inventory_size = 0;
  c.languages[1].inventory = {"a", "b", "c", "e"};
  c.languages[1].inventory_size = 0;
  c.max_shared = 2;
  EXPECT_THROW(GenerateCorpus(c), ConfigError);
  c.max_shared = 3;
  EXPECT_NO_THROW(GenerateCorpus(c));
}

TEST(GenerationTest, JsonRoundTrip) {
  GenerationConfig c = SmallGeneration();
  c.dialect_scale = 0.2;
  c.emission_seed = 5;
  const GenerationConfig back = GenerationConfig::FromJson(c.ToJson());
  EXPECT_EQ(back.ToJson().dump(), c.ToJson().dump());
}

TEST_F(TempDir, SameSeedGivesIdenticalFiles) {
  SaveCorpus(GenerateCorpus(SmallGeneration()), (dir_ / "a").string());
  SaveCorpus(GenerateCorpus(SmallGeneration()), (dir_ / "b").string());
  std::size_t files = 0;
  for (const auto &entry : fs::recursive_directory_iterator(dir_ / "a")) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), dir_ / "a");
    EXPECT_EQ(ReadBytes(entry.path()), ReadBytes(dir_ / "b" / rel)) << rel;
    ++files;
  }
  EXPECT_GT(files, 50u);
}

TEST_F(TempDir, SaveLoadIsLossless) {
  const Corpus corpus = GenerateCorpus(SmallGeneration());
  SaveCorpus(corpus, dir_.string());
  const Corpus back = LoadCorpus(dir_.string());
  EXPECT_EQ(back.vocab, corpus.vocab);
  EXPECT_EQ(back.languages, corpus.languages);
  EXPECT_TRUE(SameUtterances(back.train, corpus.train));
  EXPECT_TRUE(SameUtterances(back.dev_standard, corpus.dev_standard));
  EXPECT_TRUE(SameUtterances(back.dev_dialect, corpus.dev_dialect));
}

TEST_F(TempDir, ShortManifestLineIsParseErrorWithLine) {
  SaveCorpus(GenerateCorpus(SmallGeneration()), dir_.string());
  const fs::path manifest = dir_ / "train.tsv";
  std::string text = ReadBytes(manifest);
  const std::size_t second = text.find('\n') + 1;
  const std::size_t last_tab = text.rfind('\t', text.find('\n', second));
  text.erase(last_tab, text.find('\n', second) - last_tab);
  std::ofstream(manifest, std::ios::binary) << text;
  try {
    LoadCorpus(dir_.string());
    FAIL();
  } catch (const ParseError &e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST_F(TempDir, FeatureFileLayout) {
  std::mt19937_64 rng(1);
  const ad::Tensor x = testing::RandomMatrix(rng, 7, 16);
  const fs::path path = dir_ / "x.mlft";
  WriteFeatures(x, path.string());
  EXPECT_EQ(fs::file_size(path), 16u + 7u * 16u * 4u);
  const std::string bytes = ReadBytes(path);
  EXPECT_EQ(bytes.substr(0, 4), "MLFT");
  const ad::Tensor back = ReadFeatures(path.string());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(back[i], static_cast<float>(x[i]));

  std::string bad = bytes;
  bad[1] = 'X';
  std::ofstream(path, std::ios::binary) << bad;
  EXPECT_THROW(ReadFeatures(path.string()), FormatError);
  std::ofstream(path, std::ios::binary) << bytes.substr(0, bytes.size() - 4);
  EXPECT_THROW(ReadFeatures(path.string()), FormatError);
}

TEST(AugmentationTest, AddsTrainingUtterancesOnly) {
  const GenerationConfig c = SmallGeneration();
  const Corpus base = GenerateCorpus(c);
  const Corpus aug = AugmentCorpus(base, c, {{"swa", 100}}, 3);
  EXPECT_EQ(aug.train.size(), base.train.size() + 100);
  EXPECT_EQ(std::count_if(aug.train.begin(), aug.train.end(),
                          [](const Utterance &u) { return u.language == "swa"; }),
            105);
  EXPECT_TRUE(SameUtterances(aug.dev_standard, base.dev_standard));
  EXPECT_TRUE(SameUtterances(aug.dev_dialect, base.dev_dialect));
  EXPECT_EQ(aug.train.back().id, "swa_aug_0099");
  EXPECT_THROW(AugmentCorpus(base, c, {{"zzz", 1}}, 3), ConfigError);
  EXPECT_THROW(AugmentCorpus(base, c, {{"eng-x", 1}}, 3), ConfigError);
}

TEST(AugmentationTest, CountsVaryAroundMean) {
  EXPECT_EQ(kReferenceAugmentationMean, 2123u);
  const auto fixed = SampleAugmentationCounts({"a", "b"}, 100, 0, 1);
  EXPECT_EQ(fixed.at("a"), 100u);
  EXPECT_EQ(fixed.at("b"), 100u);
  const auto varied = SampleAugmentationCounts({"a", "b", "c", "d"}, 2123, 300, 1);
  for (const auto &[code, n] : varied) {
    EXPECT_GE(n, 1823u);
    EXPECT_LE(n, 2423u);
  }
}

TEST(SpecAugmentTest, NoMasksLeaveInputUnchanged) {
  std::mt19937_64 rng(2);
  const ad::Tensor x = testing::RandomMatrix(rng, 10, 4);
  const ad::Tensor y = SpecAugment(x, {}, rng);
  EXPECT_TRUE(SameFeatures(x, y));
  const ad::Tensor z = SpecAugment(x, {1, 10, 1, 4}, rng);
  EXPECT_TRUE(SameFeatures(x, z));
}

TEST(SpecAugmentTest, OneTimeMaskZeroesWholeRows) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const ad::Tensor x = ad::Tensor::Filled({10, 6}, 1.5);
    const ad::Tensor y = SpecAugment(x, {1, 2, 0, 0}, rng);
    EXPECT_EQ(std::count(y.data().begin(), y.data().end(), 0.0), 12);
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < 10; ++r) {
      if (y.at(r, 0) == 0.0) rows.push_back(r);
    }
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[1], rows[0] + 1);
  }
}

TEST(SpecAugmentTest, FeatureMaskZeroesColumns) {
  std::mt19937_64 rng(4);
  const ad::Tensor y = SpecAugment(ad::Tensor::Filled({5, 8}, 1.0), {0, 0, 1, 3}, rng);
  EXPECT_EQ(std::count(y.data().begin(), y.data().end(), 0.0), 15);
}

}  // namespace
}  // namespace polyctc
