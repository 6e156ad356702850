// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "polyctc/autodiff/gradcheck.h"
#include "polyctc/autodiff/ops.h"
#include "polyctc/autodiff/tape.h"
#include "polyctc/common/errors.h"
#include "polyctc/ctc/ctc.h"
#include "polyctc/ctc/vocabulary.h"
#include "test_util.h"

namespace polyctc {
namespace {

using testing::RandomLogProbs;
using testing::RandomTarget;

ad::Tensor UniformLogProbs(std::size_t frames, std::size_t vocab) {
  return ad::Tensor::Filled({frames, vocab}, -std::log(static_cast<double>(vocab)));
}

TEST(CtcLossTest, SingleFrameSingleSymbol) {
  const std::vector<int> y{1};
  const CtcLoss loss = CtcForward(UniformLogProbs(1, 2), y);
  ASSERT_TRUE(loss.achievable());
  EXPECT_NEAR(loss.value.item(), std::log(2.0), 1e-12);
  EXPECT_NEAR(loss.value.item(), 0.6931, 1e-4);
}

TEST(CtcLossTest, TwoFramesMatchesHandEnumeration) {
  // Paths collapsing to [a] over two frames: aa, -a, a-; each has
  // probability 0.25.
  const std::vector<int> y{1};
  const double hand = 0.25 + 0.25 + 0.25;
  const CtcLoss loss = CtcForward(UniformLogProbs(2, 2), y);
  EXPECT_NEAR(std::exp(-loss.value.item()), hand, 1e-12);
  EXPECT_NEAR(loss.value.item(), 0.2877, 1e-4);
  EXPECT_NEAR(CtcBruteForce(UniformLogProbs(2, 2), y), 0.75, 1e-15);
}

TEST(CtcLossTest, TargetLongerThanFramesIsInfinite) {
  const std::vector<int> y{1, 2};
  const CtcLoss loss = CtcForward(UniformLogProbs(1, 3), y);
  EXPECT_FALSE(loss.achievable());
  EXPECT_EQ(loss.value.item(), std::numeric_limits<double>::infinity());
  EXPECT_FALSE(loss.diagnostic.empty());
}

TEST(CtcLossTest, RepeatsNeedSeparatingBlank) {
  const std::vector<int> aa{1, 1};
  EXPECT_EQ(CtcMinFrames(aa), 3u);
  EXPECT_FALSE(CtcForward(UniformLogProbs(2, 2), aa).achievable());
  EXPECT_TRUE(CtcForward(UniformLogProbs(3, 2), aa).achievable());
}

TEST(CtcLossTest, UnnormalizedRowsAreContractError) {
  const ad::Tensor bad = ad::Tensor::Filled({2, 3}, 0.0);
  const std::vector<int> y{1};
  EXPECT_THROW(CtcForward(bad, y), ContractError);
  const std::vector<int> with_blank{0};
  EXPECT_THROW(CtcForward(UniformLogProbs(2, 3), with_blank), ContractError);
}

TEST(CtcLossTest, EmptyTargetIsAllBlankPath) {
  const ad::Tensor lp = ad::Tensor::Filled({2, 2}, std::log(0.5));
  const std::vector<int> empty;
  EXPECT_NEAR(CtcBruteForce(lp, empty), 0.25, 1e-15);
  EXPECT_NEAR(std::exp(-CtcForward(lp, empty).value.item()), 0.25, 1e-15);
}

TEST(CtcBruteForceTest, RefusesLargeInstances) {
  const std::vector<int> y{1};
  EXPECT_THROW(CtcBruteForce(UniformLogProbs(9, 3), y), SizeError);
  EXPECT_THROW(CtcBruteForce(UniformLogProbs(3, 7), y), SizeError);
}

// exp(-loss) from the forward recursion against exhaustive enumeration.
TEST(CtcOracleTest, ForwardMatchesEnumeration) {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  int checked = 0;
  for (int trial = 0; trial < 600; ++trial) {
    const std::size_t frames = std::uniform_int_distribution<std::size_t>(1, 6)(rng);
    const int vocab = std::uniform_int_distribution<int>(2, 4)(rng);
    const std::size_t len = std::uniform_int_distribution<std::size_t>(0, 3)(rng);
    const ad::Tensor lp = RandomLogProbs(rng, frames, vocab);
    const std::vector<int> y = RandomTarget(rng, len, vocab);
    const double oracle = CtcBruteForce(lp, y);
    const CtcLoss loss = CtcForward(lp, y);
    const double forward = loss.achievable() ? std::exp(-loss.value.item()) : 0.0;
    if (!loss.achievable()) {
      EXPECT_EQ(oracle, 0.0);
    }
    worst = std::max(worst, std::abs(forward - oracle));
    ++checked;
  }
  EXPECT_GE(checked, 500);
  EXPECT_LE(worst, 1e-9);
}

TEST(CtcGradientTest, MatchesFiniteDifferences) {
  double worst = 0.0;
  for (int seed = 0; seed < 60; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t frames = std::uniform_int_distribution<std::size_t>(3, 7)(rng);
    const int vocab = std::uniform_int_distribution<int>(2, 5)(rng);
    const std::size_t len = std::uniform_int_distribution<std::size_t>(1, 3)(rng);
    const std::vector<int> y = RandomTarget(rng, len, vocab);
    if (CtcMinFrames(y) > frames) continue;
    const ad::Tensor logits = testing::RandomMatrix(rng, frames, vocab, 1.5);
    worst = std::max(worst, ad::FiniteDiffCheck(
                                [&y](const ad::Tensor &x) {
                                  return CtcForward(ad::LogSoftmax(x), y).value;
                                },
                                logits));
  }
  EXPECT_LE(worst, 1e-5);
}

TEST(CtcGradientTest, RandomFourByThreeLogits) {
  std::mt19937_64 rng(5);
  const ad::Tensor logits = testing::RandomMatrix(rng, 4, 3);
  const std::vector<int> y{1, 2};
  EXPECT_LE(ad::FiniteDiffCheck(
                [&y](const ad::Tensor &x) { return CtcForward(ad::LogSoftmax(x), y).value; },
                logits),
            1e-5);
}

TEST(CtcPropertyTest, ImpossibilityIsMonotone) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const std::vector<int> y = RandomTarget(rng, std::uniform_int_distribution<std::size_t>(1, 5)(rng), 3);
    bool possible_before = true;
    for (std::size_t frames = 12; frames >= 1; --frames) {
      const bool ok = CtcForward(UniformLogProbs(frames, 3), y).achievable();
      if (!possible_before) EXPECT_FALSE(ok);
      possible_before = ok;
    }
  }
}

TEST(CtcPropertyTest, VocabularyPermutationInvariance) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const int vocab = 5;
    const ad::Tensor lp = RandomLogProbs(rng, 6, vocab);
    const std::vector<int> y = RandomTarget(rng, 3, vocab);
    // Permute the non-blank ids; the blank stays at 0.
    std::vector<int> perm(vocab);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin() + 1, perm.end(), rng);
    std::vector<double> permuted(lp.size());
    for (std::size_t t = 0; t < 6; ++t) {
      for (int v = 0; v < vocab; ++v) permuted[t * vocab + perm[v]] = lp.at(t, v);
    }
    std::vector<int> y_perm;
    for (int v : y) y_perm.push_back(perm[v]);
    const double a = CtcForward(lp, y).value.item();
    const double b = CtcForward(ad::Tensor::Matrix(6, vocab, permuted), y_perm).value.item();
    EXPECT_NEAR(a, b, 1e-12);
  }
}

TEST(GreedyDecodeTest, CollapseRules) {
  EXPECT_EQ(CollapsePath(std::vector<int>{0, 1, 1, 0, 2}), (std::vector<int>{1, 2}));
  EXPECT_EQ(CollapsePath(std::vector<int>{0, 0, 0}), std::vector<int>{});
  EXPECT_EQ(CollapsePath(std::vector<int>{1, 1, 0, 1}), (std::vector<int>{1, 1}));
}

TEST(GreedyDecodeTest, ArgmaxTiesGoToLowestId) {
  // Frame 0 ties blank/a, frame 1 favours a, frame 2 ties a/b.
  const double h = std::log(0.5);
  const double n = -1e9;
  const ad::Tensor lp = ad::Tensor::Matrix(3, 3, {h, h, n, n, 0.0, n, n, h, h});
  EXPECT_EQ(GreedyDecode(lp), (std::vector<int>{1}));
}

TEST(VocabularyTest, LayoutAndDisjointness) {
  const Vocabulary v({"eng", "fra"}, {"a", "b"});
  EXPECT_EQ(v.size(), 5);
  EXPECT_EQ(v.token(0), Vocabulary::kBlankSymbol);
  EXPECT_TRUE(v.is_language_code(v.id("fra")));
  EXPECT_FALSE(v.is_language_code(v.id("a")));
  EXPECT_FALSE(v.is_language_code(0));
  EXPECT_THROW(Vocabulary({"eng"}, {"eng"}), VocabularyError);
  EXPECT_THROW(v.id("zzz"), VocabularyError);
}

}  // namespace
}  // namespace polyctc
