#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "rsum/backends.hpp"
#include "rsum/error.hpp"
#include "rsum/toy.hpp"
#include "support/support.hpp"

using namespace rsum;
using corpus::TokenId;
using toy::ToyGenerator;

namespace {

std::vector<corpus::TokenizedText> small_corpus() {
  return {corpus::tokenize("police arrest suspect in bank robbery"),
          corpus::tokenize("storm hits coast and cuts power"),
          corpus::tokenize("bank raises rates again")};
}

ToyGenerator random_toy(std::uint64_t seed, ToyGenerator::Options opt = {}) {
  ToyGenerator g(corpus::Vocabulary::build(small_corpus()), opt);
  Rng rng(seed);
  for (double& p : g.parameters()) p = 2 * rng.uniform01() - 1;
  return g;
}

}  // namespace

TEST(ToyGenerator, ParameterLayout) {
  corpus::Vocabulary v;
  v.add("a");
  v.add("b");
  EXPECT_EQ(ToyGenerator(v, {.bigram = false, .per_word_copy = false, .max_offset = 1}).parameters().size(), 9u);
  // bias 4 + bigram 16 + copy 1 + per-word 3 + repeat 1 + remaining 5
  EXPECT_EQ(ToyGenerator(v, {.bigram = true, .per_word_copy = true, .max_offset = 2}).parameters().size(), 30u);
  EXPECT_THROW(ToyGenerator(v, {.bigram = true, .per_word_copy = true, .max_offset = -1}), InvalidArgument);
}

TEST(ToyGenerator, FreshModelIsUniform) {
  ToyGenerator g(corpus::Vocabulary::build(small_corpus()));
  const auto input = corpus::make_prompted_input(small_corpus()[0], 3);
  const auto p = g.next_token_distribution(input, {});
  ASSERT_EQ(p.size(), g.output_size());
  for (double x : p) EXPECT_NEAR(x, 1.0 / static_cast<double>(p.size()), 1e-15);
}

TEST(ToyGenerator, DistributionsAreNormalized) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = random_toy(seed);
    Rng rng(seed);
    const auto text = small_corpus()[seed % 3];
    const auto input = corpus::make_prompted_input(text, 1 + static_cast<int>(seed % 6));
    std::vector<TokenId> prefix;
    for (int s = 0; s < 6; ++s) {
      const auto p = g.next_token_distribution(input, prefix);
      EXPECT_NO_THROW(policy::check_distribution(p, g.output_size()));
      prefix.push_back(static_cast<TokenId>(1 + rng.uniform_index(g.vocabulary().size() - 1)));
    }
  }
}

TEST(ToyGenerator, LogprobGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto g = random_toy(seed, {.bigram = true, .per_word_copy = true, .max_offset = 3});
    const auto input = corpus::make_prompted_input(small_corpus()[seed % 3], 2 + static_cast<int>(seed % 3));
    Rng rng(seed + 100);
    const auto actions = policy::sample_summary(g, input, 6, rng).actions(g.eos());
    auto total = [&] {
      const auto lp = g.score_logprob(input, actions);
      return std::accumulate(lp.begin(), lp.end(), 0.0);
    };
    std::vector<double> grad(g.parameters().size(), 0.0);
    g.accumulate_logprob_gradient(input, actions, 1.0, grad);
    auto params = g.parameters();
    double diff = 0, norm = 0;
    for (std::size_t k = 0; k < params.size(); ++k) {
      const double keep = params[k];
      params[k] = keep + 1e-6;
      const double up = total();
      params[k] = keep - 1e-6;
      const double down = total();
      params[k] = keep;
      const double fd = (up - down) / 2e-6;
      diff += (fd - grad[k]) * (fd - grad[k]);
      norm += fd * fd;
    }
    EXPECT_LE(std::sqrt(diff), 1e-5 * std::max(1.0, std::sqrt(norm))) << "seed " << seed;
  }
}

TEST(ToyGenerator, GradientIsScaledByWeight) {
  const auto g = random_toy(4);
  const auto input = corpus::make_prompted_input(small_corpus()[1], 3);
  const std::vector<TokenId> actions = {1, 2, g.eos()};
  std::vector<double> a(g.parameters().size(), 0.0), b(a);
  g.accumulate_logprob_gradient(input, actions, 1.0, a);
  g.accumulate_logprob_gradient(input, actions, -2.5, b);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(b[k], -2.5 * a[k], 1e-12);
}

TEST(ToyGenerator, RemainingLengthSteersEos) {
  auto g = random_toy(0, {.bigram = false, .per_word_copy = false, .max_offset = 2});
  for (double& p : g.parameters()) p = 0;
  EXPECT_EQ(g.remaining_bucket(5, 0), 4u);
  EXPECT_EQ(g.remaining_bucket(5, 5), 2u);
  EXPECT_EQ(g.remaining_bucket(5, 9), 0u);
}

TEST(ToyGenerator, SaveLoadRoundTrip) {
  const auto g = random_toy(9);
  std::stringstream blob;
  g.save(blob);
  const auto back = ToyGenerator::load(blob);
  EXPECT_EQ(back.vocabulary().words(), g.vocabulary().words());
  ASSERT_EQ(back.parameters().size(), g.parameters().size());
  EXPECT_TRUE(std::equal(back.parameters().begin(), back.parameters().end(), g.parameters().begin()));
  EXPECT_EQ(back.options().max_offset, g.options().max_offset);

  std::stringstream junk("not a blob\n");
  EXPECT_THROW(ToyGenerator::load(junk), IoError);
}

TEST(HashedBagOfWords, DeterministicAndOrderFree) {
  toy::HashedBagOfWords a(32), b(32);
  const std::vector<std::string> x = {"storm", "hits", "coast"}, y = {"coast", "storm", "hits"};
  EXPECT_EQ(a.embed(x), b.embed(x));
  EXPECT_EQ(a.embed(x).size(), 32u);
  for (std::size_t i = 0; i < 32; ++i) EXPECT_NEAR(a.embed(x)[i], a.embed(y)[i], 1e-12);
  toy::HashedBagOfWords other(32, 1);
  EXPECT_NE(a.embed(x), other.embed(x));
}

TEST(BigramLanguageModel, ProperLogprobs) {
  const auto corpus = toy::synthetic_corpus(200, 1);
  toy::BigramLanguageModel lm(corpus);
  for (const auto& t : corpus) {
    const auto lp = lm.token_logprobs(t.tokens);
    ASSERT_EQ(lp.size(), t.size());
    for (double x : lp) EXPECT_LE(x, 0.0);
  }
  const std::vector<std::string> unseen = {"zzz", "qqq"};
  for (double x : lm.token_logprobs(unseen)) EXPECT_TRUE(std::isfinite(x));
  // Frequent word pairs are more likely than unseen ones.
  EXPECT_GT(rewards::perplexity(unseen, lm), rewards::perplexity(corpus[0].tokens, lm));
}

TEST(SyntheticCorpus, DeterministicSmallVocabulary) {
  const auto a = toy::synthetic_corpus(5000, 3);
  EXPECT_EQ(a, toy::synthetic_corpus(5000, 3));
  EXPECT_NE(a, toy::synthetic_corpus(5000, 4));
  std::set<std::string> vocab;
  for (const auto& t : a) vocab.insert(t.tokens.begin(), t.tokens.end());
  EXPECT_LE(vocab.size(), 300u);
  EXPECT_GT(vocab.size(), 50u);
}

TEST(Backends, FactoryResolvesBuiltins) {
  const auto corpus = small_corpus();
  EXPECT_EQ(backends::make_embedder("hash-bow", corpus)->dimension(), 64u);
  EXPECT_NE(backends::make_embedder("hash-bow-plain", corpus), nullptr);
  EXPECT_NE(backends::make_embedder("hash-bow:7", corpus), nullptr);
  EXPECT_NE(backends::make_language_model("bigram", corpus), nullptr);
  const auto gen = backends::make_generator("toy", corpus::Vocabulary::build(corpus));
  EXPECT_EQ(gen->backend(), "toy");
  EXPECT_THROW(backends::make_embedder("word2vec", corpus), ConfigError);
  EXPECT_THROW(backends::make_language_model("gpt", corpus), ConfigError);
  EXPECT_THROW(backends::make_generator("bart", corpus::Vocabulary::build(corpus)), ConfigError);
}
