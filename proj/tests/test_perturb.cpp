#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "rsum/error.hpp"
#include "rsum/perturb.hpp"
#include "support/properties.hpp"
#include "support/support.hpp"

using namespace rsum;
using namespace rsum::perturb;
using corpus::from_tokens;
using testing_support::random_text;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> words(std::size_t n, const std::string& stem = "w") {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(stem + std::to_string(i));
  return out;
}

std::map<std::string, int> multiset(const std::vector<std::string>& t) {
  std::map<std::string, int> m;
  for (const auto& w : t) ++m[w];
  return m;
}

bool is_subsequence(const std::vector<std::string>& sub, const std::vector<std::string>& full) {
  std::size_t j = 0;
  for (const auto& w : full)
    if (j < sub.size() && sub[j] == w) ++j;
  return j == sub.size();
}

// Straight-line restatement of the perturbation draw order:
//   choose k of n: for i < k swap(idx[i], idx[i + u(n - i)]), sort the first k
//   shuffle: sources = positions; for i < k swap(src[i], src[i + u(k - i)])
//   drop: choose k positions, remove them
//   add: k times: word = donor[u(|donor|)], slot = u(len + 1), insert
std::vector<std::string> oracle_body(const std::vector<std::string>& text,
                                     const std::vector<std::string>& donor, double s, double d,
                                     double a, Rng& rng) {
  const auto n = text.size();
  auto round_half_up = [](double x) { return static_cast<std::size_t>(std::floor(x + 0.5)); };
  auto choose = [&](std::size_t len, std::size_t k) {
    std::vector<std::size_t> idx(len);
    for (std::size_t i = 0; i < len; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.uniform_index(len - i)]);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
  };
  std::vector<std::string> cur = text;
  const auto ks = std::min(round_half_up(s * double(n)), n);
  const auto pos = choose(n, ks);
  auto src = pos;
  for (std::size_t i = 0; i < ks; ++i) std::swap(src[i], src[i + rng.uniform_index(ks - i)]);
  const auto before = cur;
  for (std::size_t i = 0; i < ks; ++i) cur[pos[i]] = before[src[i]];

  const auto kd = round_half_up(d * double(n));
  const auto drop = choose(cur.size(), kd);
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < cur.size(); ++i)
    if (!std::binary_search(drop.begin(), drop.end(), i)) kept.push_back(cur[i]);
  cur = kept;

  const auto ka = round_half_up(a * double(n));
  for (std::size_t i = 0; i < ka; ++i) {
    const auto& w = donor[rng.uniform_index(donor.size())];
    const auto slot = rng.uniform_index(cur.size() + 1);
    cur.insert(cur.begin() + static_cast<long>(slot), w);
  }
  return cur;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(PerturbConfig, DefaultsAndValidation) {
  const PerturbConfig c;
  EXPECT_EQ(c.shuffle_ratio, 0.10);
  EXPECT_EQ(c.drop_ratio, 0.10);
  EXPECT_EQ(c.add_ratio, 1.00);
  EXPECT_NO_THROW(c.validate());
  EXPECT_THROW((PerturbConfig{2.1, 0.1, 1.0, 0}.validate()), InvalidArgument);
  EXPECT_THROW((PerturbConfig{0.1, -0.1, 1.0, 0}.validate()), InvalidArgument);
}

TEST(StageCount, HalfUp) {
  EXPECT_EQ(stage_count(0.1, 20), 2u);
  EXPECT_EQ(stage_count(0.1, 15), 2u);
  EXPECT_EQ(stage_count(0.1, 14), 1u);
  EXPECT_EQ(stage_count(1.0, 20), 20u);
  EXPECT_EQ(stage_count(0.0, 20), 0u);
}

TEST(Shuffle, Examples) {
  Rng rng(1);
  const auto t = from_tokens(words(20));
  EXPECT_EQ(shuffle_words(t, 0.0, rng), t);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<Operation> log;
    const auto out = shuffle_k(t.tokens, stage_count(0.1, 20), rng, &log);
    const auto& op = std::get<ShuffleOp>(log.at(0));
    ASSERT_EQ(op.positions.size(), 2u);
    for (std::size_t i = 0; i < 20; ++i)
      if (!std::binary_search(op.positions.begin(), op.positions.end(), i)) EXPECT_EQ(out[i], t.tokens[i]);
    EXPECT_EQ(multiset(out), multiset(t.tokens));
  }
  EXPECT_THROW(shuffle_words(corpus::TokenizedText{}, 0.1, rng), EmptyText);
}

TEST(Drop, Examples) {
  Rng rng(2);
  const auto t = from_tokens(words(20));
  EXPECT_EQ(drop_words(t, 0.0, rng), t);
  for (int rep = 0; rep < 200; ++rep) {
    const auto out = drop_words(t, 0.1, rng);
    EXPECT_EQ(out.size(), 18u);
    EXPECT_TRUE(is_subsequence(out.tokens, t.tokens));
  }
  EXPECT_THROW(drop_words(from_tokens({"a"}), 1.0, rng), AllDropped);
  EXPECT_THROW(drop_words(from_tokens({"a", "b"}), 1.0, rng), AllDropped);
}

TEST(Add, Examples) {
  Rng rng(3);
  const auto t = from_tokens(words(20));
  const auto donor = from_tokens(words(5, "d"));
  EXPECT_EQ(add_words(t, donor, 0.0, rng), t);
  for (int rep = 0; rep < 200; ++rep) {
    const auto out = add_words(t, donor, 1.0, rng);
    EXPECT_EQ(out.size(), 40u);
    EXPECT_TRUE(is_subsequence(t.tokens, out.tokens));
    auto m = multiset(out.tokens);
    for (const auto& w : t.tokens) --m[w];
    for (const auto& [w, c] : m)
      if (c > 0) EXPECT_EQ(w[0], 'd') << w;
  }
  EXPECT_THROW(add_words(t, corpus::TokenizedText{}, 1.0, rng), EmptyText);
}

TEST(ReconstructionPair, TwentyWordDefaults) {
  // Counts come from the original length: 20 -> shuffle 2 -> drop 2 -> add 20.
  Rng rng(4);
  const auto r = make_reconstruction_pair(from_tokens(words(20)), from_tokens(words(7, "d")), {}, rng);
  EXPECT_EQ(r.perturbed.body.size(), 38u);
  EXPECT_EQ(r.perturbed.target_length, 20);
  EXPECT_EQ(r.perturbed.serialized.substr(0, 4), "20: ");
  ASSERT_EQ(r.oplog.size(), 2u + 20u);
  EXPECT_EQ(std::get<ShuffleOp>(r.oplog[0]).positions.size(), 2u);
  EXPECT_EQ(std::get<DropOp>(r.oplog[1]).positions.size(), 2u);
}

TEST(ReconstructionPair, ZeroRatiosOnlyPrompt) {
  Rng rng(5);
  const auto t = from_tokens(words(9));
  const auto r = make_reconstruction_pair(t, from_tokens({"x"}), {0, 0, 0, 0}, rng);
  EXPECT_EQ(r.perturbed.body, t);
  EXPECT_EQ(r.perturbed.serialized, "9: " + t.raw);
}

TEST(ReconstructionPair, Deterministic) {
  const auto t = from_tokens(words(17));
  const auto d = from_tokens(words(6, "d"));
  Rng a(99), b(99);
  const auto ra = make_reconstruction_pair(t, d, {}, a);
  const auto rb = make_reconstruction_pair(t, d, {}, b);
  EXPECT_EQ(ra.perturbed, rb.perturbed);
  EXPECT_EQ(ra.original, rb.original);
}

TEST(ReconstructionPair, PropagatesAllDropped) {
  Rng rng(6);
  EXPECT_THROW(make_reconstruction_pair(from_tokens(words(3)), from_tokens({"x"}), {0.1, 1.0, 1.0, 0}, rng),
               AllDropped);
}

TEST(ReconstructionPair, MatchesDrawOrderOracle) {
  Rng gen(12);
  for (int i = 0; i < 2000; ++i) {
    const auto t = random_text(gen, 1, 40, 30);
    const auto d = random_text(gen, 1, 15, 30);
    const double s = 0.05 * static_cast<double>(gen.uniform_index(8));
    const double dr = 0.05 * static_cast<double>(gen.uniform_index(4));
    const double a = 0.25 * static_cast<double>(gen.uniform_index(6));
    const std::uint64_t seed = gen.next();
    Rng r1(seed), r2(seed);
    const PerturbConfig cfg{s, dr, a, 0};
    if (stage_count(dr, t.size()) >= t.size()) {
      EXPECT_THROW(make_reconstruction_pair(t, d, cfg, r1), AllDropped);
      continue;
    }
    const auto rec = make_reconstruction_pair(t, d, cfg, r1);
    EXPECT_EQ(rec.perturbed.body.tokens, oracle_body(t.tokens, d.tokens, s, dr, a, r2));
    EXPECT_EQ(r1.state(), r2.state());
  }
}

TEST(ReconstructionPair, StageArithmeticPromptAndReplay) {
  Rng gen(21);
  const PerturbConfig cfg;
  for (int i = 0; i < 1000; ++i) {
    const auto t = random_text(gen, 2, 45, 60);
    const auto d = random_text(gen, 1, 45, 60);
    const auto rec = make_reconstruction_pair(t, d, cfg, gen);
    const std::size_t n = t.size();
    EXPECT_EQ(rec.perturbed.body.size(), n - stage_count(0.1, n) + stage_count(1.0, n));
    EXPECT_EQ(rec.perturbed.target_length, static_cast<int>(n));
    EXPECT_EQ(corpus::parse_prompted_input(rec.perturbed.serialized), rec.perturbed);
    EXPECT_EQ(replay(rec.original, rec.oplog), rec.perturbed.body.tokens);
  }
}

TEST(PairDonors, Derangement) {
  EXPECT_THROW(pair_donors(1, 0), CorpusTooSmall);
  const auto two = pair_donors(2, 5);
  EXPECT_EQ(two[0], 1u);
  EXPECT_EQ(two[1], 0u);
  for (std::size_t n : {3u, 10u, 101u}) {
    const auto d = pair_donors(n, 42);
    std::vector<int> used(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_NE(d[i], i);
      ++used[d[i]];
    }
    for (int u : used) EXPECT_EQ(u, 1);
  }
}

TEST(GenerateDataset, CountsDonorsAndDeterminism) {
  std::vector<corpus::TokenizedText> texts;
  Rng gen(8);
  for (int i = 0; i < 300; ++i) texts.push_back(random_text(gen, 3, 20, 200));
  const auto dir = fs::temp_directory_path();
  PerturbConfig cfg;
  cfg.seed = 17;
  EXPECT_EQ(generate_dataset(texts, cfg, dir / "rsum_ds_a.tsv"), 300u);
  generate_dataset(texts, cfg, dir / "rsum_ds_b.tsv");
  EXPECT_EQ(slurp(dir / "rsum_ds_a.tsv"), slurp(dir / "rsum_ds_b.tsv"));
  generate_dataset(texts, cfg, dir / "rsum_ds_w1.tsv", 4);
  generate_dataset(texts, cfg, dir / "rsum_ds_w2.tsv", 4);
  EXPECT_EQ(slurp(dir / "rsum_ds_w1.tsv"), slurp(dir / "rsum_ds_w2.tsv"));
  cfg.seed = 18;
  generate_dataset(texts, cfg, dir / "rsum_ds_c.tsv");
  EXPECT_NE(slurp(dir / "rsum_ds_a.tsv"), slurp(dir / "rsum_ds_c.tsv"));

  const auto loaded = load_dataset(dir / "rsum_ds_a.tsv");
  ASSERT_EQ(loaded.size(), 300u);
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    EXPECT_EQ(loaded[i].target, texts[i]);
    EXPECT_EQ(loaded[i].input.target_length, static_cast<int>(texts[i].size()));
  }
}

TEST(GenerateDataset, TwoTextsSwapDonors) {
  const std::vector<corpus::TokenizedText> texts{from_tokens({"a", "b", "c"}), from_tokens({"x", "y", "z"})};
  const auto path = fs::temp_directory_path() / "rsum_ds_two.tsv";
  EXPECT_EQ(generate_dataset(texts, {0.0, 0.0, 1.0, 3}, path), 2u);
  const auto loaded = load_dataset(path);
  for (const auto& w : loaded[0].input.body.tokens)
    EXPECT_TRUE(w == "a" || w == "b" || w == "c" || w == "x" || w == "y" || w == "z");
  auto only_from = [](const corpus::TokenizedText& body, const std::string& set) {
    int added = 0;
    for (const auto& w : body.tokens) added += set.find(w) != std::string::npos;
    return added;
  };
  EXPECT_EQ(only_from(loaded[0].input.body, "xyz"), 3);
  EXPECT_EQ(only_from(loaded[1].input.body, "abc"), 3);
  EXPECT_THROW(generate_dataset(std::vector<corpus::TokenizedText>{texts[0]}, {}, path), CorpusTooSmall);
}

TEST(PerturbBatch, SingleStreamItemByItem) {
  Rng gen(31);
  std::vector<corpus::TokenizedText> texts, donors;
  for (int i = 0; i < 50; ++i) {
    texts.push_back(random_text(gen, 2, 20, 40));
    donors.push_back(random_text(gen, 1, 20, 40));
  }
  const auto batch = perturb_batch(texts, donors, {}, 77);
  Rng rng(77);
  for (std::size_t i = 0; i < texts.size(); ++i)
    EXPECT_EQ(batch[i].perturbed, make_reconstruction_pair(texts[i], donors[i], {}, rng).perturbed);
  EXPECT_THROW(perturb_batch(texts, std::span(donors).first(3), {}, 1), InvalidArgument);
}

TEST(PerturbationProperties, RandomTexts) {
  const auto r = testing_support::perturbation_suite(1000, 21);
  EXPECT_TRUE(r.pass()) << r.detail;
}
