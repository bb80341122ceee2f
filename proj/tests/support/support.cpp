#include "support.hpp"

#include <algorithm>

namespace testing_support {

namespace {

std::uint64_t hash_prefix(std::uint64_t seed, std::span<const rsum::corpus::TokenId> prefix) {
  std::uint64_t h = seed ^ 0x243F6A8885A308D3ULL;
  for (auto id : prefix) {
    h ^= static_cast<std::uint64_t>(id) + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
    rsum::splitmix64(h);
  }
  return h;
}

}  // namespace

FunctionGenerator random_generator(std::size_t n_words, std::uint64_t seed, bool ties) {
  return FunctionGenerator(n_words, [n_words, seed, ties](std::span<const rsum::corpus::TokenId> prefix) {
    rsum::Rng rng(hash_prefix(seed, prefix));
    const std::size_t size = n_words + 2;
    std::vector<double> w(size);
    w[0] = 0.0;  // <unk>
    for (std::size_t i = 1; i < size; ++i) {
      w[i] = ties ? static_cast<double>(1 + rng.uniform_index(3)) : 0.05 + rng.uniform01();
    }
    double sum = 0;
    for (double x : w) sum += x;
    for (double& x : w) x /= sum;
    return w;
  });
}

FunctionGenerator forced_generator(std::size_t n_words, std::vector<rsum::corpus::TokenId> actions) {
  return FunctionGenerator(n_words, [n_words, actions](std::span<const rsum::corpus::TokenId> prefix) {
    std::vector<double> w(n_words + 2, 0.0);
    const auto eos = static_cast<rsum::corpus::TokenId>(n_words + 1);
    const auto a = prefix.size() < actions.size() ? actions[prefix.size()] : eos;
    w[static_cast<std::size_t>(a)] = 1.0;
    return w;
  });
}

Tokens random_tokens(rsum::Rng& rng, std::size_t min_len, std::size_t max_len, std::size_t vocab) {
  const std::size_t n = min_len + rng.uniform_index(max_len - min_len + 1);
  Tokens t;
  for (std::size_t i = 0; i < n; ++i) t.push_back("v" + std::to_string(rng.uniform_index(vocab)));
  return t;
}

TokenizedText random_text(rsum::Rng& rng, std::size_t min_len, std::size_t max_len, std::size_t vocab) {
  return rsum::corpus::from_tokens(random_tokens(rng, min_len, max_len, vocab));
}

Prf oracle_prf(std::size_t overlap, std::size_t cand_total, std::size_t ref_total) {
  const double p = cand_total ? double(overlap) / double(cand_total) : 0.0;
  const double r = ref_total ? double(overlap) / double(ref_total) : 0.0;
  return {p, r, p + r > 0 ? 2 * p * r / (p + r) : 0.0};
}

Prf oracle_rouge_n(const Tokens& cand, const Tokens& ref, int n) {
  auto grams = [n](const Tokens& t) {
    std::vector<Tokens> g;
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= t.size(); ++i)
      g.emplace_back(t.begin() + static_cast<long>(i), t.begin() + static_cast<long>(i) + n);
    return g;
  };
  const auto c = grams(cand);
  auto r = grams(ref);
  std::vector<bool> used(r.size(), false);
  std::size_t overlap = 0;
  for (const auto& g : c) {
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (!used[j] && r[j] == g) {
        used[j] = true;
        ++overlap;
        break;
      }
    }
  }
  return oracle_prf(overlap, c.size(), r.size());
}

std::size_t oracle_lcs(const Tokens& a, const Tokens& b) {
  std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = a.size(); i-- > 0;)
    for (std::size_t j = b.size(); j-- > 0;)
      t[i][j] = a[i] == b[j] ? 1 + t[i + 1][j + 1] : std::max(t[i + 1][j], t[i][j + 1]);
  return t[0][0];
}

}  // namespace testing_support
