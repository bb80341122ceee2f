#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "rsum/corpus.hpp"
#include "rsum/models.hpp"
#include "rsum/policy.hpp"
#include "rsum/rng.hpp"

namespace testing_support {

using rsum::corpus::TokenizedText;
using Tokens = std::vector<std::string>;

/// Fixed vectors per space-joined text; unknown texts get a unit vector on
/// axis 0.
class TableEmbedder final : public rsum::TextEmbedder {
 public:
  explicit TableEmbedder(std::size_t dim) : dim_(dim) {}
  void set(const std::string& text, std::vector<double> v) { table_[text] = std::move(v); }
  std::size_t dimension() const override { return dim_; }
  rsum::Embedding embed(std::span<const std::string> tokens) const override {
    auto it = table_.find(rsum::corpus::join(tokens));
    if (it != table_.end()) return it->second;
    rsum::Embedding e(dim_, 0.0);
    e[0] = 1.0;
    return e;
  }

 private:
  std::size_t dim_;
  std::map<std::string, std::vector<double>> table_;
};

/// Every token gets the same log-probability, so PPL = exp(-logp).
class ConstantLM final : public rsum::LanguageModel {
 public:
  explicit ConstantLM(double logp) : logp_(logp) {}
  std::vector<double> token_logprobs(std::span<const std::string> tokens) const override {
    return std::vector<double>(tokens.size(), logp_);
  }

 private:
  double logp_;
};

/// Per-text perplexity table; other texts score with `fallback_logp`.
class TableLM final : public rsum::LanguageModel {
 public:
  explicit TableLM(double fallback_logp = -1.0) : fallback_(fallback_logp) {}
  void set_perplexity(const std::string& text, double ppl) { ppl_[text] = ppl; }
  std::vector<double> token_logprobs(std::span<const std::string> tokens) const override {
    auto it = ppl_.find(rsum::corpus::join(tokens));
    const double lp = it == ppl_.end() ? fallback_ : -std::log(it->second);
    return std::vector<double>(tokens.size(), lp);
  }

 private:
  double fallback_;
  std::map<std::string, double> ppl_;
};

/// Generator whose next-token distribution is an arbitrary function of the
/// prefix. Vocabulary ids 1..n are "w1".."wn"; EOS is n+1.
class FunctionGenerator final : public rsum::policy::ConditionalGenerator {
 public:
  using Dist = std::function<std::vector<double>(std::span<const rsum::corpus::TokenId>)>;

  FunctionGenerator(std::size_t n_words, Dist dist) : dist_(std::move(dist)) {
    for (std::size_t i = 1; i <= n_words; ++i) vocab_.add("w" + std::to_string(i));
  }
  std::string backend() const override { return "function"; }
  std::size_t output_size() const override { return vocab_.size() + 1; }
  rsum::corpus::TokenId eos() const override { return static_cast<rsum::corpus::TokenId>(vocab_.size()); }
  const rsum::corpus::Vocabulary& vocabulary() const override { return vocab_; }
  std::vector<double> next_token_distribution(const rsum::corpus::PromptedInput&,
                                              std::span<const rsum::corpus::TokenId> prefix) const override {
    return dist_(prefix);
  }

 private:
  rsum::corpus::Vocabulary vocab_;
  Dist dist_;
};

/// Hash-seeded random distributions over the prefix; deterministic per
/// (seed, prefix). `ties` draws weights from {1,2,3} so exact ties occur.
/// The unknown-word id always has zero probability.
FunctionGenerator random_generator(std::size_t n_words, std::uint64_t seed, bool ties = false);

/// One-hot along a fixed action sequence (ids include the final EOS).
FunctionGenerator forced_generator(std::size_t n_words, std::vector<rsum::corpus::TokenId> actions);

/// Random lowercase words from a vocabulary of `vocab` words.
Tokens random_tokens(rsum::Rng& rng, std::size_t min_len, std::size_t max_len, std::size_t vocab);
TokenizedText random_text(rsum::Rng& rng, std::size_t min_len, std::size_t max_len, std::size_t vocab);

// Oracles --------------------------------------------------------------------

/// ROUGE-n by listing every n-gram of both sides and matching greedily.
struct Prf {
  double p, r, f;
};
Prf oracle_rouge_n(const Tokens& cand, const Tokens& ref, int n);
/// Full-table LCS.
std::size_t oracle_lcs(const Tokens& a, const Tokens& b);
Prf oracle_prf(std::size_t overlap, std::size_t cand_total, std::size_t ref_total);

}  // namespace testing_support
