#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rsum/corpus.hpp"
#include "rsum/models.hpp"
#include "rsum/policy.hpp"

// Small self-contained backends used by tests, benchmarks, and desk-scale
// runs. They implement the same interfaces as external model adapters.
namespace rsum::toy {

/// Log-linear next-word policy. For word v at step s with target length l:
///
///   logit(v)   = bias[v] + bigram[prev][v]
///              + [v in input, not yet emitted] * (copy + copy_word[v])
///              + [v already emitted] * repeat
///   logit(EOS) = bias[EOS] + bigram[prev][EOS] + remaining[clamp(l - s)]
///
/// The remaining-length table is what lets a length prompt steer EOS.
class ToyGenerator final : public policy::ConditionalGenerator {
 public:
  struct Options {
    bool bigram = true;
    bool per_word_copy = true;
    int max_offset = 16;
  };

  ToyGenerator(corpus::Vocabulary vocabulary, Options options);
  explicit ToyGenerator(corpus::Vocabulary vocabulary) : ToyGenerator(std::move(vocabulary), Options{}) {}

  std::string backend() const override { return "toy"; }
  std::size_t output_size() const override { return vocab_.size() + 1; }
  corpus::TokenId eos() const override { return static_cast<corpus::TokenId>(vocab_.size()); }
  const corpus::Vocabulary& vocabulary() const override { return vocab_; }

  std::vector<double> next_token_distribution(const corpus::PromptedInput& input,
                                              std::span<const corpus::TokenId> prefix) const override;
  std::span<double> parameters() override { return params_; }
  std::span<const double> parameters() const override { return params_; }
  void accumulate_logprob_gradient(const corpus::PromptedInput& input,
                                   std::span<const corpus::TokenId> actions, double weight,
                                   std::span<double> grad) const override;
  void save(std::ostream& out) const override;

  static ToyGenerator load(std::istream& in);

  const Options& options() const noexcept { return options_; }
  std::size_t remaining_bucket(int target_length, int step) const noexcept;

 private:
  struct Layout {
    std::size_t bias = 0, bigram = 0, copy = 0, copy_word = 0, repeat = 0, remaining = 0, total = 0;
  };
  struct Features;

  Features features(const corpus::PromptedInput& input) const;
  void logits(const Features& f, std::span<const corpus::TokenId> prefix,
              std::vector<double>& out) const;

  corpus::Vocabulary vocab_;
  Options options_;
  Layout layout_;
  std::vector<double> params_;
};

/// Bag-of-words embedder: each word maps to a fixed pseudo-random vector
/// derived from its hash; a text is the (optionally weighted) sum.
class HashedBagOfWords final : public TextEmbedder {
 public:
  explicit HashedBagOfWords(std::size_t dimension = 64, std::uint64_t seed = 0);

  /// Inverse-document-frequency weights, log(N / df), from a corpus.
  void fit_idf(std::span<const corpus::TokenizedText> texts);

  std::size_t dimension() const override { return dimension_; }
  Embedding embed(std::span<const std::string> tokens) const override;

 private:
  std::size_t dimension_;
  std::uint64_t seed_;
  std::unordered_map<std::string, double> idf_;
  double default_idf_ = 1.0;
};

/// Add-k smoothed word bigram model.
class BigramLanguageModel final : public LanguageModel {
 public:
  explicit BigramLanguageModel(std::span<const corpus::TokenizedText> texts, double k = 0.1);

  std::vector<double> token_logprobs(std::span<const std::string> tokens) const override;
  std::size_t vocabulary_size() const noexcept { return vocab_.size(); }

 private:
  corpus::Vocabulary vocab_;
  double k_;
  std::unordered_map<std::uint64_t, double> bigram_counts_;
  std::vector<double> context_counts_;
};

/// Template-generated headline-like sentences with a vocabulary of a few
/// hundred words.
std::vector<corpus::TokenizedText> synthetic_corpus(std::size_t count, std::uint64_t seed);

}  // namespace rsum::toy
