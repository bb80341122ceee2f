#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>

#include "rsum/corpus.hpp"
#include "rsum/models.hpp"
#include "rsum/policy.hpp"
#include "rsum/toy.hpp"

// Backend identifiers are opaque strings:
//
//   generator:  "toy"                 built-in log-linear policy
//               "http://host:port"    remote policy (inference only)
//   embedder:   "hash-bow"            hashed bag of words, idf-weighted
//               "hash-bow-plain"      same, unweighted
//               "hash-bow:<seed>"     idf-weighted with a different hash seed
//               "http://host:port"    remote embedder
//   lm:         "bigram"              add-k bigram model fit on the corpus
//               "http://host:port"    remote language model
//
// Remote JSON protocol (POST bodies / responses):
//   /embed      {"tokens":[...]}                    -> {"embedding":[...]}
//   /logprobs   {"tokens":[...]}                    -> {"logprobs":[...]}
//   /next       {"input":"8: text","prefix":[ids]}  -> {"probs":[...]}
//   /info       {}                                  -> {"dimension":n} or
//                                                      {"vocabulary":[...]}
namespace rsum::backends {

std::unique_ptr<TextEmbedder> make_embedder(const std::string& id,
                                            std::span<const corpus::TokenizedText> fit_corpus);

std::unique_ptr<LanguageModel> make_language_model(const std::string& id,
                                                   std::span<const corpus::TokenizedText> corpus);

std::unique_ptr<policy::ConditionalGenerator> make_generator(
    const std::string& id, const corpus::Vocabulary& vocabulary,
    const toy::ToyGenerator::Options& toy_options = {});

/// Reads a generator blob written by ConditionalGenerator::save.
std::unique_ptr<policy::ConditionalGenerator> load_generator(const std::filesystem::path& blob);

bool is_remote(const std::string& id);

class RemoteEmbedder final : public TextEmbedder {
 public:
  explicit RemoteEmbedder(std::string url);
  std::size_t dimension() const override { return dimension_; }
  Embedding embed(std::span<const std::string> tokens) const override;

 private:
  std::string url_;
  std::size_t dimension_ = 0;
};

class RemoteLanguageModel final : public LanguageModel {
 public:
  explicit RemoteLanguageModel(std::string url);
  std::vector<double> token_logprobs(std::span<const std::string> tokens) const override;

 private:
  std::string url_;
};

/// Inference-only adapter to an externally served policy. The vocabulary is
/// fetched from /info; EOS is the id one past the last word.
class RemoteGenerator final : public policy::ConditionalGenerator {
 public:
  explicit RemoteGenerator(std::string url);

  std::string backend() const override { return url_; }
  std::size_t output_size() const override { return vocab_.size() + 1; }
  corpus::TokenId eos() const override { return static_cast<corpus::TokenId>(vocab_.size()); }
  const corpus::Vocabulary& vocabulary() const override { return vocab_; }
  std::vector<double> next_token_distribution(const corpus::PromptedInput& input,
                                              std::span<const corpus::TokenId> prefix) const override;
  void save(std::ostream& out) const override;

 private:
  std::string url_;
  corpus::Vocabulary vocab_;
};

}  // namespace rsum::backends
