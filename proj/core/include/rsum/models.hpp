#pragma once

#include <span>
#include <string>
#include <vector>

namespace rsum {

using Embedding = std::vector<double>;

/// Maps a token sequence to a fixed-dimension vector. Implementations must be
/// deterministic and safe for concurrent const calls.
class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  virtual std::size_t dimension() const = 0;
  virtual Embedding embed(std::span<const std::string> tokens) const = 0;
};

/// Left-to-right language model. `token_logprobs` returns one natural-log
/// probability per input token, each conditioned on the tokens before it.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;
  virtual std::vector<double> token_logprobs(std::span<const std::string> tokens) const = 0;
};

}  // namespace rsum
