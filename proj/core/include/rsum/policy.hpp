#pragma once

#include <cstdint>
#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "rsum/corpus.hpp"
#include "rsum/models.hpp"
#include "rsum/rewards.hpp"
#include "rsum/rng.hpp"

namespace rsum::policy {

using corpus::PromptedInput;
using corpus::TokenId;

/// A policy over output symbols {0 .. output_size()-1}; `eos()` is one of
/// them. Word ids share the corpus::Vocabulary numbering.
class ConditionalGenerator {
 public:
  virtual ~ConditionalGenerator() = default;

  virtual std::string backend() const = 0;
  virtual std::size_t output_size() const = 0;
  virtual TokenId eos() const = 0;
  virtual const corpus::Vocabulary& vocabulary() const = 0;

  /// Probabilities over every output symbol given the input and the words
  /// generated so far (EOS never appears in `prefix`).
  virtual std::vector<double> next_token_distribution(const PromptedInput& input,
                                                      std::span<const TokenId> prefix) const = 0;

  /// Per-action log-probabilities for a full action sequence, computed by
  /// sequential next_token_distribution calls. EOS may only be the last action.
  virtual std::vector<double> score_logprob(const PromptedInput& input,
                                            std::span<const TokenId> actions) const;

  /// Trainable parameters. Empty for inference-only backends.
  virtual std::span<double> parameters() { return {}; }
  virtual std::span<const double> parameters() const { return {}; }

  /// grad += weight * d/dtheta sum_t log pi(actions[t] | state_t).
  virtual void accumulate_logprob_gradient(const PromptedInput& input,
                                           std::span<const TokenId> actions, double weight,
                                           std::span<double> grad) const;

  /// Opaque blob; the first line must be the backend name.
  virtual void save(std::ostream& out) const;
};

/// Decoding episode: the prompted input, the words so far, and the number of
/// actions taken. Words never include EOS.
struct EpisodeState {
  const PromptedInput* input = nullptr;
  std::vector<TokenId> prefix;
  int step = 0;
  int max_len = 0;
  TokenId eos = 0;
  bool ended_by_eos = false;
  bool done = false;
};

EpisodeState start_episode(const PromptedInput& input, int max_len, TokenId eos);

/// Transition. EOS ends the episode without extending the prefix; any other
/// action appends. Reaching max_len ends the episode. Throws EpisodeFinished
/// on a finished state.
EpisodeState step(const EpisodeState& state, TokenId action);

struct SummaryCandidate {
  enum class Termination { eos, max_len };

  std::vector<TokenId> ids;
  std::vector<std::string> tokens;
  /// One entry per word, plus a final entry for EOS when terminated by EOS.
  std::vector<double> token_logprobs;
  Termination terminated_by = Termination::eos;

  std::size_t length() const noexcept { return tokens.size(); }
  bool empty() const noexcept { return tokens.empty(); }
  double total_logprob() const noexcept;
  /// Actions as fed to the generator: ids plus EOS if terminated by EOS.
  std::vector<TokenId> actions(TokenId eos) const;
  std::string text() const { return corpus::join(tokens); }
};

/// Ancestral sampling from the full distribution.
SummaryCandidate sample_summary(const ConditionalGenerator& gen, const PromptedInput& input,
                                int max_len, Rng& rng);

/// Argmax decoding; ties go to the lowest id.
SummaryCandidate greedy_summary(const ConditionalGenerator& gen, const PromptedInput& input,
                                int max_len);

/// Length-unnormalized beam search. Returns up to beam_size finished
/// hypotheses ordered by total log-probability, best first.
std::vector<SummaryCandidate> beam_search(const ConditionalGenerator& gen,
                                          const PromptedInput& input, int beam_size, int max_len);

struct PatternConfig {
  std::set<std::string> banned_endings;
  std::set<std::string> banned_anywhere;

  /// Endings {in, at, to, on, the, 's, of, a, for, with, is, into, by, his,
  /// her, when, and, but} and weekdays anywhere.
  static PatternConfig defaults();
};

/// Removes banned_anywhere words, then strips trailing banned_endings words.
/// Log-probabilities follow their words; an EOS entry stays last.
SummaryCandidate filter_patterns(const SummaryCandidate& candidate, const PatternConfig& patterns);

/// R_C + R_F + R_L of a candidate for the given source text.
double selection_score(const SummaryCandidate& candidate, std::span<const std::string> text,
                       int target_len, const TextEmbedder& embedder, const LanguageModel& lm,
                       const rewards::RewardConfig& config);

struct Selection {
  SummaryCandidate summary;
  double score = 0.0;
  std::size_t beam_rank = 0;
};

/// Filters every candidate, discards empties, and keeps the highest selection
/// score (ties: higher beam log-probability). Throws AllCandidatesEmpty.
Selection select_best(std::span<const SummaryCandidate> candidates,
                      std::span<const std::string> text, int target_len,
                      const TextEmbedder& embedder, const LanguageModel& lm,
                      const rewards::RewardConfig& config, const PatternConfig& patterns);

/// Validates a distribution (non-negative, finite, sums to 1 within 1e-6).
void check_distribution(std::span<const double> probs, std::size_t expected_size);

}  // namespace rsum::policy
