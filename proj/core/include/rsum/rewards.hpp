#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rsum/models.hpp"

namespace rsum::rewards {

using Tokens = std::span<const std::string>;

struct RewardConfig {
  double sigma_f = 1000.0;
  double sigma_l = 10.0;
  double lambda = 0.01;
  double alpha = 0.3;
  /// Maximum generated length. Zero selects ceil(1.5 * target) per episode.
  int max_gen_len = 0;
  /// Only used by the reconstruction-loss ablation reward.
  std::optional<double> sigma_ae;

  void validate() const;
  int max_len_for(int target_length) const;
};

struct RewardBreakdown {
  double content = 0.0;
  double fluency = 0.0;
  double length = 0.0;
  double quality = 0.0;
  double total = 0.0;

  /// R_C + R_F + R_L, the per-summary reward without multi-summary coupling.
  double base() const noexcept { return content + fluency + length; }
};

/// Plain cosine; zero when either vector has zero norm.
double cosine(std::span<const double> a, std::span<const double> b);
/// (cos + 1) / 2 clamped to [0, 1].
double normalized_similarity(std::span<const double> a, std::span<const double> b);

double content_reward(Tokens y, Tokens t, const TextEmbedder& embedder);

/// exp of the mean negative log-likelihood. An empty sequence has infinite
/// perplexity.
double perplexity(Tokens y, const LanguageModel& lm);
double fluency_from_perplexity(double ppl, double sigma_f);
double fluency_reward(Tokens y, const LanguageModel& lm, double sigma_f);

double length_reward(int actual_len, int target_len, double sigma_l);

/// R_C + R_F + R_L for one summary.
RewardBreakdown reward(Tokens y, Tokens t, int target_len, const RewardConfig& config,
                       const TextEmbedder& embedder, const LanguageModel& lm);

/// Episode reward: the full reward when the episode ends at this action
/// (EOS or step == max_gen_len), zero otherwise.
double terminal_reward(Tokens y, Tokens t, int target_len, int step, bool action_is_eos,
                       const RewardConfig& config, const TextEmbedder& embedder,
                       const LanguageModel& lm);

/// q(y, t) = R_C * R_F.
double summary_quality(Tokens y, Tokens t, const TextEmbedder& embedder, const LanguageModel& lm,
                       const RewardConfig& config);

/// [q_other - q_self]_+^alpha * R_L(other_len, target_len); zero unless the
/// other summary has strictly higher quality.
double usefulness_from_quality(double q_self, double q_other, int other_len, int target_len,
                               const RewardConfig& config);

double usefulness(Tokens y, Tokens y_other, Tokens t, int target_len, const RewardConfig& config,
                  const TextEmbedder& embedder, const LanguageModel& lm);

/// R_Q for summary `index` of `summaries`: lambda * sum over peers of
/// usefulness * R_C(y, peer). Each summary was generated for its own target
/// length, but R_Q for `index` uses that summary's target.
double quality_reward(std::size_t index, std::span<const std::vector<std::string>> summaries,
                      Tokens t, int target_len, const RewardConfig& config,
                      const TextEmbedder& embedder, const LanguageModel& lm);

struct LengthedSummary {
  std::vector<std::string> tokens;
  int target_length = 0;
};

struct TotalReward {
  std::vector<RewardBreakdown> per_summary;
  double total = 0.0;
};

/// R* over one summary per target length. Embeddings and perplexities are
/// computed once per summary.
TotalReward total_reward(std::span<const LengthedSummary> summaries, Tokens t,
                         const RewardConfig& config, const TextEmbedder& embedder,
                         const LanguageModel& lm);

namespace detail {
/// total_reward without the distinct-length precondition. Ratio length sets
/// can resolve to equal word counts on short texts during training.
TotalReward coupled_rewards(std::span<const LengthedSummary> summaries, Tokens t,
                            const RewardConfig& config, const TextEmbedder& embedder,
                            const LanguageModel& lm);
}  // namespace detail

/// exp(-loss / sigma_ae).
double ae_reward(double reconstruction_loss, double sigma_ae);

}  // namespace rsum::rewards
