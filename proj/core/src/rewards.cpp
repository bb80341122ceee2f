#include "rsum/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "rsum/error.hpp"

namespace rsum::rewards {

namespace {

Embedding checked_embed(const TextEmbedder& embedder, Tokens tokens) {
  Embedding e = embedder.embed(tokens);
  if (e.size() != embedder.dimension())
    throw EmbedderFailure("embedding has dimension " + std::to_string(e.size()) + ", expected " +
                          std::to_string(embedder.dimension()));
  for (double x : e)
    if (!std::isfinite(x)) throw EmbedderFailure("embedding has a non-finite entry");
  return e;
}

double finish(RewardBreakdown& b) {
  b.total = b.content + b.fluency + b.length + b.quality;
  return b.total;
}

}  // namespace

void RewardConfig::validate() const {
  if (!(sigma_f > 0)) throw ConfigError("sigma_f must be positive");
  if (!(sigma_l > 0)) throw ConfigError("sigma_l must be positive");
  if (!(lambda >= 0 && lambda <= 1)) throw ConfigError("lambda must lie in [0, 1]");
  if (!(alpha >= 0)) throw ConfigError("alpha must be non-negative");
  if (max_gen_len < 0) throw ConfigError("max_gen_len must be non-negative");
  if (sigma_ae && !(*sigma_ae > 0)) throw ConfigError("sigma_ae must be positive");
}

int RewardConfig::max_len_for(int target_length) const {
  if (max_gen_len > 0) return max_gen_len;
  return std::max(1, (3 * target_length + 1) / 2);
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw EmbedderFailure("embedding dimensions differ");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

double normalized_similarity(std::span<const double> a, std::span<const double> b) {
  return (cosine(a, b) + 1.0) / 2.0;
}

double content_reward(Tokens y, Tokens t, const TextEmbedder& embedder) {
  return normalized_similarity(checked_embed(embedder, y), checked_embed(embedder, t));
}

double perplexity(Tokens y, const LanguageModel& lm) {
  if (y.empty()) return std::numeric_limits<double>::infinity();
  const auto logps = lm.token_logprobs(y);
  if (logps.size() != y.size())
    throw LanguageModelFailure("scored " + std::to_string(logps.size()) + " of " +
                               std::to_string(y.size()) + " tokens");
  double sum = 0;
  for (double lp : logps) {
    if (std::isnan(lp) || lp > 0) throw LanguageModelFailure("log-probability out of range");
    sum += lp;
  }
  return std::exp(-sum / static_cast<double>(y.size()));
}

double fluency_from_perplexity(double ppl, double sigma_f) { return std::exp(-ppl / sigma_f); }

double fluency_reward(Tokens y, const LanguageModel& lm, double sigma_f) {
  return fluency_from_perplexity(perplexity(y, lm), sigma_f);
}

double length_reward(int actual_len, int target_len, double sigma_l) {
  return std::exp(-std::abs(static_cast<double>(actual_len - target_len)) / sigma_l);
}

RewardBreakdown reward(Tokens y, Tokens t, int target_len, const RewardConfig& config,
                       const TextEmbedder& embedder, const LanguageModel& lm) {
  RewardBreakdown b;
  b.content = content_reward(y, t, embedder);
  b.fluency = fluency_reward(y, lm, config.sigma_f);
  b.length = length_reward(static_cast<int>(y.size()), target_len, config.sigma_l);
  finish(b);
  return b;
}

double terminal_reward(Tokens y, Tokens t, int target_len, int step, bool action_is_eos,
                       const RewardConfig& config, const TextEmbedder& embedder,
                       const LanguageModel& lm) {
  const int max_len = config.max_len_for(target_len);
  if (step > max_len) throw InvalidArgument("step beyond the maximum generation length");
  if (!action_is_eos && step != max_len) return 0.0;
  return reward(y, t, target_len, config, embedder, lm).total;
}

double summary_quality(Tokens y, Tokens t, const TextEmbedder& embedder, const LanguageModel& lm,
                       const RewardConfig& config) {
  return content_reward(y, t, embedder) * fluency_reward(y, lm, config.sigma_f);
}

double usefulness_from_quality(double q_self, double q_other, int other_len, int target_len,
                               const RewardConfig& config) {
  const double gap = q_other - q_self;
  if (!(gap > 0)) return 0.0;
  return std::pow(gap, config.alpha) * length_reward(other_len, target_len, config.sigma_l);
}

double usefulness(Tokens y, Tokens y_other, Tokens t, int target_len, const RewardConfig& config,
                  const TextEmbedder& embedder, const LanguageModel& lm) {
  return usefulness_from_quality(summary_quality(y, t, embedder, lm, config),
                                 summary_quality(y_other, t, embedder, lm, config),
                                 static_cast<int>(y_other.size()), target_len, config);
}

double quality_reward(std::size_t index, std::span<const std::vector<std::string>> summaries,
                      Tokens t, int target_len, const RewardConfig& config,
                      const TextEmbedder& embedder, const LanguageModel& lm) {
  if (index >= summaries.size()) throw InvalidArgument("summary index out of range");
  const auto& y = summaries[index];
  double sum = 0;
  for (std::size_t j = 0; j < summaries.size(); ++j) {
    if (j == index) continue;
    const double u = usefulness(y, summaries[j], t, target_len, config, embedder, lm);
    if (u == 0.0) continue;
    sum += u * content_reward(y, summaries[j], embedder);
  }
  return config.lambda * sum;
}

TotalReward total_reward(std::span<const LengthedSummary> summaries, Tokens t,
                         const RewardConfig& config, const TextEmbedder& embedder,
                         const LanguageModel& lm) {
  std::set<int> targets;
  for (const auto& s : summaries)
    if (!targets.insert(s.target_length).second)
      throw InvalidArgument("target lengths must be distinct");
  return detail::coupled_rewards(summaries, t, config, embedder, lm);
}

TotalReward detail::coupled_rewards(std::span<const LengthedSummary> summaries, Tokens t,
                                    const RewardConfig& config, const TextEmbedder& embedder,
                                    const LanguageModel& lm) {
  const Embedding text_embedding = checked_embed(embedder, t);
  const std::size_t n = summaries.size();
  std::vector<Embedding> emb(n);
  std::vector<double> quality(n);
  TotalReward out;
  out.per_summary.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = summaries[i];
    auto& b = out.per_summary[i];
    emb[i] = checked_embed(embedder, s.tokens);
    b.content = normalized_similarity(emb[i], text_embedding);
    b.fluency = fluency_reward(s.tokens, lm, config.sigma_f);
    b.length = length_reward(static_cast<int>(s.tokens.size()), s.target_length, config.sigma_l);
    quality[i] = b.content * b.fluency;
  }
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double u =
          usefulness_from_quality(quality[i], quality[j],
                                  static_cast<int>(summaries[j].tokens.size()),
                                  summaries[i].target_length, config);
      if (u == 0.0) continue;
      sum += u * normalized_similarity(emb[i], emb[j]);
    }
    out.per_summary[i].quality = config.lambda * sum;
  }
  for (auto& b : out.per_summary) out.total += finish(b);
  return out;
}

double ae_reward(double reconstruction_loss, double sigma_ae) {
  if (reconstruction_loss < 0) throw InvalidArgument("reconstruction loss must be non-negative");
  if (!(sigma_ae > 0)) throw InvalidArgument("sigma_ae must be positive");
  return std::exp(-reconstruction_loss / sigma_ae);
}

}  // namespace rsum::rewards
