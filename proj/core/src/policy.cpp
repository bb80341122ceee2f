#include "rsum/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "rsum/error.hpp"

namespace rsum::policy {

void check_distribution(std::span<const double> probs, std::size_t expected_size) {
  if (probs.size() != expected_size)
    throw GeneratorFailure("distribution has " + std::to_string(probs.size()) + " entries, expected " +
                           std::to_string(expected_size));
  double sum = 0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0) throw GeneratorFailure("distribution has an invalid entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw GeneratorFailure("distribution does not sum to 1");
}

std::vector<double> ConditionalGenerator::score_logprob(const PromptedInput& input,
                                                        std::span<const TokenId> actions) const {
  std::vector<double> out;
  out.reserve(actions.size());
  std::vector<TokenId> prefix;
  prefix.reserve(actions.size());
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const TokenId a = actions[i];
    if (a == eos() && i + 1 != actions.size()) throw InvalidArgument("EOS must be the last action");
    const auto probs = next_token_distribution(input, prefix);
    check_distribution(probs, output_size());
    if (a < 0 || static_cast<std::size_t>(a) >= probs.size()) throw InvalidArgument("action out of range");
    out.push_back(std::log(probs[static_cast<std::size_t>(a)]));
    prefix.push_back(a);
  }
  return out;
}

void ConditionalGenerator::accumulate_logprob_gradient(const PromptedInput&, std::span<const TokenId>,
                                                       double, std::span<double>) const {
  throw GeneratorFailure("backend '" + backend() + "' is not trainable");
}

void ConditionalGenerator::save(std::ostream&) const {
  throw GeneratorFailure("backend '" + backend() + "' cannot be serialized");
}

// Episode --------------------------------------------------------------------

EpisodeState start_episode(const PromptedInput& input, int max_len, TokenId eos) {
  if (max_len < 1) throw InvalidArgument("max_len must be >= 1");
  EpisodeState s;
  s.input = &input;
  s.max_len = max_len;
  s.eos = eos;
  return s;
}

EpisodeState step(const EpisodeState& state, TokenId action) {
  if (state.done) throw EpisodeFinished("episode already finished at step " + std::to_string(state.step));
  EpisodeState next = state;
  ++next.step;
  if (action == state.eos) {
    next.ended_by_eos = true;
    next.done = true;
  } else {
    next.prefix.push_back(action);
    next.done = next.step >= next.max_len;
  }
  return next;
}

double SummaryCandidate::total_logprob() const noexcept {
  return std::accumulate(token_logprobs.begin(), token_logprobs.end(), 0.0);
}

std::vector<TokenId> SummaryCandidate::actions(TokenId eos) const {
  std::vector<TokenId> a = ids;
  if (terminated_by == Termination::eos) a.push_back(eos);
  return a;
}

namespace {

SummaryCandidate finish_candidate(const ConditionalGenerator& gen, const EpisodeState& state,
                                  std::vector<double> logprobs) {
  SummaryCandidate c;
  c.ids = state.prefix;
  c.tokens = gen.vocabulary().decode(c.ids);
  c.token_logprobs = std::move(logprobs);
  c.terminated_by = state.ended_by_eos ? SummaryCandidate::Termination::eos
                                       : SummaryCandidate::Termination::max_len;
  return c;
}

template <class Choose>
SummaryCandidate rollout(const ConditionalGenerator& gen, const PromptedInput& input, int max_len,
                         Choose&& choose) {
  auto state = start_episode(input, max_len, gen.eos());
  std::vector<double> logprobs;
  while (!state.done) {
    const auto probs = gen.next_token_distribution(input, state.prefix);
    check_distribution(probs, gen.output_size());
    const auto action = static_cast<TokenId>(choose(probs));
    logprobs.push_back(std::log(probs[static_cast<std::size_t>(action)]));
    state = step(state, action);
  }
  return finish_candidate(gen, state, std::move(logprobs));
}

}  // namespace

SummaryCandidate sample_summary(const ConditionalGenerator& gen, const PromptedInput& input,
                                int max_len, Rng& rng) {
  return rollout(gen, input, max_len, [&rng](const std::vector<double>& probs) {
    const double u = rng.uniform01();
    double cum = 0;
    std::size_t last_positive = 0;
    for (std::size_t v = 0; v < probs.size(); ++v) {
      if (probs[v] <= 0) continue;
      last_positive = v;
      cum += probs[v];
      if (u < cum) return v;
    }
    return last_positive;
  });
}

SummaryCandidate greedy_summary(const ConditionalGenerator& gen, const PromptedInput& input,
                                int max_len) {
  return rollout(gen, input, max_len, [](const std::vector<double>& probs) {
    return static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
  });
}

std::vector<SummaryCandidate> beam_search(const ConditionalGenerator& gen,
                                          const PromptedInput& input, int beam_size, int max_len) {
  if (beam_size < 1) throw InvalidArgument("beam_size must be >= 1");
  if (max_len < 1) throw InvalidArgument("max_len must be >= 1");

  struct Hyp {
    EpisodeState state;
    std::vector<double> logprobs;
    double cum = 0;
    double last = 0;
  };
  const auto k = static_cast<std::size_t>(beam_size);
  std::vector<Hyp> live{Hyp{start_episode(input, max_len, gen.eos()), {}, 0.0, 0.0}};
  std::vector<Hyp> finished;

  auto better = [](const Hyp& a, const Hyp& b) {
    if (a.cum != b.cum) return a.cum > b.cum;
    return a.last > b.last;
  };

  while (!live.empty()) {
    std::vector<Hyp> expansions;
    for (const auto& h : live) {
      const auto probs = gen.next_token_distribution(input, h.state.prefix);
      check_distribution(probs, gen.output_size());
      for (std::size_t v = 0; v < probs.size(); ++v) {
        if (probs[v] <= 0) continue;
        Hyp next{step(h.state, static_cast<TokenId>(v)), h.logprobs, 0.0, std::log(probs[v])};
        next.logprobs.push_back(next.last);
        next.cum = h.cum + next.last;
        expansions.push_back(std::move(next));
      }
    }
    std::stable_sort(expansions.begin(), expansions.end(), better);
    if (expansions.size() > k) expansions.resize(k);

    live.clear();
    for (auto& h : expansions) (h.state.done ? finished : live).push_back(std::move(h));

    std::stable_sort(finished.begin(), finished.end(), better);
    if (finished.size() > k) finished.resize(k);
    if (finished.size() == k && !live.empty()) {
      // Extensions only lower the score, so nothing live can enter the top k.
      const double best_live = live.front().cum;
      if (best_live < finished.back().cum) break;
    }
  }

  std::vector<SummaryCandidate> out;
  out.reserve(finished.size());
  for (auto& h : finished) out.push_back(finish_candidate(gen, h.state, std::move(h.logprobs)));
  return out;
}

// Patterns -------------------------------------------------------------------

PatternConfig PatternConfig::defaults() {
  PatternConfig p;
  p.banned_endings = {"in",   "at", "to",   "on", "the", "'s",   "of",  "a",   "for",
                      "with", "is", "into", "by", "his", "her", "when", "and", "but"};
  p.banned_anywhere = {"sunday", "monday", "tuesday", "wednesday", "thursday", "friday", "saturday"};
  return p;
}

SummaryCandidate filter_patterns(const SummaryCandidate& candidate, const PatternConfig& patterns) {
  SummaryCandidate out;
  out.terminated_by = candidate.terminated_by;
  const bool has_eos_entry = candidate.token_logprobs.size() > candidate.tokens.size();
  for (std::size_t i = 0; i < candidate.tokens.size(); ++i) {
    if (patterns.banned_anywhere.count(candidate.tokens[i])) continue;
    out.tokens.push_back(candidate.tokens[i]);
    if (i < candidate.ids.size()) out.ids.push_back(candidate.ids[i]);
    if (i < candidate.token_logprobs.size()) out.token_logprobs.push_back(candidate.token_logprobs[i]);
  }
  while (!out.tokens.empty() && patterns.banned_endings.count(out.tokens.back())) {
    out.tokens.pop_back();
    if (!out.ids.empty()) out.ids.pop_back();
    if (!out.token_logprobs.empty()) out.token_logprobs.pop_back();
  }
  if (has_eos_entry) out.token_logprobs.push_back(candidate.token_logprobs.back());
  return out;
}

double selection_score(const SummaryCandidate& candidate, std::span<const std::string> text,
                       int target_len, const TextEmbedder& embedder, const LanguageModel& lm,
                       const rewards::RewardConfig& config) {
  return rewards::reward(candidate.tokens, text, target_len, config, embedder, lm).base();
}

Selection select_best(std::span<const SummaryCandidate> candidates,
                      std::span<const std::string> text, int target_len,
                      const TextEmbedder& embedder, const LanguageModel& lm,
                      const rewards::RewardConfig& config, const PatternConfig& patterns) {
  if (candidates.empty()) throw AllCandidatesEmpty("no candidates to select from");
  bool found = false;
  Selection best;
  double best_logprob = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    auto filtered = filter_patterns(candidates[i], patterns);
    if (filtered.empty()) continue;
    const double score = selection_score(filtered, text, target_len, embedder, lm, config);
    const double logprob = candidates[i].total_logprob();
    if (!found || score > best.score || (score == best.score && logprob > best_logprob)) {
      best = Selection{std::move(filtered), score, i};
      best_logprob = logprob;
      found = true;
    }
  }
  if (!found) throw AllCandidatesEmpty("every candidate is empty after pattern filtering");
  return best;
}

}  // namespace rsum::policy
