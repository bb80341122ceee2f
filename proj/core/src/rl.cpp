#include "rsum/rl.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <numeric>

#include "rsum/checkpoint.hpp"
#include "rsum/error.hpp"

namespace rsum::rl {

using nlohmann::json;

namespace {

constexpr std::uint64_t kLengthStreamSalt = 0x4C454E475448ULL;
constexpr std::uint64_t kEpochSalt = 0xE90C4ULL;

double mean(double sum, std::size_t n) { return n ? sum / static_cast<double>(n) : 0.0; }

}  // namespace

TrainMode parse_mode(std::string_view s) {
  if (s == "msl") return TrainMode::msl;
  if (s == "single") return TrainMode::single;
  throw ConfigError("unknown training mode '" + std::string(s) + "' (expected msl or single)");
}

std::string to_string(TrainMode mode) { return mode == TrainMode::msl ? "msl" : "single"; }

std::vector<LengthSpec> TrainConfig::default_absolute_lengths() {
  return {LengthSpec::absolute(8), LengthSpec::absolute(10), LengthSpec::absolute(13)};
}

std::vector<LengthSpec> TrainConfig::default_ratio_lengths() {
  return {LengthSpec::ratio(0.3), LengthSpec::ratio(0.4), LengthSpec::ratio(0.5)};
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (weight_decay < 0) throw ConfigError("weight_decay must be non-negative");
  if (lengths.empty()) throw ConfigError("at least one target length is required");
  if (max_steps < 0) throw ConfigError("max_steps must be non-negative");
  if (eval_every < 0 || patience < 0 || checkpoint_every < 0)
    throw ConfigError("eval_every, patience and checkpoint_every must be non-negative");
}

// StepReport -----------------------------------------------------------------

std::string StepReport::to_json() const {
  json j = {{"step", step},
            {"mean_sampled_reward", mean_sampled_reward},
            {"mean_greedy_reward", mean_greedy_reward},
            {"mean_advantage", mean_advantage},
            {"mean_content", mean_content},
            {"mean_fluency", mean_fluency},
            {"mean_length", mean_length},
            {"mean_quality", mean_quality},
            {"mean_abs_length_error", mean_abs_length_error},
            {"loss", loss},
            {"rollouts", rollouts}};
  return j.dump();
}

StepReport StepReport::from_json(const std::string& line) {
  const auto j = json::parse(line);
  StepReport r;
  r.step = j.at("step").get<int>();
  r.mean_sampled_reward = j.at("mean_sampled_reward").get<double>();
  r.mean_greedy_reward = j.at("mean_greedy_reward").get<double>();
  r.mean_advantage = j.at("mean_advantage").get<double>();
  r.mean_content = j.at("mean_content").get<double>();
  r.mean_fluency = j.at("mean_fluency").get<double>();
  r.mean_length = j.at("mean_length").get<double>();
  r.mean_quality = j.at("mean_quality").get<double>();
  r.mean_abs_length_error = j.at("mean_abs_length_error").get<double>();
  r.loss = j.at("loss").get<double>();
  r.rollouts = j.at("rollouts").get<std::size_t>();
  return r;
}

// Self-critical objective ----------------------------------------------------

double self_critical_loss(const SummaryCandidate& sampled, const SummaryCandidate&,
                          double r_sampled, double r_greedy) {
  return -(r_sampled - r_greedy) * sampled.total_logprob();
}

void self_critical_gradient(const ConditionalGenerator& gen, const corpus::PromptedInput& input,
                            const SummaryCandidate& sampled, double advantage, double scale,
                            std::span<double> grad) {
  if (advantage == 0.0) return;
  gen.accumulate_logprob_gradient(input, sampled.actions(gen.eos()), -advantage * scale, grad);
}

// Rollouts -------------------------------------------------------------------

namespace {

Rollout make_rollout(const ConditionalGenerator& gen, const TokenizedText& text, std::size_t text_index,
                     std::size_t length_index, const LengthSpec& spec,
                     const rewards::RewardConfig& config, Rng& rng) {
  Rollout r;
  r.input = corpus::make_prompted_input(text, spec);
  r.text_index = text_index;
  r.length_index = length_index;
  const int max_len = config.max_len_for(r.input.target_length);
  r.sampled = policy::sample_summary(gen, r.input, max_len, rng);
  r.greedy = policy::greedy_summary(gen, r.input, max_len);
  return r;
}

}  // namespace

std::vector<Rollout> collect_msl_rollouts(const ConditionalGenerator& gen,
                                          std::span<const TokenizedText> batch,
                                          std::span<const LengthSpec> lengths,
                                          const rewards::RewardConfig& config, Rng& rng) {
  std::vector<Rollout> out;
  out.reserve(batch.size() * lengths.size());
  for (std::size_t t = 0; t < batch.size(); ++t)
    for (std::size_t l = 0; l < lengths.size(); ++l)
      out.push_back(make_rollout(gen, batch[t], t, l, lengths[l], config, rng));
  return out;
}

std::vector<Rollout> collect_single_rollouts(const ConditionalGenerator& gen,
                                             std::span<const TokenizedText> batch,
                                             std::span<const LengthSpec> lengths,
                                             const rewards::RewardConfig& config, Rng& rng,
                                             Rng& length_rng) {
  if (lengths.empty()) throw InvalidArgument("no target lengths");
  std::vector<Rollout> out;
  out.reserve(batch.size());
  for (std::size_t t = 0; t < batch.size(); ++t) {
    const auto l = static_cast<std::size_t>(length_rng.uniform_index(lengths.size()));
    out.push_back(make_rollout(gen, batch[t], t, l, lengths[l], config, rng));
  }
  return out;
}

void score_msl(std::span<Rollout> rollouts, std::span<const TokenizedText> batch,
               const RewardContext& ctx) {
  std::size_t i = 0;
  while (i < rollouts.size()) {
    std::size_t j = i;
    while (j < rollouts.size() && rollouts[j].text_index == rollouts[i].text_index) ++j;
    const auto& text = batch[rollouts[i].text_index].tokens;
    std::vector<rewards::LengthedSummary> sampled, greedy;
    for (std::size_t k = i; k < j; ++k) {
      sampled.push_back({rollouts[k].sampled.tokens, rollouts[k].input.target_length});
      greedy.push_back({rollouts[k].greedy.tokens, rollouts[k].input.target_length});
    }
    const auto rs = rewards::detail::coupled_rewards(sampled, text, ctx.config, ctx.embedder, ctx.lm);
    const auto rg = rewards::detail::coupled_rewards(greedy, text, ctx.config, ctx.embedder, ctx.lm);
    for (std::size_t k = i; k < j; ++k) {
      rollouts[k].sampled_reward = rs.per_summary[k - i];
      rollouts[k].greedy_reward = rg.per_summary[k - i];
      rollouts[k].advantage = rollouts[k].sampled_reward.total - rollouts[k].greedy_reward.total;
    }
    i = j;
  }
}

void score_single(std::span<Rollout> rollouts, std::span<const TokenizedText> batch,
                  const RewardContext& ctx) {
  for (auto& r : rollouts) {
    const auto& text = batch[r.text_index].tokens;
    r.sampled_reward = rewards::reward(r.sampled.tokens, text, r.input.target_length, ctx.config,
                                       ctx.embedder, ctx.lm);
    r.greedy_reward = rewards::reward(r.greedy.tokens, text, r.input.target_length, ctx.config,
                                      ctx.embedder, ctx.lm);
    r.advantage = r.sampled_reward.total - r.greedy_reward.total;
  }
}

std::vector<double> PolicyGradient::combined() const {
  if (per_length.empty()) return {};
  std::vector<double> g = per_length.front();
  for (std::size_t l = 1; l < per_length.size(); ++l)
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += per_length[l][i];
  return g;
}

PolicyGradient policy_gradient(const ConditionalGenerator& gen, std::span<const Rollout> rollouts,
                               std::size_t n_lengths, std::size_t batch_size) {
  if (batch_size == 0) throw InvalidArgument("empty batch");
  PolicyGradient pg;
  pg.per_length.assign(n_lengths, std::vector<double>(gen.parameters().size(), 0.0));
  const double scale = 1.0 / static_cast<double>(batch_size);
  for (const auto& r : rollouts) {
    if (r.length_index >= n_lengths) throw InvalidArgument("rollout length index out of range");
    self_critical_gradient(gen, r.input, r.sampled, r.advantage, scale, pg.per_length[r.length_index]);
    pg.loss += scale * self_critical_loss(r.sampled, r.greedy, r.sampled_reward.total,
                                          r.greedy_reward.total);
  }
  return pg;
}

StepReport summarize_step(int step, std::span<const Rollout> rollouts, double loss) {
  StepReport rep;
  rep.step = step;
  rep.loss = loss;
  rep.rollouts = rollouts.size();
  double s = 0, g = 0, a = 0, c = 0, f = 0, l = 0, q = 0, e = 0;
  for (const auto& r : rollouts) {
    s += r.sampled_reward.total;
    g += r.greedy_reward.total;
    a += r.advantage;
    c += r.sampled_reward.content;
    f += r.sampled_reward.fluency;
    l += r.sampled_reward.length;
    q += r.sampled_reward.quality;
    e += std::abs(static_cast<double>(r.sampled.length()) - r.input.target_length);
  }
  const std::size_t n = rollouts.size();
  rep.mean_sampled_reward = mean(s, n);
  rep.mean_greedy_reward = mean(g, n);
  rep.mean_advantage = mean(a, n);
  rep.mean_content = mean(c, n);
  rep.mean_fluency = mean(f, n);
  rep.mean_length = mean(l, n);
  rep.mean_quality = mean(q, n);
  rep.mean_abs_length_error = mean(e, n);
  return rep;
}

StepReport msl_train_step(ConditionalGenerator& gen, AdamW& optimizer,
                          std::span<const TokenizedText> batch, const TrainConfig& config,
                          const RewardContext& ctx, Rng& rng, int step_index) {
  auto rollouts = collect_msl_rollouts(gen, batch, config.lengths, ctx.config, rng);
  score_msl(rollouts, batch, ctx);
  const auto pg = policy_gradient(gen, rollouts, config.lengths.size(), batch.size());
  optimizer.step(gen.parameters(), pg.combined());
  return summarize_step(step_index, rollouts, pg.loss);
}

StepReport single_train_step(ConditionalGenerator& gen, AdamW& optimizer,
                             std::span<const TokenizedText> batch, const TrainConfig& config,
                             const RewardContext& ctx, Rng& rng, Rng& length_rng, int step_index) {
  auto rollouts = collect_single_rollouts(gen, batch, config.lengths, ctx.config, rng, length_rng);
  score_single(rollouts, batch, ctx);
  const auto pg = policy_gradient(gen, rollouts, config.lengths.size(), batch.size());
  optimizer.step(gen.parameters(), pg.combined());
  return summarize_step(step_index, rollouts, pg.loss);
}

// Pretraining ----------------------------------------------------------------

namespace {

std::vector<corpus::TokenId> target_actions(const ConditionalGenerator& gen,
                                            const perturb::ReconstructionPair& pair) {
  auto ids = gen.vocabulary().encode(pair.target.tokens);
  ids.push_back(gen.eos());
  return ids;
}

}  // namespace

double reconstruction_loss(const ConditionalGenerator& gen,
                           std::span<const perturb::ReconstructionPair> batch) {
  double nll = 0;
  std::size_t tokens = 0;
  for (const auto& pair : batch) {
    const auto actions = target_actions(gen, pair);
    for (double lp : gen.score_logprob(pair.input, actions)) nll -= lp;
    tokens += actions.size();
  }
  return mean(nll, tokens);
}

double pretrain_step(ConditionalGenerator& gen, AdamW& optimizer,
                     std::span<const perturb::ReconstructionPair> batch) {
  if (batch.empty()) throw InvalidArgument("empty pretraining batch");
  std::size_t tokens = 0;
  for (const auto& pair : batch) tokens += pair.target.size() + 1;
  const double weight = -1.0 / static_cast<double>(tokens);
  const double loss = reconstruction_loss(gen, batch);
  std::vector<double> grad(gen.parameters().size(), 0.0);
  for (const auto& pair : batch)
    gen.accumulate_logprob_gradient(pair.input, target_actions(gen, pair), weight, grad);
  optimizer.step(gen.parameters(), grad);
  return loss;
}

// Validation -----------------------------------------------------------------

ValidationReport validate(const ConditionalGenerator& gen, std::span<const TokenizedText> texts,
                          std::span<const LengthSpec> lengths, const RewardContext& ctx) {
  ValidationReport rep;
  rep.abs_length_error_per_length.assign(lengths.size(), 0.0);
  rep.length_reward_per_length.assign(lengths.size(), 0.0);
  if (texts.empty() || lengths.empty()) return rep;
  double reward_sum = 0;
  for (const auto& text : texts) {
    for (std::size_t l = 0; l < lengths.size(); ++l) {
      const auto input = corpus::make_prompted_input(text, lengths[l]);
      const auto summary =
          policy::greedy_summary(gen, input, ctx.config.max_len_for(input.target_length));
      const auto r = rewards::reward(summary.tokens, text.tokens, input.target_length, ctx.config,
                                     ctx.embedder, ctx.lm);
      reward_sum += r.total;
      rep.length_reward_per_length[l] += r.length;
      rep.abs_length_error_per_length[l] +=
          std::abs(static_cast<double>(summary.length()) - input.target_length);
    }
  }
  const double n = static_cast<double>(texts.size());
  for (std::size_t l = 0; l < lengths.size(); ++l) {
    rep.length_reward_per_length[l] /= n;
    rep.abs_length_error_per_length[l] /= n;
  }
  const double k = static_cast<double>(lengths.size());
  rep.mean_length_reward =
      std::accumulate(rep.length_reward_per_length.begin(), rep.length_reward_per_length.end(), 0.0) / k;
  rep.mean_abs_length_error =
      std::accumulate(rep.abs_length_error_per_length.begin(), rep.abs_length_error_per_length.end(), 0.0) / k;
  rep.mean_reward = reward_sum / (n * k);
  return rep;
}

// BatchSampler ---------------------------------------------------------------

BatchSampler::BatchSampler(std::size_t n_items, std::size_t batch_size, std::uint64_t seed)
    : n_(n_items), batch_(batch_size), seed_(seed) {
  if (n_ == 0) throw InvalidArgument("cannot sample batches from an empty set");
  if (batch_ == 0) throw InvalidArgument("batch size must be positive");
}

void BatchSampler::ensure_epoch(std::uint64_t epoch) {
  if (epoch == epoch_) return;
  order_.resize(n_);
  std::iota(order_.begin(), order_.end(), 0);
  Rng rng(seed_ ^ (kEpochSalt * (epoch + 1)));
  for (std::size_t i = n_ - 1; i > 0; --i) std::swap(order_[i], order_[rng.uniform_index(i + 1)]);
  epoch_ = epoch;
}

std::vector<std::size_t> BatchSampler::batch(std::uint64_t step) {
  std::vector<std::size_t> out;
  out.reserve(batch_);
  for (std::size_t i = 0; i < batch_; ++i) {
    const std::uint64_t pos = step * batch_ + i;
    ensure_epoch(pos / n_);
    out.push_back(order_[pos % n_]);
  }
  return out;
}

// Training loops -------------------------------------------------------------

namespace {

json rng_to_json(const Rng& rng) { return json(rng.state()); }

void rng_from_json(const json& j, Rng& rng) { rng.set_state(j.get<std::array<std::uint64_t, 4>>()); }

template <class T>
std::vector<T> gather(std::span<const T> items, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(items[i]);
  return out;
}

}  // namespace

TrainResult train(ConditionalGenerator& gen, const TrainConfig& config,
                  const corpus::CorpusSplit& data, const RewardContext& ctx,
                  const TrainOptions& options) {
  config.validate();
  ctx.config.validate();
  if (gen.parameters().empty()) throw GeneratorFailure("backend '" + gen.backend() + "' is not trainable");
  AdamW optimizer(gen.parameters().size(), {config.learning_rate, config.weight_decay});
  Rng rng(config.seed);
  Rng length_rng(config.seed ^ kLengthStreamSalt);
  BatchSampler sampler(data.train.size(), static_cast<std::size_t>(config.batch_size), config.seed);

  TrainResult result;
  int start = 0;
  double best = -std::numeric_limits<double>::infinity();
  int stale = 0;
  if (options.resume_from) {
    const auto& dir = *options.resume_from;
    checkpoint::load_parameters(dir, gen);
    checkpoint::load_optimizer(dir, optimizer);
    const auto state = json::parse(checkpoint::read_text(dir / "state.json"));
    rng_from_json(state.at("rng"), rng);
    rng_from_json(state.at("length_rng"), length_rng);
    best = state.value("best_validation", best);
    stale = state.value("stale_validations", 0);
    start = checkpoint::read_manifest(dir).step;
    for (const auto& line : checkpoint::read_report_lines(dir))
      result.reports.push_back(StepReport::from_json(line));
  }

  const std::vector<TokenizedText> val_texts(
      data.validation.begin(),
      data.validation.begin() +
          static_cast<std::ptrdiff_t>(std::min(config.validation_limit, data.validation.size())));

  auto save = [&](int step) {
    if (options.output_dir.empty()) return;
    json state = {{"rng", rng_to_json(rng)},
                  {"length_rng", rng_to_json(length_rng)},
                  {"stale_validations", stale}};
    if (std::isfinite(best)) state["best_validation"] = best;
    checkpoint::Contents c;
    c.generator = &gen;
    c.manifest = {gen.backend(), "rl", checkpoint::config_hash(options.config_text),
                  gen.vocabulary().size(), step};
    c.optimizer = &optimizer;
    c.state_json = state.dump();
    for (const auto& r : result.reports) c.report_lines.push_back(r.to_json());
    c.config_text = options.config_text;
    result.last_checkpoint = checkpoint::write(options.output_dir, c);
  };

  auto run_validation = [&](int step) {
    if (config.eval_every == 0 || val_texts.empty()) return false;
    ValidationPoint p{step, validate(gen, val_texts, config.lengths, ctx)};
    if (options.on_validation) options.on_validation(p);
    result.validation.push_back(p);
    if (p.report.mean_reward > best) {
      best = p.report.mean_reward;
      stale = 0;
    } else if (step > 0) {
      ++stale;
    }
    return config.patience > 0 && stale >= config.patience;
  };

  if (start == 0) run_validation(0);
  int step = start;
  for (; step < config.max_steps; ++step) {
    const auto batch = gather<TokenizedText>(data.train, sampler.batch(static_cast<std::uint64_t>(step)));
    StepReport rep = config.mode == TrainMode::msl
                         ? msl_train_step(gen, optimizer, batch, config, ctx, rng, step + 1)
                         : single_train_step(gen, optimizer, batch, config, ctx, rng, length_rng, step + 1);
    result.reports.push_back(rep);
    if (options.on_step) options.on_step(rep);
    const int done = step + 1;
    bool stop = false;
    if (config.eval_every > 0 && done % config.eval_every == 0) stop = run_validation(done);
    if (config.checkpoint_every > 0 && done % config.checkpoint_every == 0 && done != config.max_steps)
      save(done);
    if (stop) {
      result.stopped_early = true;
      ++step;
      break;
    }
  }
  result.final_step = step;
  save(step);
  return result;
}

PretrainResult pretrain(ConditionalGenerator& gen, const PretrainConfig& config,
                        std::span<const perturb::ReconstructionPair> data,
                        const TrainOptions& options) {
  if (config.max_steps < 0 || config.batch_size < 1) throw ConfigError("invalid pretraining schedule");
  if (gen.parameters().empty()) throw GeneratorFailure("backend '" + gen.backend() + "' is not trainable");
  AdamW optimizer(gen.parameters().size(), {config.learning_rate, config.weight_decay});
  PretrainResult result;
  int start = 0;
  if (options.resume_from) {
    checkpoint::load_parameters(*options.resume_from, gen);
    checkpoint::load_optimizer(*options.resume_from, optimizer);
    start = checkpoint::read_manifest(*options.resume_from).step;
    for (const auto& line : checkpoint::read_report_lines(*options.resume_from))
      result.losses.push_back(json::parse(line).at("loss").get<double>());
  }
  if (data.empty() && config.max_steps > start) throw InvalidArgument("no pretraining data");

  auto save = [&](int step) {
    if (options.output_dir.empty()) return;
    checkpoint::Contents c;
    c.generator = &gen;
    c.manifest = {gen.backend(), "pretrain", checkpoint::config_hash(options.config_text),
                  gen.vocabulary().size(), step};
    c.optimizer = &optimizer;
    for (std::size_t i = 0; i < result.losses.size(); ++i)
      c.report_lines.push_back(json({{"step", i + 1}, {"loss", result.losses[i]}}).dump());
    c.config_text = options.config_text;
    result.last_checkpoint = checkpoint::write(options.output_dir, c);
  };

  std::optional<BatchSampler> sampler;
  if (!data.empty()) sampler.emplace(data.size(), static_cast<std::size_t>(config.batch_size), config.seed);
  for (int step = start; step < config.max_steps; ++step) {
    const auto batch = gather<perturb::ReconstructionPair>(data, sampler->batch(static_cast<std::uint64_t>(step)));
    result.losses.push_back(pretrain_step(gen, optimizer, batch));
    const int done = step + 1;
    if (config.checkpoint_every > 0 && done % config.checkpoint_every == 0 && done != config.max_steps)
      save(done);
  }
  result.final_step = std::max(start, config.max_steps);
  save(result.final_step);
  return result;
}

}  // namespace rsum::rl
