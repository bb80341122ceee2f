#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rsum/corpus.hpp"
#include "rsum/optimizer.hpp"
#include "rsum/perturb.hpp"
#include "rsum/policy.hpp"
#include "rsum/rewards.hpp"

namespace rsum::rl {

using corpus::LengthSpec;
using corpus::TokenizedText;
using policy::ConditionalGenerator;
using policy::SummaryCandidate;

enum class TrainMode { msl, single };

TrainMode parse_mode(std::string_view s);
std::string to_string(TrainMode mode);

struct TrainConfig {
  double learning_rate = 5e-5;
  int batch_size = 24;
  double weight_decay = 0.01;
  std::vector<LengthSpec> lengths = default_absolute_lengths();
  TrainMode mode = TrainMode::msl;
  int max_steps = 0;
  std::uint64_t seed = 0;
  /// Validation every N steps (0 disables), over at most validation_limit texts.
  int eval_every = 0;
  std::size_t validation_limit = 500;
  /// Stop after this many validations without a new best mean reward (0 disables).
  int patience = 0;
  int checkpoint_every = 0;

  static std::vector<LengthSpec> default_absolute_lengths();
  static std::vector<LengthSpec> default_ratio_lengths();
  void validate() const;
};

/// Everything reward scoring needs; handles are borrowed.
struct RewardContext {
  const rewards::RewardConfig& config;
  const TextEmbedder& embedder;
  const LanguageModel& lm;
};

struct StepReport {
  int step = 0;
  double mean_sampled_reward = 0;
  double mean_greedy_reward = 0;
  double mean_advantage = 0;
  double mean_content = 0;
  double mean_fluency = 0;
  double mean_length = 0;
  double mean_quality = 0;
  double mean_abs_length_error = 0;
  double loss = 0;
  std::size_t rollouts = 0;

  std::string to_json() const;
  static StepReport from_json(const std::string& line);
  friend bool operator==(const StepReport&, const StepReport&) = default;
};

/// One (text, length) episode pair: a sampled rollout and its greedy baseline.
struct Rollout {
  corpus::PromptedInput input;
  std::size_t text_index = 0;
  std::size_t length_index = 0;
  SummaryCandidate sampled;
  SummaryCandidate greedy;
  rewards::RewardBreakdown sampled_reward;
  rewards::RewardBreakdown greedy_reward;
  double advantage = 0;
};

/// -(r_sampled - r_greedy) * sum of the sampled log-probabilities. The
/// advantage is a constant: nothing flows through rewards or the baseline.
double self_critical_loss(const SummaryCandidate& sampled, const SummaryCandidate& greedy,
                          double r_sampled, double r_greedy);

/// grad += scale * d(self_critical_loss)/d(theta) for a sampled rollout.
void self_critical_gradient(const ConditionalGenerator& gen, const corpus::PromptedInput& input,
                            const SummaryCandidate& sampled, double advantage, double scale,
                            std::span<double> grad);

/// Text-major, length-minor: rollouts[t * |L| + l].
std::vector<Rollout> collect_msl_rollouts(const ConditionalGenerator& gen,
                                          std::span<const TokenizedText> batch,
                                          std::span<const LengthSpec> lengths,
                                          const rewards::RewardConfig& config, Rng& rng);

/// One rollout per text at a length drawn uniformly from `lengths` using
/// `length_rng`.
std::vector<Rollout> collect_single_rollouts(const ConditionalGenerator& gen,
                                             std::span<const TokenizedText> batch,
                                             std::span<const LengthSpec> lengths,
                                             const rewards::RewardConfig& config, Rng& rng,
                                             Rng& length_rng);

/// Sampled rewards include R_Q within the sampled set of each text; greedy
/// rewards include R_Q within the greedy set.
void score_msl(std::span<Rollout> rollouts, std::span<const TokenizedText> batch,
               const RewardContext& ctx);
/// R_C + R_F + R_L only.
void score_single(std::span<Rollout> rollouts, std::span<const TokenizedText> batch,
                  const RewardContext& ctx);

struct PolicyGradient {
  /// One buffer per length index, each accumulated over texts in order.
  std::vector<std::vector<double>> per_length;
  double loss = 0;

  /// Per-length buffers summed in length order.
  std::vector<double> combined() const;
};

/// Gradient of the batch loss (1/batch_size) * sum of self-critical losses.
PolicyGradient policy_gradient(const ConditionalGenerator& gen, std::span<const Rollout> rollouts,
                               std::size_t n_lengths, std::size_t batch_size);

StepReport summarize_step(int step, std::span<const Rollout> rollouts, double loss);

StepReport msl_train_step(ConditionalGenerator& gen, AdamW& optimizer,
                          std::span<const TokenizedText> batch, const TrainConfig& config,
                          const RewardContext& ctx, Rng& rng, int step_index = 0);

StepReport single_train_step(ConditionalGenerator& gen, AdamW& optimizer,
                             std::span<const TokenizedText> batch, const TrainConfig& config,
                             const RewardContext& ctx, Rng& rng, Rng& length_rng,
                             int step_index = 0);

/// Teacher-forced per-token NLL (target words plus EOS) without updating.
double reconstruction_loss(const ConditionalGenerator& gen,
                           std::span<const perturb::ReconstructionPair> batch);

/// One optimizer update on the mean per-token NLL; returns the pre-update loss.
double pretrain_step(ConditionalGenerator& gen, AdamW& optimizer,
                     std::span<const perturb::ReconstructionPair> batch);

struct ValidationReport {
  double mean_length_reward = 0;
  double mean_reward = 0;
  double mean_abs_length_error = 0;
  std::vector<double> abs_length_error_per_length;
  std::vector<double> length_reward_per_length;
};

/// Greedy decoding on every text at every length.
ValidationReport validate(const ConditionalGenerator& gen, std::span<const TokenizedText> texts,
                          std::span<const LengthSpec> lengths, const RewardContext& ctx);

/// Deterministic batch order: epoch e is a permutation seeded from (seed, e).
class BatchSampler {
 public:
  BatchSampler(std::size_t n_items, std::size_t batch_size, std::uint64_t seed);
  std::vector<std::size_t> batch(std::uint64_t step);

 private:
  void ensure_epoch(std::uint64_t epoch);
  std::size_t n_, batch_;
  std::uint64_t seed_;
  std::uint64_t epoch_ = ~std::uint64_t{0};
  std::vector<std::size_t> order_;
};

struct ValidationPoint {
  int step = 0;
  ValidationReport report;
};

struct TrainOptions {
  /// Checkpoint root; empty disables checkpointing.
  std::filesystem::path output_dir;
  /// A step directory to resume from.
  std::optional<std::filesystem::path> resume_from;
  /// Resolved configuration text stored alongside checkpoints.
  std::string config_text;
  std::function<void(const StepReport&)> on_step;
  std::function<void(const ValidationPoint&)> on_validation;
};

struct TrainResult {
  std::vector<StepReport> reports;
  std::vector<ValidationPoint> validation;
  int final_step = 0;
  bool stopped_early = false;
  std::optional<std::filesystem::path> last_checkpoint;
};

/// RL loop: batches of train texts, one msl or single step each, periodic
/// validation and checkpoints, until max_steps or the patience runs out.
TrainResult train(ConditionalGenerator& gen, const TrainConfig& config,
                  const corpus::CorpusSplit& data, const RewardContext& ctx,
                  const TrainOptions& options = {});

struct PretrainConfig {
  double learning_rate = 5e-5;
  double weight_decay = 0.01;
  int batch_size = 24;
  int max_steps = 0;
  std::uint64_t seed = 0;
  int checkpoint_every = 0;
};

struct PretrainResult {
  std::vector<double> losses;
  int final_step = 0;
  std::optional<std::filesystem::path> last_checkpoint;
};

/// Reconstruction pretraining loop over prompted perturbed pairs.
PretrainResult pretrain(ConditionalGenerator& gen, const PretrainConfig& config,
                        std::span<const perturb::ReconstructionPair> data,
                        const TrainOptions& options = {});

}  // namespace rsum::rl
