#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rsum/corpus.hpp"
#include "rsum/rng.hpp"

namespace rsum::perturb {

using corpus::PromptedInput;
using corpus::TokenizedText;

struct PerturbConfig {
  double shuffle_ratio = 0.10;
  double drop_ratio = 0.10;
  double add_ratio = 1.00;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument unless every ratio is in [0, 2].
  void validate() const;
};

/// Tokens previously at `sources[i]` now sit at `positions[i]`. Both lists
/// refer to indices of the stage input; `positions` is ascending.
struct ShuffleOp {
  std::vector<std::size_t> positions;
  std::vector<std::size_t> sources;
};

/// Ascending indices (into the stage input) that were removed.
struct DropOp {
  std::vector<std::size_t> positions;
};

/// One token inserted before index `slot` of the current sequence.
struct InsertOp {
  std::size_t slot = 0;
  std::string token;
};

using Operation = std::variant<ShuffleOp, DropOp, InsertOp>;

struct PerturbationRecord {
  TokenizedText original;
  PromptedInput perturbed;
  std::vector<Operation> oplog;
};

/// Number of affected words for a ratio: round-half-up of ratio * length.
std::size_t stage_count(double ratio, std::size_t length) noexcept;

/// Draws `k` distinct indices in [0, n) by a partial Fisher-Yates pass and
/// returns them ascending.
std::vector<std::size_t> choose_positions(std::size_t n, std::size_t k, Rng& rng);

TokenizedText shuffle_words(const TokenizedText& text, double ratio, Rng& rng);
TokenizedText drop_words(const TokenizedText& text, double ratio, Rng& rng);
TokenizedText add_words(const TokenizedText& target, const TokenizedText& donor, double ratio,
                        Rng& rng);

/// Count-driven variants. Each appends its operations to `oplog` when given.
std::vector<std::string> shuffle_k(std::vector<std::string> tokens, std::size_t k, Rng& rng,
                                   std::vector<Operation>* oplog = nullptr);
std::vector<std::string> drop_k(std::vector<std::string> tokens, std::size_t k, Rng& rng,
                                std::vector<Operation>* oplog = nullptr);
std::vector<std::string> add_k(std::vector<std::string> tokens,
                               std::span<const std::string> donor, std::size_t k, Rng& rng,
                               std::vector<Operation>* oplog = nullptr);

/// Shuffle, then drop, then add, with every count taken from the original
/// length, then prompt with the original length.
PerturbationRecord make_reconstruction_pair(const TokenizedText& text, const TokenizedText& donor,
                                            const PerturbConfig& config, Rng& rng);

/// Applies an oplog to `original`, returning the perturbed body tokens.
std::vector<std::string> replay(const TokenizedText& original, std::span<const Operation> oplog);

/// Perturbs aligned (text, donor) pairs from a single stream seeded with
/// `master_seed`, item by item. This is the reference the accelerated batch
/// kernel must reproduce.
std::vector<PerturbationRecord> perturb_batch(std::span<const TokenizedText> texts,
                                              std::span<const TokenizedText> donors,
                                              const PerturbConfig& config,
                                              std::uint64_t master_seed);

/// Seeded cyclic pairing: donor_of[i] != i for every i. Requires n >= 2.
std::vector<std::size_t> pair_donors(std::size_t n, std::uint64_t seed);

/// Writes one TSV line per text: "<prompted perturbed>\t<original raw>".
/// The corpus is cut into `workers` contiguous shards; shard s draws from a
/// stream seeded with seed ^ s. Returns the number of records written.
std::size_t generate_dataset(std::span<const TokenizedText> corpus, const PerturbConfig& config,
                             const std::filesystem::path& out_path, unsigned workers = 1);

struct ReconstructionPair {
  PromptedInput input;
  TokenizedText target;
};

std::vector<ReconstructionPair> load_dataset(const std::filesystem::path& path);

}  // namespace rsum::perturb
