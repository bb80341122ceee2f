#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rsum/corpus.hpp"
#include "rsum/models.hpp"

namespace rsum::eval {

using Tokens = std::span<const std::string>;

struct RougeScore {
  double precision = 0;
  double recall = 0;
  double f1 = 0;

  static RougeScore from_counts(std::size_t overlap, std::size_t candidate_total,
                                std::size_t reference_total);
  friend bool operator==(const RougeScore&, const RougeScore&) = default;
};

/// Which reference wins when several are given.
enum class MultiRef { best_f1, best_recall };

/// Clipped n-gram overlap against each reference; the best reference under
/// `select` is reported. Throws InvalidArgument for n < 1 or no references.
RougeScore rouge_n(Tokens candidate, std::span<const std::vector<std::string>> references,
                   int n, MultiRef select = MultiRef::best_f1);

std::size_t lcs_length(Tokens a, Tokens b);

RougeScore rouge_l(Tokens candidate, std::span<const std::vector<std::string>> references,
                   MultiRef select = MultiRef::best_f1);

/// Cuts the space-joined summary to `limit` UTF-8 characters.
std::string truncate_chars(std::string_view summary, std::size_t limit = 75);

/// Raw cosine between evaluation-embedder vectors.
double fidelity(Tokens y, Tokens t, const TextEmbedder& eval_embedder);

/// Same form as the fluency reward.
double fluency_metric(Tokens y, const LanguageModel& lm, double sigma_f);

struct NoveltyStats {
  double ratio_with_new_words = 0;
  /// Mean number of new-word tokens among summaries that have any.
  double avg_new_words = 0;
};

/// Summary tokens absent from the input's token set.
std::vector<std::string> new_words(Tokens input, Tokens summary);

struct NoveltyPair {
  std::vector<std::string> input;
  std::vector<std::string> summary;
};
NoveltyStats novelty_stats(std::span<const NoveltyPair> pairs);

enum class Protocol { gigaword_f1, duc_recall };
Protocol parse_protocol(std::string_view s);
std::string to_string(Protocol p);

struct DatasetItem {
  corpus::TokenizedText input;
  std::vector<corpus::TokenizedText> references;
};

/// TSV: column 1 input, columns 2..k references. Throws InvalidArgument for
/// rows without a reference and IoError for unreadable files.
std::vector<DatasetItem> load_eval_dataset(const std::filesystem::path& path);

struct EvalReport {
  Protocol protocol = Protocol::gigaword_f1;
  std::size_t items = 0;
  RougeScore rouge1, rouge2, rougeL;
  double fidelity = 0;
  double fluency = 0;
  double avg_length = 0;
  NoveltyStats novelty;
  /// Free-form labels such as the target length group.
  std::vector<std::pair<std::string, std::string>> metadata;

  /// Key/value lines followed by one block per ROUGE metric.
  std::string to_text() const;
};

struct EvalContext {
  const TextEmbedder* eval_embedder = nullptr;
  const LanguageModel* lm = nullptr;
  double sigma_f = 1000.0;
};

/// gigaword_f1: mean F1 on untruncated summaries. duc_recall: mean recall
/// after truncating each summary to 75 characters; per item the best
/// reference by recall. Fidelity/fluency are skipped when a handle is null.
EvalReport evaluate(std::span<const DatasetItem> dataset,
                    std::span<const corpus::TokenizedText> summaries, Protocol protocol,
                    const EvalContext& ctx);

}  // namespace rsum::eval
