#include "rsum/eval.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "rsum/error.hpp"
#include "rsum/rewards.hpp"

namespace rsum::eval {

RougeScore RougeScore::from_counts(std::size_t overlap, std::size_t candidate_total,
                                   std::size_t reference_total) {
  RougeScore s;
  s.precision = candidate_total ? static_cast<double>(overlap) / static_cast<double>(candidate_total) : 0.0;
  s.recall = reference_total ? static_cast<double>(overlap) / static_cast<double>(reference_total) : 0.0;
  s.f1 = (s.precision + s.recall) > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

namespace {

using NgramCounts = std::unordered_map<std::string, std::size_t>;

NgramCounts count_ngrams(Tokens tokens, int n) {
  NgramCounts counts;
  const auto un = static_cast<std::size_t>(n);
  if (tokens.size() < un) return counts;
  for (std::size_t i = 0; i + un <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (std::size_t k = 1; k < un; ++k) {
      key += '\x1f';
      key += tokens[i + k];
    }
    ++counts[key];
  }
  return counts;
}

std::size_t total(Tokens tokens, int n) {
  const auto un = static_cast<std::size_t>(n);
  return tokens.size() >= un ? tokens.size() - un + 1 : 0;
}

bool better(const RougeScore& a, const RougeScore& b, MultiRef select) {
  if (select == MultiRef::best_f1) {
    if (a.f1 != b.f1) return a.f1 > b.f1;
    return a.recall > b.recall;
  }
  if (a.recall != b.recall) return a.recall > b.recall;
  return a.f1 > b.f1;
}

template <class Score>
RougeScore best_over(std::span<const std::vector<std::string>> references, MultiRef select,
                     Score&& score) {
  if (references.empty()) throw InvalidArgument("at least one reference is required");
  RougeScore best = score(references[0]);
  for (std::size_t i = 1; i < references.size(); ++i) {
    const RougeScore s = score(references[i]);
    if (better(s, best, select)) best = s;
  }
  return best;
}

}  // namespace

RougeScore rouge_n(Tokens candidate, std::span<const std::vector<std::string>> references, int n,
                   MultiRef select) {
  if (n < 1) throw InvalidArgument("n must be >= 1");
  const auto cand = count_ngrams(candidate, n);
  const std::size_t cand_total = total(candidate, n);
  return best_over(references, select, [&](const std::vector<std::string>& ref) {
    const auto ref_counts = count_ngrams(ref, n);
    std::size_t overlap = 0;
    for (const auto& [gram, c] : cand) {
      auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) overlap += std::min(c, it->second);
    }
    return RougeScore::from_counts(overlap, cand_total, total(ref, n));
  });
}

std::size_t lcs_length(Tokens a, Tokens b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

RougeScore rouge_l(Tokens candidate, std::span<const std::vector<std::string>> references,
                   MultiRef select) {
  return best_over(references, select, [&](const std::vector<std::string>& ref) {
    return RougeScore::from_counts(lcs_length(candidate, ref), candidate.size(), ref.size());
  });
}

std::string truncate_chars(std::string_view summary, std::size_t limit) {
  if (limit == 0) throw InvalidArgument("truncation limit must be positive");
  std::size_t chars = 0;
  std::size_t i = 0;
  while (i < summary.size()) {
    if (chars == limit) return std::string(summary.substr(0, i));
    const auto c = static_cast<unsigned char>(summary[i]);
    std::size_t len = 1;
    if ((c & 0xE0) == 0xC0) len = 2;
    else if ((c & 0xF0) == 0xE0) len = 3;
    else if ((c & 0xF8) == 0xF0) len = 4;
    i += len;
    ++chars;
  }
  return std::string(summary);
}

double fidelity(Tokens y, Tokens t, const TextEmbedder& eval_embedder) {
  return rewards::cosine(eval_embedder.embed(y), eval_embedder.embed(t));
}

double fluency_metric(Tokens y, const LanguageModel& lm, double sigma_f) {
  return rewards::fluency_reward(y, lm, sigma_f);
}

std::vector<std::string> new_words(Tokens input, Tokens summary) {
  const std::unordered_set<std::string> seen(input.begin(), input.end());
  std::vector<std::string> out;
  for (const auto& w : summary)
    if (!seen.count(w)) out.push_back(w);
  return out;
}

NoveltyStats novelty_stats(std::span<const NoveltyPair> pairs) {
  if (pairs.empty()) throw InvalidArgument("novelty statistics need at least one pair");
  std::size_t with_new = 0, new_total = 0;
  for (const auto& p : pairs) {
    const auto fresh = new_words(p.input, p.summary);
    if (fresh.empty()) continue;
    ++with_new;
    new_total += fresh.size();
  }
  NoveltyStats s;
  s.ratio_with_new_words = static_cast<double>(with_new) / static_cast<double>(pairs.size());
  s.avg_new_words = with_new ? static_cast<double>(new_total) / static_cast<double>(with_new) : 0.0;
  return s;
}

Protocol parse_protocol(std::string_view s) {
  if (s == "gigaword_f1") return Protocol::gigaword_f1;
  if (s == "duc_recall") return Protocol::duc_recall;
  throw ConfigError("unknown protocol '" + std::string(s) + "' (expected gigaword_f1 or duc_recall)");
}

std::string to_string(Protocol p) { return p == Protocol::gigaword_f1 ? "gigaword_f1" : "duc_recall"; }

std::vector<DatasetItem> load_eval_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
  std::vector<DatasetItem> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    DatasetItem item;
    item.input = corpus::tokenize(cols[0]);
    for (std::size_t c = 1; c < cols.size(); ++c)
      if (cols[c].find_first_not_of(" \r") != std::string::npos)
        item.references.push_back(corpus::tokenize(cols[c]));
    if (item.references.empty())
      throw InvalidArgument(path.string() + ":" + std::to_string(line_no) + ": missing references");
    out.push_back(std::move(item));
  }
  return out;
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "protocol = " << to_string(protocol) << "\n";
  os << "items = " << items << "\n";
  for (const auto& [k, v] : metadata) os << k << " = " << v << "\n";
  os << "avg_length = " << avg_length << "\n";
  os << "fidelity = " << fidelity << "\n";
  os << "fluency = " << fluency << "\n";
  os << "novelty.ratio_with_new_words = " << novelty.ratio_with_new_words << "\n";
  os << "novelty.avg_new_words = " << novelty.avg_new_words << "\n";
  const std::pair<const char*, const RougeScore*> blocks[] = {
      {"rouge1", &rouge1}, {"rouge2", &rouge2}, {"rougeL", &rougeL}};
  for (const auto& [name, s] : blocks) {
    os << "\n[" << name << "]\n";
    os << "precision = " << s->precision << "\n";
    os << "recall = " << s->recall << "\n";
    os << "f1 = " << s->f1 << "\n";
    os << "reported = " << (protocol == Protocol::gigaword_f1 ? s->f1 : s->recall) << "\n";
  }
  return os.str();
}

EvalReport evaluate(std::span<const DatasetItem> dataset,
                    std::span<const corpus::TokenizedText> summaries, Protocol protocol,
                    const EvalContext& ctx) {
  if (dataset.empty()) throw InvalidArgument("cannot evaluate an empty dataset");
  if (dataset.size() != summaries.size())
    throw InvalidArgument("dataset has " + std::to_string(dataset.size()) + " items but " +
                          std::to_string(summaries.size()) + " summaries were given");
  EvalReport rep;
  rep.protocol = protocol;
  rep.items = dataset.size();
  const MultiRef select = protocol == Protocol::duc_recall ? MultiRef::best_recall : MultiRef::best_f1;

  RougeScore sums[3];
  double fid = 0, flu = 0, len = 0;
  std::vector<NoveltyPair> novelty;
  novelty.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& item = dataset[i];
    std::vector<std::vector<std::string>> refs;
    for (const auto& r : item.references) refs.push_back(r.tokens);
    std::vector<std::string> scored = summaries[i].tokens;
    if (protocol == Protocol::duc_recall) {
      const auto cut = truncate_chars(summaries[i].raw, 75);
      scored.clear();
      if (cut.find_first_not_of(' ') != std::string::npos) scored = corpus::tokenize(cut).tokens;
    }
    const RougeScore s[3] = {rouge_n(scored, refs, 1, select), rouge_n(scored, refs, 2, select),
                             rouge_l(scored, refs, select)};
    for (int m = 0; m < 3; ++m) {
      sums[m].precision += s[m].precision;
      sums[m].recall += s[m].recall;
      sums[m].f1 += s[m].f1;
    }
    if (ctx.eval_embedder) fid += fidelity(summaries[i].tokens, item.input.tokens, *ctx.eval_embedder);
    if (ctx.lm) flu += fluency_metric(summaries[i].tokens, *ctx.lm, ctx.sigma_f);
    len += static_cast<double>(summaries[i].size());
    novelty.push_back({item.input.tokens, summaries[i].tokens});
  }
  const double n = static_cast<double>(dataset.size());
  RougeScore* out[3] = {&rep.rouge1, &rep.rouge2, &rep.rougeL};
  for (int m = 0; m < 3; ++m) {
    out[m]->precision = sums[m].precision / n;
    out[m]->recall = sums[m].recall / n;
    out[m]->f1 = sums[m].f1 / n;
  }
  rep.fidelity = fid / n;
  rep.fluency = flu / n;
  rep.avg_length = len / n;
  rep.novelty = novelty_stats(novelty);
  return rep;
}

}  // namespace rsum::eval
