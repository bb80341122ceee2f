#include "rsum/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <thread>

#include "rsum/error.hpp"

namespace rsum::perturb {

namespace {

constexpr std::uint64_t kPairingSalt = 0x5DEECE66DULL;

}  // namespace

void PerturbConfig::validate() const {
  for (double r : {shuffle_ratio, drop_ratio, add_ratio})
    if (!(r >= 0.0 && r <= 2.0)) throw InvalidArgument("perturbation ratios must lie in [0, 2]");
}

std::size_t stage_count(double ratio, std::size_t length) noexcept {
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(length) + 0.5));
}

std::vector<std::size_t> choose_positions(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  k = std::min(k, n);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.uniform_index(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<std::string> shuffle_k(std::vector<std::string> tokens, std::size_t k, Rng& rng,
                                   std::vector<Operation>* oplog) {
  k = std::min(k, tokens.size());
  ShuffleOp op;
  op.positions = choose_positions(tokens.size(), k, rng);
  op.sources = op.positions;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.uniform_index(k - i);
    std::swap(op.sources[i], op.sources[j]);
  }
  const std::vector<std::string> before = tokens;
  for (std::size_t i = 0; i < k; ++i) tokens[op.positions[i]] = before[op.sources[i]];
  if (oplog) oplog->push_back(std::move(op));
  return tokens;
}

std::vector<std::string> drop_k(std::vector<std::string> tokens, std::size_t k, Rng& rng,
                                std::vector<Operation>* oplog) {
  if (k >= tokens.size())
    throw AllDropped("dropping " + std::to_string(k) + " of " + std::to_string(tokens.size()) +
                     " words leaves nothing");
  DropOp op;
  op.positions = choose_positions(tokens.size(), k, rng);
  std::vector<std::string> kept;
  kept.reserve(tokens.size() - k);
  std::size_t next = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (next < op.positions.size() && op.positions[next] == i) {
      ++next;
      continue;
    }
    kept.push_back(std::move(tokens[i]));
  }
  if (oplog) oplog->push_back(std::move(op));
  return kept;
}

std::vector<std::string> add_k(std::vector<std::string> tokens,
                               std::span<const std::string> donor, std::size_t k, Rng& rng,
                               std::vector<Operation>* oplog) {
  if (k > 0 && donor.empty()) throw InvalidArgument("donor text is empty");
  tokens.reserve(tokens.size() + k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::string& word = donor[rng.uniform_index(donor.size())];
    const std::size_t slot = rng.uniform_index(tokens.size() + 1);
    tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(slot), word);
    if (oplog) oplog->push_back(InsertOp{slot, word});
  }
  return tokens;
}

TokenizedText shuffle_words(const TokenizedText& text, double ratio, Rng& rng) {
  if (text.empty()) throw EmptyText("cannot shuffle an empty text");
  return corpus::from_tokens(shuffle_k(text.tokens, stage_count(ratio, text.size()), rng));
}

TokenizedText drop_words(const TokenizedText& text, double ratio, Rng& rng) {
  if (text.empty()) throw EmptyText("cannot drop from an empty text");
  return corpus::from_tokens(drop_k(text.tokens, stage_count(ratio, text.size()), rng));
}

TokenizedText add_words(const TokenizedText& target, const TokenizedText& donor, double ratio,
                        Rng& rng) {
  if (donor.empty()) throw EmptyText("donor text is empty");
  return corpus::from_tokens(add_k(target.tokens, donor.tokens, stage_count(ratio, target.size()), rng));
}

PerturbationRecord make_reconstruction_pair(const TokenizedText& text, const TokenizedText& donor,
                                            const PerturbConfig& config, Rng& rng) {
  if (text.empty() || donor.empty()) throw EmptyText("text and donor must be non-empty");
  const std::size_t n = text.size();
  PerturbationRecord rec;
  rec.original = text;
  auto body = shuffle_k(text.tokens, stage_count(config.shuffle_ratio, n), rng, &rec.oplog);
  body = drop_k(std::move(body), stage_count(config.drop_ratio, n), rng, &rec.oplog);
  body = add_k(std::move(body), donor.tokens, stage_count(config.add_ratio, n), rng, &rec.oplog);
  rec.perturbed = corpus::make_prompted_input(corpus::from_tokens(std::move(body)),
                                              static_cast<int>(n));
  return rec;
}

std::vector<std::string> replay(const TokenizedText& original, std::span<const Operation> oplog) {
  std::vector<std::string> tokens = original.tokens;
  for (const auto& op : oplog) {
    if (const auto* s = std::get_if<ShuffleOp>(&op)) {
      const auto before = tokens;
      for (std::size_t i = 0; i < s->positions.size(); ++i)
        tokens.at(s->positions[i]) = before.at(s->sources[i]);
    } else if (const auto* d = std::get_if<DropOp>(&op)) {
      for (auto it = d->positions.rbegin(); it != d->positions.rend(); ++it)
        tokens.erase(tokens.begin() + static_cast<std::ptrdiff_t>(*it));
    } else {
      const auto& ins = std::get<InsertOp>(op);
      if (ins.slot > tokens.size()) throw InvalidArgument("insert slot out of range");
      tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(ins.slot), ins.token);
    }
  }
  return tokens;
}

std::vector<PerturbationRecord> perturb_batch(std::span<const TokenizedText> texts,
                                              std::span<const TokenizedText> donors,
                                              const PerturbConfig& config,
                                              std::uint64_t master_seed) {
  if (texts.size() != donors.size()) throw InvalidArgument("text and donor batches differ in size");
  config.validate();
  Rng rng(master_seed);
  std::vector<PerturbationRecord> out;
  out.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i)
    out.push_back(make_reconstruction_pair(texts[i], donors[i], config, rng));
  return out;
}

std::vector<std::size_t> pair_donors(std::size_t n, std::uint64_t seed) {
  if (n < 2) throw CorpusTooSmall("donor pairing needs at least two texts");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed ^ kPairingSalt);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_index(i + 1)]);
  std::vector<std::size_t> donor_of(n);
  for (std::size_t i = 0; i < n; ++i) donor_of[order[i]] = order[(i + 1) % n];
  return donor_of;
}

std::size_t generate_dataset(std::span<const TokenizedText> corpus, const PerturbConfig& config,
                             const std::filesystem::path& out_path, unsigned workers) {
  config.validate();
  const auto donor_of = pair_donors(corpus.size(), config.seed);
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(corpus.size())));
  const std::size_t chunk = (corpus.size() + workers - 1) / workers;

  std::vector<std::string> shard_text(workers);
  auto run_shard = [&](unsigned s) {
    const std::size_t begin = s * chunk;
    const std::size_t end = std::min(corpus.size(), begin + chunk);
    Rng rng(config.seed ^ s);
    std::string& buf = shard_text[s];
    for (std::size_t i = begin; i < end; ++i) {
      const auto rec = make_reconstruction_pair(corpus[i], corpus[donor_of[i]], config, rng);
      buf += rec.perturbed.serialized;
      buf += '\t';
      buf += rec.original.raw;
      buf += '\n';
    }
  };
  if (workers == 1) {
    run_shard(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned s = 0; s < workers; ++s) pool.emplace_back(run_shard, s);
  }

  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset '" + out_path.string() + "'");
  for (const auto& s : shard_text) out << s;
  if (!out) throw IoError("write failure on '" + out_path.string() + "'");
  return corpus.size();
}

std::vector<ReconstructionPair> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
  std::vector<ReconstructionPair> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw InvalidArgument(path.string() + ":" + std::to_string(line_no) + ": expected two columns");
    out.push_back({corpus::parse_prompted_input(std::string_view(line).substr(0, tab)),
                   corpus::tokenize(std::string_view(line).substr(tab + 1))});
  }
  return out;
}

}  // namespace rsum::perturb
