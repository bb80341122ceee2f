#include "rsum/toy.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <unordered_set>

#include "rsum/error.hpp"
#include "rsum/rng.hpp"

namespace rsum::toy {

using corpus::TokenId;

namespace {

constexpr std::string_view kToyMagic = "toy";
constexpr std::uint32_t kToyFormat = 1;

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <class T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T read_pod(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw IoError("truncated toy generator blob");
  return v;
}

std::vector<TokenId> unique_sorted(std::vector<TokenId> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

}  // namespace

// ToyGenerator ---------------------------------------------------------------

struct ToyGenerator::Features {
  std::vector<TokenId> body;  // unique, sorted
  int target = 0;
};

ToyGenerator::ToyGenerator(corpus::Vocabulary vocabulary, Options options)
    : vocab_(std::move(vocabulary)), options_(options) {
  if (options_.max_offset < 0) throw InvalidArgument("max_offset must be non-negative");
  const std::size_t outputs = vocab_.size() + 1;
  std::size_t at = 0;
  layout_.bias = at;
  at += outputs;
  layout_.bigram = at;
  if (options_.bigram) at += outputs * outputs;  // rows: previous word or BOS (= EOS id)
  layout_.copy = at++;
  layout_.copy_word = at;
  if (options_.per_word_copy) at += vocab_.size();
  layout_.repeat = at++;
  layout_.remaining = at;
  at += static_cast<std::size_t>(2 * options_.max_offset + 1);
  layout_.total = at;
  params_.assign(layout_.total, 0.0);
}

std::size_t ToyGenerator::remaining_bucket(int target_length, int step) const noexcept {
  const int d = std::clamp(target_length - step, -options_.max_offset, options_.max_offset);
  return static_cast<std::size_t>(d + options_.max_offset);
}

ToyGenerator::Features ToyGenerator::features(const corpus::PromptedInput& input) const {
  Features f;
  f.body = unique_sorted(vocab_.encode(input.body.tokens));
  f.target = input.target_length;
  return f;
}

void ToyGenerator::logits(const Features& f, std::span<const TokenId> prefix,
                          std::vector<double>& out) const {
  const std::size_t outputs = output_size();
  const auto eos_id = static_cast<std::size_t>(eos());
  out.assign(params_.begin() + static_cast<std::ptrdiff_t>(layout_.bias),
             params_.begin() + static_cast<std::ptrdiff_t>(layout_.bias + outputs));
  if (options_.bigram) {
    const std::size_t prev = prefix.empty() ? eos_id : static_cast<std::size_t>(prefix.back());
    const double* row = params_.data() + layout_.bigram + prev * outputs;
    for (std::size_t v = 0; v < outputs; ++v) out[v] += row[v];
  }
  const auto emitted = unique_sorted({prefix.begin(), prefix.end()});
  for (TokenId b : f.body) {
    if (std::binary_search(emitted.begin(), emitted.end(), b)) continue;
    out[static_cast<std::size_t>(b)] +=
        params_[layout_.copy] +
        (options_.per_word_copy ? params_[layout_.copy_word + static_cast<std::size_t>(b)] : 0.0);
  }
  for (TokenId e : emitted) out[static_cast<std::size_t>(e)] += params_[layout_.repeat];
  out[eos_id] += params_[layout_.remaining +
                         remaining_bucket(f.target, static_cast<int>(prefix.size()))];
}

namespace {

void softmax_inplace(std::vector<double>& x) {
  const double mx = *std::max_element(x.begin(), x.end());
  double sum = 0;
  for (double& v : x) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : x) v /= sum;
}

}  // namespace

std::vector<double> ToyGenerator::next_token_distribution(const corpus::PromptedInput& input,
                                                          std::span<const TokenId> prefix) const {
  std::vector<double> p;
  logits(features(input), prefix, p);
  softmax_inplace(p);
  return p;
}

void ToyGenerator::accumulate_logprob_gradient(const corpus::PromptedInput& input,
                                               std::span<const TokenId> actions, double weight,
                                               std::span<double> grad) const {
  if (grad.size() != params_.size()) throw InvalidArgument("gradient buffer size mismatch");
  const auto f = features(input);
  const std::size_t outputs = output_size();
  const auto eos_id = static_cast<std::size_t>(eos());
  std::vector<double> p;
  for (std::size_t t = 0; t < actions.size(); ++t) {
    const auto action = static_cast<std::size_t>(actions[t]);
    if (action >= outputs) throw InvalidArgument("action out of range");
    if (action == eos_id && t + 1 != actions.size()) throw InvalidArgument("EOS must be the last action");
    const auto prefix = actions.first(t);
    logits(f, prefix, p);
    softmax_inplace(p);
    // d log p(a) / d logit(v) = [v == a] - p(v)
    for (auto& v : p) v = -weight * v;
    p[action] += weight;

    for (std::size_t v = 0; v < outputs; ++v) grad[layout_.bias + v] += p[v];
    if (options_.bigram) {
      const std::size_t prev = prefix.empty() ? eos_id : static_cast<std::size_t>(prefix.back());
      double* row = grad.data() + layout_.bigram + prev * outputs;
      for (std::size_t v = 0; v < outputs; ++v) row[v] += p[v];
    }
    const auto emitted = unique_sorted({prefix.begin(), prefix.end()});
    for (TokenId b : f.body) {
      if (std::binary_search(emitted.begin(), emitted.end(), b)) continue;
      const auto bi = static_cast<std::size_t>(b);
      grad[layout_.copy] += p[bi];
      if (options_.per_word_copy) grad[layout_.copy_word + bi] += p[bi];
    }
    for (TokenId e : emitted) grad[layout_.repeat] += p[static_cast<std::size_t>(e)];
    grad[layout_.remaining + remaining_bucket(f.target, static_cast<int>(t))] += p[eos_id];
  }
}

void ToyGenerator::save(std::ostream& out) const {
  out << kToyMagic << '\n';
  write_pod(out, kToyFormat);
  write_pod(out, static_cast<std::uint8_t>(options_.bigram));
  write_pod(out, static_cast<std::uint8_t>(options_.per_word_copy));
  write_pod(out, static_cast<std::int32_t>(options_.max_offset));
  write_pod(out, static_cast<std::uint64_t>(vocab_.size()));
  for (const auto& w : vocab_.words()) {
    write_pod(out, static_cast<std::uint32_t>(w.size()));
    out.write(w.data(), static_cast<std::streamsize>(w.size()));
  }
  write_pod(out, static_cast<std::uint64_t>(params_.size()));
  out.write(reinterpret_cast<const char*>(params_.data()),
            static_cast<std::streamsize>(params_.size() * sizeof(double)));
  if (!out) throw IoError("failed to write toy generator blob");
}

ToyGenerator ToyGenerator::load(std::istream& in) {
  std::string magic;
  if (!std::getline(in, magic) || magic != kToyMagic) throw IoError("not a toy generator blob");
  if (read_pod<std::uint32_t>(in) != kToyFormat) throw IoError("unsupported toy generator format");
  Options opt;
  opt.bigram = read_pod<std::uint8_t>(in) != 0;
  opt.per_word_copy = read_pod<std::uint8_t>(in) != 0;
  opt.max_offset = read_pod<std::int32_t>(in);
  const auto n_words = read_pod<std::uint64_t>(in);
  corpus::Vocabulary vocab;
  for (std::uint64_t i = 0; i < n_words; ++i) {
    std::string w(read_pod<std::uint32_t>(in), '\0');
    if (!in.read(w.data(), static_cast<std::streamsize>(w.size()))) throw IoError("truncated vocabulary");
    if (vocab.add(w) != static_cast<TokenId>(i)) throw IoError("corrupt vocabulary in toy blob");
  }
  ToyGenerator gen(std::move(vocab), opt);
  if (read_pod<std::uint64_t>(in) != gen.params_.size()) throw IoError("parameter count mismatch");
  if (!in.read(reinterpret_cast<char*>(gen.params_.data()),
               static_cast<std::streamsize>(gen.params_.size() * sizeof(double))))
    throw IoError("truncated parameters");
  return gen;
}

// HashedBagOfWords -----------------------------------------------------------

HashedBagOfWords::HashedBagOfWords(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
  if (dimension == 0) throw InvalidArgument("embedding dimension must be positive");
}

void HashedBagOfWords::fit_idf(std::span<const corpus::TokenizedText> texts) {
  std::unordered_map<std::string, std::size_t> df;
  for (const auto& t : texts) {
    std::unordered_set<std::string> seen(t.tokens.begin(), t.tokens.end());
    for (const auto& w : seen) ++df[w];
  }
  const double n = static_cast<double>(std::max<std::size_t>(texts.size(), 1));
  idf_.clear();
  for (const auto& [w, c] : df) idf_[w] = std::log((n + 1.0) / (static_cast<double>(c) + 1.0)) + 1e-3;
  default_idf_ = std::log(n + 1.0);
}

Embedding HashedBagOfWords::embed(std::span<const std::string> tokens) const {
  Embedding e(dimension_, 0.0);
  for (const auto& tok : tokens) {
    double w = default_idf_;
    if (!idf_.empty()) {
      auto it = idf_.find(tok);
      if (it != idf_.end()) w = it->second;
    } else {
      w = 1.0;
    }
    std::uint64_t state = fnv1a(tok) ^ seed_;
    for (std::size_t i = 0; i < dimension_; ++i) {
      const double u = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
      e[i] += w * (2.0 * u - 1.0);
    }
  }
  return e;
}

// BigramLanguageModel --------------------------------------------------------

BigramLanguageModel::BigramLanguageModel(std::span<const corpus::TokenizedText> texts, double k)
    : vocab_(corpus::Vocabulary::build(texts)), k_(k) {
  if (!(k > 0)) throw InvalidArgument("smoothing constant must be positive");
  // Context id vocab_.size() is the sentence start.
  context_counts_.assign(vocab_.size() + 1, 0.0);
  for (const auto& t : texts) {
    auto prev = static_cast<std::uint64_t>(vocab_.size());
    for (const auto& w : t.tokens) {
      const auto id = static_cast<std::uint64_t>(vocab_.id(w));
      bigram_counts_[(prev << 32) | id] += 1.0;
      context_counts_[prev] += 1.0;
      prev = id;
    }
  }
}

std::vector<double> BigramLanguageModel::token_logprobs(std::span<const std::string> tokens) const {
  std::vector<double> out;
  out.reserve(tokens.size());
  const double v = static_cast<double>(vocab_.size());
  auto prev = static_cast<std::uint64_t>(vocab_.size());
  for (const auto& w : tokens) {
    const auto id = static_cast<std::uint64_t>(vocab_.id(w));
    auto it = bigram_counts_.find((prev << 32) | id);
    const double c = it == bigram_counts_.end() ? 0.0 : it->second;
    out.push_back(std::log((c + k_) / (context_counts_[prev] + k_ * v)));
    prev = id;
  }
  return out;
}

// Synthetic corpus -----------------------------------------------------------

namespace {

const std::vector<std::string> kSubjects = {
    "the prime minister", "the president", "police", "the central bank", "rebel forces",
    "the government", "health officials", "the united nations", "opposition leaders",
    "the army", "the foreign minister", "striking workers", "the company", "investors",
    "the court", "local residents", "the finance ministry", "scientists", "the coach",
    "election officials", "the new york mayor", "chinese leaders", "european officials",
    "the israeli cabinet", "japanese automakers", "oil producers", "the world bank",
    "russian troops", "the senate", "teachers"};
const std::vector<std::string> kVerbs = {
    "announced", "rejected", "approved", "criticized", "welcomed", "postponed", "signed",
    "proposed", "denied", "defended", "launched", "suspended", "backed", "blocked",
    "condemned", "unveiled", "delayed", "discussed", "accepted", "opposed"};
const std::vector<std::string> kObjects = {
    "a new peace plan", "the budget proposal", "higher fuel taxes", "the trade agreement",
    "plans for new elections", "a ban on imports", "the nuclear deal", "emergency aid",
    "the merger offer", "a cease-fire", "new security measures", "the reform package",
    "interest rate cuts", "the rescue plan", "a probe into corruption", "the border deal",
    "a vaccine program", "the stadium project", "the wage offer", "new climate rules"};
const std::vector<std::string> kPlaces = {
    "in the capital", "in beijing", "in moscow", "in jerusalem", "in washington",
    "in tokyo", "in brussels", "in the south", "in northern iraq", "at the summit",
    "at a news conference", "in parliament"};
const std::vector<std::string> kTimes = {
    "on monday", "on tuesday", "on wednesday", "on thursday", "on friday", "on saturday",
    "on sunday", "last week", "this year", "early today"};
const std::vector<std::string> kReasons = {
    "amid growing protests", "after weeks of talks", "despite strong opposition",
    "to boost the economy", "following a deadly attack", "as prices soared",
    "amid fears of recession", "after a long debate", "to ease tensions",
    "as the crisis deepened"};
const std::vector<std::string> kAttributions = {
    "officials said", "state media reported", "a spokesman said", "sources said",
    "the agency reported"};

const std::string& pick(const std::vector<std::string>& v, Rng& rng) {
  return v[rng.uniform_index(v.size())];
}

}  // namespace

std::vector<corpus::TokenizedText> synthetic_corpus(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<corpus::TokenizedText> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::string s = pick(kSubjects, rng) + " " + pick(kVerbs, rng) + " " + pick(kObjects, rng);
    if (rng.uniform01() < 0.7) s += " " + pick(kPlaces, rng);
    if (rng.uniform01() < 0.6) s += " " + pick(kTimes, rng);
    if (rng.uniform01() < 0.5) s += " " + pick(kReasons, rng);
    if (rng.uniform01() < 0.3) s += " , " + pick(kAttributions, rng);
    out.push_back(corpus::tokenize(s));
  }
  return out;
}

}  // namespace rsum::toy
