#include "rsum/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "rsum/error.hpp"
#include "rsum/rng.hpp"

namespace rsum::corpus {

namespace {

bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

char ascii_lower(char c) noexcept { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

}  // namespace

std::string join(std::span<const std::string> tokens) {
  std::string out;
  std::size_t total = tokens.empty() ? 0 : tokens.size() - 1;
  for (const auto& t : tokens) total += t.size();
  out.reserve(total);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

TokenizedText from_tokens(std::vector<std::string> tokens) {
  TokenizedText text;
  text.raw = join(tokens);
  text.tokens = std::move(tokens);
  return text;
}

bool is_valid_utf8(std::string_view s) noexcept {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= s.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Overlong forms, surrogates, out of range.
    if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) || (extra == 3 && cp < 0x10000) ||
        cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
      return false;
    i += extra + 1;
  }
  return true;
}

TokenizedText tokenize(std::string_view raw) {
  if (!is_valid_utf8(raw)) throw EncodingError("input is not valid UTF-8");
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < raw.size()) {
    while (i < raw.size() && is_space(raw[i])) ++i;
    const std::size_t start = i;
    while (i < raw.size() && !is_space(raw[i])) ++i;
    if (i > start) {
      std::string tok(raw.substr(start, i - start));
      std::transform(tok.begin(), tok.end(), tok.begin(), ascii_lower);
      tokens.push_back(std::move(tok));
    }
  }
  if (tokens.empty()) throw EmptyText("no tokens after trimming");
  return from_tokens(std::move(tokens));
}

// LengthSpec -----------------------------------------------------------------

LengthSpec LengthSpec::absolute(int words) {
  if (words < 1) throw InvalidArgument("absolute length must be >= 1");
  return LengthSpec(Kind::absolute, words);
}

LengthSpec LengthSpec::ratio(double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw InvalidArgument("length ratio must be in (0, 1]");
  return LengthSpec(Kind::ratio, fraction);
}

LengthSpec LengthSpec::parse(std::string_view text) {
  if (text.find('.') != std::string_view::npos) {
    double v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size())
      throw InvalidArgument("bad length ratio '" + std::string(text) + "'");
    return ratio(v);
  }
  int v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size())
    throw InvalidArgument("bad length '" + std::string(text) + "'");
  return absolute(v);
}

std::string LengthSpec::to_string() const {
  if (kind_ == Kind::absolute) return std::to_string(static_cast<int>(value_));
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, value_);
  std::string s(buf, p);
  if (s.find('.') == std::string::npos) s += ".0";
  return s;
}

int resolve_length(const LengthSpec& spec, std::size_t text_length) {
  if (spec.kind() == LengthSpec::Kind::absolute) return static_cast<int>(spec.value());
  const double scaled = spec.value() * static_cast<double>(text_length);
  const int rounded = static_cast<int>(std::floor(scaled + 0.5));
  return std::max(rounded, 1);
}

// PromptedInput --------------------------------------------------------------

PromptedInput make_prompted_input(const TokenizedText& text, int target_length) {
  if (text.empty()) throw EmptyText("cannot prompt an empty text");
  if (target_length < 1) throw InvalidArgument("target length must be >= 1");
  PromptedInput p;
  p.target_length = target_length;
  p.body = text;
  p.serialized = std::to_string(target_length) + ": " + text.raw;
  return p;
}

PromptedInput make_prompted_input(const TokenizedText& text, const LengthSpec& spec) {
  if (text.empty()) throw EmptyText("cannot prompt an empty text");
  return make_prompted_input(text, resolve_length(spec, text));
}

PromptedInput parse_prompted_input(std::string_view serialized) {
  const auto colon = serialized.find(": ");
  if (colon == std::string_view::npos || colon == 0)
    throw InvalidArgument("missing '<length>: ' prompt");
  int length = 0;
  auto [p, ec] = std::from_chars(serialized.data(), serialized.data() + colon, length);
  if (ec != std::errc() || p != serialized.data() + colon || length < 1)
    throw InvalidArgument("bad prompt length");
  return make_prompted_input(tokenize(serialized.substr(colon + 2)), length);
}

// CorpusReader ---------------------------------------------------------------

CorpusReader::CorpusReader(const std::filesystem::path& path, std::optional<std::size_t> limit)
    : path_(path), in_(path), limit_(limit) {
  if (!in_) throw IoError("cannot open corpus '" + path.string() + "'");
}

std::optional<TokenizedText> CorpusReader::next() {
  if (limit_ && produced_ >= *limit_) return std::nullopt;
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (!is_valid_utf8(line))
      throw EncodingError(path_.string() + ":" + std::to_string(line_no_) + ": invalid UTF-8");
    if (std::all_of(line.begin(), line.end(), is_space)) continue;
    ++produced_;
    return tokenize(line);
  }
  if (in_.bad()) throw IoError("read failure on '" + path_.string() + "'");
  return std::nullopt;
}

std::vector<TokenizedText> load_corpus(const std::filesystem::path& path,
                                       std::optional<std::size_t> limit) {
  CorpusReader reader(path, limit);
  std::vector<TokenizedText> out;
  while (auto t = reader.next()) out.push_back(std::move(*t));
  return out;
}

CorpusSplit split_validation(std::span<const TokenizedText> corpus, std::size_t n,
                             std::uint64_t seed) {
  if (corpus.size() <= n)
    throw CorpusTooSmall("corpus of " + std::to_string(corpus.size()) +
                         " texts cannot hold out " + std::to_string(n));
  std::vector<std::size_t> idx(corpus.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + rng.uniform_index(idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  std::vector<char> held(corpus.size(), 0);
  for (std::size_t i = 0; i < n; ++i) held[idx[i]] = 1;

  CorpusSplit split;
  split.validation.reserve(n);
  split.train.reserve(corpus.size() - n);
  for (std::size_t i = 0; i < corpus.size(); ++i)
    (held[i] ? split.validation : split.train).push_back(corpus[i]);
  return split;
}

// Vocabulary -----------------------------------------------------------------

Vocabulary::Vocabulary() { add(std::string(kUnknownWord)); }

TokenId Vocabulary::add(const std::string& word) {
  auto [it, inserted] = index_.try_emplace(word, static_cast<TokenId>(words_.size()));
  if (inserted) words_.push_back(word);
  return it->second;
}

TokenId Vocabulary::id(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? kUnknown : it->second;
}

const std::string& Vocabulary::word(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= words_.size())
    throw InvalidArgument("token id out of range: " + std::to_string(id));
  return words_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(const std::string& word) const { return index_.count(word) != 0; }

std::vector<TokenId> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::vector<std::string> Vocabulary::decode(std::span<const TokenId> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (auto i : ids) out.push_back(word(i));
  return out;
}

Vocabulary Vocabulary::build(std::span<const TokenizedText> texts) {
  Vocabulary v;
  for (const auto& t : texts)
    for (const auto& w : t.tokens) v.add(w);
  return v;
}

}  // namespace rsum::corpus
