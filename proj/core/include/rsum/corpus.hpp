#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rsum::corpus {

/// A lowercased whitespace-token sequence. `raw` is always the single-space
/// join of `tokens`.
struct TokenizedText {
  std::vector<std::string> tokens;
  std::string raw;

  std::size_t size() const noexcept { return tokens.size(); }
  bool empty() const noexcept { return tokens.empty(); }

  friend bool operator==(const TokenizedText&, const TokenizedText&) = default;
};

/// Build a TokenizedText from tokens that are already canonical (no
/// whitespace, lowercased). Raw is rebuilt from them.
TokenizedText from_tokens(std::vector<std::string> tokens);

std::string join(std::span<const std::string> tokens);

/// Split on ASCII whitespace, lowercase ASCII letters. Throws EmptyText when
/// nothing remains and EncodingError on malformed UTF-8.
TokenizedText tokenize(std::string_view raw);

bool is_valid_utf8(std::string_view s) noexcept;

/// Desired summary length: an absolute word count or a compression ratio.
class LengthSpec {
 public:
  enum class Kind { absolute, ratio };

  static LengthSpec absolute(int words);
  static LengthSpec ratio(double fraction);
  /// "10" -> absolute 10, "0.5" -> ratio 0.5.
  static LengthSpec parse(std::string_view text);

  Kind kind() const noexcept { return kind_; }
  double value() const noexcept { return value_; }
  std::string to_string() const;

  friend bool operator==(const LengthSpec&, const LengthSpec&) = default;

 private:
  LengthSpec(Kind kind, double value) : kind_(kind), value_(value) {}
  Kind kind_;
  double value_;
};

/// Round-half-up with a floor of one word.
int resolve_length(const LengthSpec& spec, std::size_t text_length);
inline int resolve_length(const LengthSpec& spec, const TokenizedText& text) {
  return resolve_length(spec, text.size());
}

/// Input carrying its length prompt: serialized as "<target_length>: <body>".
struct PromptedInput {
  int target_length = 0;
  TokenizedText body;
  std::string serialized;

  friend bool operator==(const PromptedInput&, const PromptedInput&) = default;
};

PromptedInput make_prompted_input(const TokenizedText& text, const LengthSpec& spec);
PromptedInput make_prompted_input(const TokenizedText& text, int target_length);

/// Inverse of the serialized form. Throws InvalidArgument on malformed input.
PromptedInput parse_prompted_input(std::string_view serialized);

/// Streams one TokenizedText per non-blank line of a UTF-8 file.
class CorpusReader {
 public:
  explicit CorpusReader(const std::filesystem::path& path,
                        std::optional<std::size_t> limit = std::nullopt);

  std::optional<TokenizedText> next();
  std::size_t line_number() const noexcept { return line_no_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::optional<std::size_t> limit_;
  std::size_t produced_ = 0;
  std::size_t line_no_ = 0;
};

std::vector<TokenizedText> load_corpus(const std::filesystem::path& path,
                                       std::optional<std::size_t> limit = std::nullopt);

struct CorpusSplit {
  std::vector<TokenizedText> train;
  std::vector<TokenizedText> validation;
};

/// Seeded uniform sample of `n` validation items; the remaining items keep
/// their original order in `train`. Requires corpus.size() > n.
CorpusSplit split_validation(std::span<const TokenizedText> corpus, std::size_t n,
                             std::uint64_t seed);

using TokenId = std::int32_t;

/// Bidirectional word <-> id map. Id 0 is reserved for unknown words.
class Vocabulary {
 public:
  static constexpr TokenId kUnknown = 0;
  static constexpr std::string_view kUnknownWord = "<unk>";

  Vocabulary();

  /// Adds the word if missing and returns its id.
  TokenId add(const std::string& word);
  TokenId id(const std::string& word) const;
  const std::string& word(TokenId id) const;
  bool contains(const std::string& word) const;
  std::size_t size() const noexcept { return words_.size(); }
  const std::vector<std::string>& words() const noexcept { return words_; }

  std::vector<TokenId> encode(std::span<const std::string> tokens) const;
  std::vector<std::string> decode(std::span<const TokenId> ids) const;

  static Vocabulary build(std::span<const TokenizedText> texts);

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace rsum::corpus
