#pragma once

#include <stdexcept>
#include <string>

namespace rsum {

/// Base class for every error raised by the library. `kind()` is a stable
/// identifier suitable for logs and CLI diagnostics.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define RSUM_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                     \
   public:                                                        \
    explicit Name(const std::string& what) : Error(#Name, what) {} \
  };

RSUM_DEFINE_ERROR(EmptyText)
RSUM_DEFINE_ERROR(IoError)
RSUM_DEFINE_ERROR(EncodingError)
RSUM_DEFINE_ERROR(CorpusTooSmall)
RSUM_DEFINE_ERROR(AllDropped)
RSUM_DEFINE_ERROR(EmbedderFailure)
RSUM_DEFINE_ERROR(LanguageModelFailure)
RSUM_DEFINE_ERROR(GeneratorFailure)
RSUM_DEFINE_ERROR(EpisodeFinished)
RSUM_DEFINE_ERROR(AllCandidatesEmpty)
RSUM_DEFINE_ERROR(ConfigError)
RSUM_DEFINE_ERROR(InvalidArgument)

#undef RSUM_DEFINE_ERROR

}  // namespace rsum
