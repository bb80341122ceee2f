#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rsum/eval.hpp"
#include "rsum/fastkernel_abi.h"
#include "rsum/perturb.hpp"

namespace rsum::kernel {

/// Interns strings to dense int32 ids.
class StringTable {
 public:
  std::int32_t intern(const std::string& s);
  /// -1 when absent.
  std::int32_t find(const std::string& s) const;
  const std::string& word(std::int32_t id) const;
  std::size_t size() const noexcept { return words_.size(); }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::int32_t> index_;
};

/// Concatenated id sequences with count+1 offsets.
class Sequences {
 public:
  Sequences() : offsets_{0} {}

  void append(std::span<const std::int32_t> ids);
  std::size_t size() const noexcept { return offsets_.size() - 1; }
  std::span<const std::int32_t> item(std::size_t i) const;
  std::size_t length(std::size_t i) const { return offsets_.at(i + 1) - offsets_.at(i); }

  const std::vector<std::int32_t>& ids() const noexcept { return ids_; }
  const std::vector<std::uint64_t>& offsets() const noexcept { return offsets_; }

 private:
  std::vector<std::int32_t> ids_;
  std::vector<std::uint64_t> offsets_;
};

/// Token sequences as ids over a string table the caller may share between
/// batches (texts and donors, candidates and references).
struct KernelBatch {
  std::shared_ptr<StringTable> table = std::make_shared<StringTable>();
  Sequences sequences;

  KernelBatch() = default;
  explicit KernelBatch(std::shared_ptr<StringTable> shared) : table(std::move(shared)) {}

  std::size_t add(std::span<const std::string> tokens);
  std::size_t size() const noexcept { return sequences.size(); }
  std::vector<std::string> decode(std::size_t i) const;
  std::vector<std::size_t> lengths() const;
};

/// A loaded accelerated kernel. Only constructible through `open`.
class FastKernel {
 public:
  /// Loads a shared library exposing the fk_* symbols with a matching ABI
  /// version. Returns null and fills `why` otherwise.
  static std::shared_ptr<const FastKernel> open(const std::filesystem::path& path,
                                                std::string* why = nullptr);

  const std::string& path() const noexcept { return path_; }

  fk_lcs_length_batch_fn lcs_length_batch = nullptr;
  fk_rouge_batch_fn rouge_batch = nullptr;
  fk_perturb_batch_fn perturb_batch = nullptr;

 private:
  FastKernel() = default;
  std::shared_ptr<void> handle_;
  std::string path_;
};

/// Process-wide kernel, resolved once: RSUM_FASTKERNEL names a library path
/// ("off" disables); otherwise librsum_fastkernel.so is looked up on the
/// loader path. Null when nothing usable is found.
std::shared_ptr<const FastKernel> detect();

/// Batch text kernels. Each call runs on the accelerated kernel when one is
/// attached and on the reference implementation otherwise; both paths give
/// identical results.
class TextKernels {
 public:
  /// Uses `detect()`.
  TextKernels();
  explicit TextKernels(std::shared_ptr<const FastKernel> accel) : accel_(std::move(accel)) {}

  bool accelerated() const noexcept { return accel_ != nullptr; }

  std::vector<std::size_t> lcs_length_batch(std::span<const std::vector<std::string>> a,
                                            std::span<const std::vector<std::string>> b) const;

  /// result[i][j] scores candidate i with n_values[j] (0 = ROUGE-L).
  std::vector<std::vector<eval::RougeScore>> rouge_batch(
      std::span<const std::vector<std::string>> candidates,
      std::span<const std::vector<std::vector<std::string>>> references,
      std::span<const int> n_values, eval::MultiRef mode) const;

  /// Same records as perturb::perturb_batch. The accelerated path does not
  /// report operations, so its records carry an empty oplog.
  std::vector<perturb::PerturbationRecord> perturb_batch(
      std::span<const corpus::TokenizedText> texts, std::span<const corpus::TokenizedText> donors,
      const perturb::PerturbConfig& config, std::uint64_t master_seed) const;

 private:
  std::shared_ptr<const FastKernel> accel_;
};

}  // namespace rsum::kernel
