#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rsum/optimizer.hpp"
#include "rsum/policy.hpp"

// Checkpoint layout:
//   <root>/step-000120/generator.bin    opaque generator blob
//                      manifest.json    backend, config hash, vocab size, step
//                      optimizer.bin    AdamW moments (when training)
//                      state.json       trainer RNG state and bookkeeping
//                      reports.jsonl    one record per step so far
//                      run_config.txt   resolved configuration
namespace rsum::checkpoint {

struct Manifest {
  std::string backend;
  std::string kind;  // "pretrain", "rl", or "init"
  std::string config_hash;
  std::size_t vocab_size = 0;
  int step = 0;
};

std::filesystem::path step_dir(const std::filesystem::path& root, int step);

/// Most recent step directory under root, if any.
std::optional<std::filesystem::path> latest(const std::filesystem::path& root);

/// 64-bit FNV-1a of the text, as 16 hex digits.
std::string config_hash(const std::string& text);

struct Contents {
  const policy::ConditionalGenerator* generator = nullptr;
  Manifest manifest;
  const rl::AdamW* optimizer = nullptr;
  std::string state_json;
  std::vector<std::string> report_lines;
  std::string config_text;
};

/// Writes a complete step directory, replacing any previous one atomically
/// (written to a temporary sibling, then renamed).
std::filesystem::path write(const std::filesystem::path& root, const Contents& contents);

Manifest read_manifest(const std::filesystem::path& dir);
std::vector<std::string> read_report_lines(const std::filesystem::path& dir);
std::string read_text(const std::filesystem::path& file);
void load_optimizer(const std::filesystem::path& dir, rl::AdamW& optimizer);
/// Copies a stored generator's parameters into `gen` (same backend and shape).
void load_parameters(const std::filesystem::path& dir, policy::ConditionalGenerator& gen);

}  // namespace rsum::checkpoint
