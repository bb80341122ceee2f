#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "rsum/perturb.hpp"
#include "rsum/policy.hpp"
#include "rsum/rewards.hpp"
#include "rsum/rl.hpp"
#include "rsum/toy.hpp"

namespace rsum::config {

struct KeyInfo {
  std::string name;
  std::string default_value;
  std::string doc;
};

/// Every recognised key in display order.
const std::vector<KeyInfo>& registry();
bool is_known(std::string_view key);

/// Flat key=value run configuration. Every key always has a value; setting
/// an unknown key throws ConfigError.
class RunConfig {
 public:
  /// All documented defaults.
  RunConfig();

  void set(const std::string& key, std::string value);
  const std::string& get(const std::string& key) const;

  std::string str(const std::string& key) const { return get(key); }
  int integer(const std::string& key) const;
  std::uint64_t u64(const std::string& key) const;
  double real(const std::string& key) const;
  bool boolean(const std::string& key) const;
  /// Comma-separated, whitespace-trimmed, empties dropped.
  std::vector<std::string> list(const std::string& key) const;

  /// key = value lines; blank lines and '#' comments are ignored.
  void merge_text(std::string_view text, const std::string& origin = "<text>");
  void merge_file(const std::filesystem::path& path);
  /// RSUM_<KEY> with the key upper-cased, e.g. RSUM_SIGMA_F.
  void merge_env(const std::function<const char*(const char*)>& getenv);

  /// Resolved configuration in registry order; merge_text of this text
  /// reproduces the same configuration.
  std::string to_text() const;
  void write(const std::filesystem::path& path) const;

  rewards::RewardConfig reward_config() const;
  rl::TrainConfig train_config() const;
  rl::PretrainConfig pretrain_config() const;
  perturb::PerturbConfig perturb_config() const;
  policy::PatternConfig pattern_config() const;
  toy::ToyGenerator::Options toy_options() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

 private:
  std::map<std::string, std::string> values_;
};

std::string env_name(std::string_view key);

}  // namespace rsum::config
