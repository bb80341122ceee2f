#include "rsum/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "rsum/error.hpp"

namespace rsum::config {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<KeyInfo> build_registry() {
  return {
      // paths
      {"corpus", "", "training corpus, one sentence per line"},
      {"corpus_limit", "0", "read at most this many corpus lines (0 = all)"},
      {"validation_size", "500", "texts held out from the corpus for validation"},
      {"dataset", "", "pretraining TSV (written by pretrain-data, read by pretrain)"},
      {"eval_dataset", "", "evaluation TSV: input, then one column per reference"},
      {"checkpoint", "", "checkpoint step directory (or root: latest step) to start from"},
      {"resume", "false", "continue optimizer and trainer state from `checkpoint`"},
      {"output", "", "checkpoint root for pretrain / train-rl"},
      {"input", "", "texts to summarize, one per line"},
      {"summaries", "", "summaries file (written by summarize, read by evaluate)"},
      {"report", "", "evaluation report path"},
      // backends
      {"generator", "toy", "generator backend: toy | http://host:port"},
      {"embedder", "hash-bow", "reward embedder: hash-bow | hash-bow-plain | hash-bow:<seed> | http://..."},
      {"eval_embedder", "hash-bow:1", "embedder for the fidelity metric"},
      {"lm", "bigram", "language model: bigram | http://host:port"},
      {"toy_bigram", "true", "toy generator: bigram features"},
      {"toy_per_word_copy", "true", "toy generator: per-word copy weights"},
      {"toy_max_offset", "16", "toy generator: remaining-length buckets per side"},
      // rewards
      {"sigma_f", "1000", "fluency scale"},
      {"sigma_l", "10", "length scale"},
      {"lambda", "0.01", "multi-summary quality weight"},
      {"alpha", "0.3", "usefulness exponent"},
      {"max_gen_len", "0", "maximum generated words (0 = ceil(1.5 * target))"},
      {"sigma_ae", "", "reconstruction-reward scale (unset = unused)"},
      // training
      {"mode", "msl", "msl | single"},
      {"lengths", "8,10,13", "target lengths: word counts or ratios such as 0.3,0.4,0.5"},
      {"learning_rate", "5e-5", "AdamW learning rate"},
      {"weight_decay", "0.01", "AdamW decoupled weight decay"},
      {"batch_size", "24", "texts per step"},
      {"max_steps", "0", "optimizer steps"},
      {"seed", "0", "master seed"},
      {"eval_every", "0", "validate every N steps (0 = never)"},
      {"validation_limit", "500", "validation texts used per validation"},
      {"patience", "0", "stop after N validations without improvement (0 = never)"},
      {"checkpoint_every", "0", "write a checkpoint every N steps (0 = only at the end)"},
      // perturbation
      {"shuffle_ratio", "0.1", "fraction of words shuffled"},
      {"drop_ratio", "0.1", "fraction of words dropped"},
      {"add_ratio", "1.0", "words added from the donor, as a fraction of the text length"},
      // decoding
      {"length", "10", "summary length for summarize: word count or ratio"},
      {"beam_size", "20", "beam width"},
      {"banned_endings", "'s,a,and,at,but,by,for,her,his,in,into,is,of,on,the,to,when,with",
       "words stripped from the end of beam candidates"},
      {"banned_anywhere", "friday,monday,saturday,sunday,thursday,tuesday,wednesday",
       "words removed from beam candidates"},
      // evaluation
      {"protocol", "gigaword_f1", "gigaword_f1 | duc_recall"},
      // execution
      {"workers", "1", "worker threads for data generation"},
  };
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end)
    throw ConfigError("key '" + key + "': cannot parse '" + v + "' as a number");
  return out;
}

}  // namespace

const std::vector<KeyInfo>& registry() {
  static const std::vector<KeyInfo> keys = build_registry();
  return keys;
}

bool is_known(std::string_view key) {
  const auto& r = registry();
  return std::any_of(r.begin(), r.end(), [&](const KeyInfo& k) { return k.name == key; });
}

std::string env_name(std::string_view key) {
  std::string out = "RSUM_";
  for (char c : key) out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

RunConfig::RunConfig() {
  for (const auto& k : registry()) values_[k.name] = k.default_value;
}

void RunConfig::set(const std::string& key, std::string value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown configuration key '" + key + "'");
  it->second = trim(value);
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown configuration key '" + key + "'");
  return it->second;
}

int RunConfig::integer(const std::string& key) const { return parse_number<int>(key, get(key)); }

std::uint64_t RunConfig::u64(const std::string& key) const {
  return parse_number<std::uint64_t>(key, get(key));
}

double RunConfig::real(const std::string& key) const {
  return parse_number<double>(key, get(key));
}

bool RunConfig::boolean(const std::string& key) const {
  const auto& v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("key '" + key + "': expected a boolean, got '" + v + "'");
}

std::vector<std::string> RunConfig::list(const std::string& key) const {
  std::vector<std::string> out;
  std::stringstream ss(get(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void RunConfig::merge_text(std::string_view text, const std::string& origin) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::string clean = trim(line);
    if (clean.empty() || clean[0] == '#') continue;
    const auto eq = clean.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(std::string_view(clean).substr(0, eq));
    if (!is_known(key))
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    set(key, clean.substr(eq + 1));
  }
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  merge_text(ss.str(), path.string());
}

void RunConfig::merge_env(const std::function<const char*(const char*)>& getenv) {
  for (const auto& k : registry())
    if (const char* v = getenv(env_name(k.name).c_str())) set(k.name, v);
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& k : registry()) out += k.name + " = " + values_.at(k.name) + "\n";
  return out;
}

void RunConfig::write(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << to_text();
  if (!out) throw IoError("cannot write config '" + path.string() + "'");
}

rewards::RewardConfig RunConfig::reward_config() const {
  rewards::RewardConfig c;
  c.sigma_f = real("sigma_f");
  c.sigma_l = real("sigma_l");
  c.lambda = real("lambda");
  c.alpha = real("alpha");
  c.max_gen_len = integer("max_gen_len");
  if (!get("sigma_ae").empty()) c.sigma_ae = real("sigma_ae");
  c.validate();
  return c;
}

rl::TrainConfig RunConfig::train_config() const {
  rl::TrainConfig c;
  c.learning_rate = real("learning_rate");
  c.weight_decay = real("weight_decay");
  c.batch_size = integer("batch_size");
  c.lengths.clear();
  for (const auto& s : list("lengths")) c.lengths.push_back(corpus::LengthSpec::parse(s));
  c.mode = rl::parse_mode(get("mode"));
  c.max_steps = integer("max_steps");
  c.seed = u64("seed");
  c.eval_every = integer("eval_every");
  c.validation_limit = static_cast<std::size_t>(integer("validation_limit"));
  c.patience = integer("patience");
  c.checkpoint_every = integer("checkpoint_every");
  c.validate();
  return c;
}

rl::PretrainConfig RunConfig::pretrain_config() const {
  rl::PretrainConfig c;
  c.learning_rate = real("learning_rate");
  c.weight_decay = real("weight_decay");
  c.batch_size = integer("batch_size");
  c.max_steps = integer("max_steps");
  c.seed = u64("seed");
  c.checkpoint_every = integer("checkpoint_every");
  if (c.batch_size < 1) throw ConfigError("batch_size must be positive");
  if (c.max_steps < 0) throw ConfigError("max_steps must be non-negative");
  return c;
}

perturb::PerturbConfig RunConfig::perturb_config() const {
  perturb::PerturbConfig c;
  c.shuffle_ratio = real("shuffle_ratio");
  c.drop_ratio = real("drop_ratio");
  c.add_ratio = real("add_ratio");
  c.seed = u64("seed");
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

policy::PatternConfig RunConfig::pattern_config() const {
  policy::PatternConfig c;
  for (const auto& w : list("banned_endings")) c.banned_endings.insert(w);
  for (const auto& w : list("banned_anywhere")) c.banned_anywhere.insert(w);
  return c;
}

toy::ToyGenerator::Options RunConfig::toy_options() const {
  toy::ToyGenerator::Options o;
  o.bigram = boolean("toy_bigram");
  o.per_word_copy = boolean("toy_per_word_copy");
  o.max_offset = integer("toy_max_offset");
  if (o.max_offset < 1) throw ConfigError("toy_max_offset must be positive");
  return o;
}

}  // namespace rsum::config
