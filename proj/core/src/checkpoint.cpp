#include "rsum/checkpoint.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>

#include "rsum/backends.hpp"
#include "rsum/error.hpp"

namespace rsum::checkpoint {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path step_dir(const fs::path& root, int step) {
  char name[32];
  std::snprintf(name, sizeof name, "step-%06d", step);
  return root / name;
}

std::optional<fs::path> latest(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) return std::nullopt;
  std::optional<fs::path> best;
  for (const auto& entry : fs::directory_iterator(root)) {
    const auto name = entry.path().filename().string();
    if (!entry.is_directory() || name.rfind("step-", 0) != 0 || name.find(".tmp") != std::string::npos)
      continue;
    if (!fs::exists(entry.path() / "manifest.json")) continue;
    if (!best || name > best->filename().string()) best = entry.path();
  }
  return best;
}

std::string config_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

namespace {

void write_file(const fs::path& file, const std::string& data) {
  std::ofstream out(file, std::ios::binary);
  out << data;
  if (!out) throw IoError("cannot write '" + file.string() + "'");
}

}  // namespace

fs::path write(const fs::path& root, const Contents& c) {
  if (!c.generator) throw InvalidArgument("checkpoint needs a generator");
  const fs::path final_dir = step_dir(root, c.manifest.step);
  const fs::path tmp = final_dir.string() + ".tmp";
  std::error_code ec;
  fs::remove_all(tmp, ec);
  fs::create_directories(tmp, ec);
  if (ec) throw IoError("cannot create '" + tmp.string() + "': " + ec.message());

  {
    std::ofstream out(tmp / "generator.bin", std::ios::binary);
    if (!out) throw IoError("cannot write generator blob");
    c.generator->save(out);
    if (!out) throw IoError("cannot write generator blob");
  }
  json m = {{"backend", c.manifest.backend},
            {"kind", c.manifest.kind},
            {"config_hash", c.manifest.config_hash},
            {"vocab_size", c.manifest.vocab_size},
            {"step", c.manifest.step}};
  write_file(tmp / "manifest.json", m.dump(2) + "\n");
  if (c.optimizer) {
    std::ofstream out(tmp / "optimizer.bin", std::ios::binary);
    c.optimizer->save(out);
  }
  if (!c.state_json.empty()) write_file(tmp / "state.json", c.state_json + "\n");
  std::string reports;
  for (const auto& line : c.report_lines) reports += line + "\n";
  write_file(tmp / "reports.jsonl", reports);
  if (!c.config_text.empty()) write_file(tmp / "run_config.txt", c.config_text);

  fs::remove_all(final_dir, ec);
  fs::rename(tmp, final_dir, ec);
  if (ec) throw IoError("cannot finalize checkpoint '" + final_dir.string() + "': " + ec.message());
  return final_dir;
}

std::string read_text(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot read '" + file.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Manifest read_manifest(const fs::path& dir) {
  try {
    const auto j = json::parse(read_text(dir / "manifest.json"));
    Manifest m;
    m.backend = j.at("backend").get<std::string>();
    m.kind = j.value("kind", std::string("rl"));
    m.config_hash = j.value("config_hash", std::string());
    m.vocab_size = j.at("vocab_size").get<std::size_t>();
    m.step = j.at("step").get<int>();
    return m;
  } catch (const json::exception& e) {
    throw IoError("malformed manifest in '" + dir.string() + "': " + e.what());
  }
}

std::vector<std::string> read_report_lines(const fs::path& dir) {
  std::vector<std::string> lines;
  std::ifstream in(dir / "reports.jsonl");
  if (!in) return lines;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(line);
  return lines;
}

void load_optimizer(const fs::path& dir, rl::AdamW& optimizer) {
  std::ifstream in(dir / "optimizer.bin", std::ios::binary);
  if (!in) throw IoError("checkpoint '" + dir.string() + "' has no optimizer state");
  optimizer.load(in);
}

void load_parameters(const fs::path& dir, policy::ConditionalGenerator& gen) {
  const auto stored = backends::load_generator(dir / "generator.bin");
  auto src = std::as_const(*stored).parameters();
  auto dst = gen.parameters();
  if (stored->backend() != gen.backend() || src.size() != dst.size())
    throw IoError("checkpoint generator does not match the running backend");
  std::copy(src.begin(), src.end(), dst.begin());
}

}  // namespace rsum::checkpoint
