#include "rsum/backends.hpp"

#include <charconv>
#include <fstream>
#include <httplib.h>
#include <json.hpp>

#include "rsum/error.hpp"

namespace rsum::backends {

using nlohmann::json;

namespace {

json post_json(const std::string& url, const std::string& path, const json& body) {
  httplib::Client client(url);
  client.set_connection_timeout(5);
  client.set_read_timeout(60);
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) throw IoError("request to " + url + path + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw IoError("request to " + url + path + " returned HTTP " + std::to_string(res->status));
  try {
    return json::parse(res->body);
  } catch (const json::exception& e) {
    throw IoError("malformed response from " + url + path + ": " + e.what());
  }
}

std::uint64_t parse_seed(std::string_view s) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ConfigError("bad embedder seed '" + std::string(s) + "'");
  return v;
}

}  // namespace

bool is_remote(const std::string& id) {
  return id.rfind("http://", 0) == 0 || id.rfind("https://", 0) == 0;
}

std::unique_ptr<TextEmbedder> make_embedder(const std::string& id,
                                            std::span<const corpus::TokenizedText> fit_corpus) {
  if (is_remote(id)) return std::make_unique<RemoteEmbedder>(id);
  if (id == "hash-bow-plain") return std::make_unique<toy::HashedBagOfWords>(64, 0);
  if (id == "hash-bow" || id.rfind("hash-bow:", 0) == 0) {
    const std::uint64_t seed = id == "hash-bow" ? 0 : parse_seed(std::string_view(id).substr(9));
    auto e = std::make_unique<toy::HashedBagOfWords>(64, seed);
    e->fit_idf(fit_corpus);
    return e;
  }
  throw ConfigError("unknown embedder backend '" + id + "'");
}

std::unique_ptr<LanguageModel> make_language_model(const std::string& id,
                                                   std::span<const corpus::TokenizedText> corpus) {
  if (is_remote(id)) return std::make_unique<RemoteLanguageModel>(id);
  if (id == "bigram") {
    if (corpus.empty()) throw ConfigError("the bigram language model needs a corpus");
    return std::make_unique<toy::BigramLanguageModel>(corpus);
  }
  throw ConfigError("unknown language model backend '" + id + "'");
}

std::unique_ptr<policy::ConditionalGenerator> make_generator(
    const std::string& id, const corpus::Vocabulary& vocabulary,
    const toy::ToyGenerator::Options& toy_options) {
  if (is_remote(id)) return std::make_unique<RemoteGenerator>(id);
  if (id == "toy") return std::make_unique<toy::ToyGenerator>(vocabulary, toy_options);
  throw ConfigError("unknown generator backend '" + id + "'");
}

std::unique_ptr<policy::ConditionalGenerator> load_generator(const std::filesystem::path& blob) {
  std::ifstream in(blob, std::ios::binary);
  if (!in) throw IoError("cannot open generator blob '" + blob.string() + "'");
  std::string backend;
  std::getline(in, backend);
  in.seekg(0);
  if (backend == "toy") return std::make_unique<toy::ToyGenerator>(toy::ToyGenerator::load(in));
  if (backend == "remote") {
    std::string line, url;
    std::getline(in, line);
    std::getline(in, url);
    return std::make_unique<RemoteGenerator>(url);
  }
  throw IoError("unknown generator blob backend '" + backend + "'");
}

// Remote adapters ------------------------------------------------------------

RemoteEmbedder::RemoteEmbedder(std::string url) : url_(std::move(url)) {
  const auto info = post_json(url_, "/info", json::object());
  dimension_ = info.at("dimension").get<std::size_t>();
}

Embedding RemoteEmbedder::embed(std::span<const std::string> tokens) const {
  try {
    const auto res = post_json(url_, "/embed", {{"tokens", std::vector<std::string>(tokens.begin(), tokens.end())}});
    return res.at("embedding").get<Embedding>();
  } catch (const std::exception& e) {
    throw EmbedderFailure(e.what());
  }
}

RemoteLanguageModel::RemoteLanguageModel(std::string url) : url_(std::move(url)) {}

std::vector<double> RemoteLanguageModel::token_logprobs(std::span<const std::string> tokens) const {
  try {
    const auto res = post_json(url_, "/logprobs", {{"tokens", std::vector<std::string>(tokens.begin(), tokens.end())}});
    return res.at("logprobs").get<std::vector<double>>();
  } catch (const std::exception& e) {
    throw LanguageModelFailure(e.what());
  }
}

RemoteGenerator::RemoteGenerator(std::string url) : url_(std::move(url)) {
  const auto info = post_json(url_, "/info", json::object());
  const auto words = info.at("vocabulary").get<std::vector<std::string>>();
  if (words.empty() || words.front() != corpus::Vocabulary::kUnknownWord)
    throw GeneratorFailure("remote vocabulary must start with " + std::string(corpus::Vocabulary::kUnknownWord));
  for (std::size_t i = 1; i < words.size(); ++i) vocab_.add(words[i]);
}

std::vector<double> RemoteGenerator::next_token_distribution(const corpus::PromptedInput& input,
                                                             std::span<const corpus::TokenId> prefix) const {
  try {
    const auto res = post_json(url_, "/next",
                               {{"input", input.serialized},
                                {"prefix", std::vector<corpus::TokenId>(prefix.begin(), prefix.end())}});
    return res.at("probs").get<std::vector<double>>();
  } catch (const std::exception& e) {
    throw GeneratorFailure(e.what());
  }
}

void RemoteGenerator::save(std::ostream& out) const { out << "remote\n" << url_ << "\n"; }

}  // namespace rsum::backends
