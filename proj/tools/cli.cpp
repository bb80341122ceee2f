#include "cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>

#include "rsum/backends.hpp"
#include "rsum/checkpoint.hpp"
#include "rsum/corpus.hpp"
#include "rsum/error.hpp"
#include "rsum/eval.hpp"
#include "rsum/perturb.hpp"
#include "rsum/policy.hpp"
#include "rsum/rl.hpp"

namespace rsum::cli {

namespace fs = std::filesystem;

namespace {

fs::path required_path(const config::RunConfig& cfg, const std::string& key) {
  const auto& v = cfg.get(key);
  if (v.empty()) throw ConfigError("'" + key + "' must be set for this command");
  return v;
}

std::optional<std::size_t> corpus_limit(const config::RunConfig& cfg) {
  const int n = cfg.integer("corpus_limit");
  if (n < 0) throw ConfigError("corpus_limit must be non-negative");
  return n == 0 ? std::nullopt : std::optional<std::size_t>(static_cast<std::size_t>(n));
}

/// A step directory, or the latest step under a checkpoint root.
fs::path resolve_checkpoint(const fs::path& p) {
  if (fs::exists(p / "manifest.json")) return p;
  if (auto latest = checkpoint::latest(p)) return *latest;
  throw IoError("no checkpoint found at '" + p.string() + "'");
}

void write_resolved(const config::RunConfig& cfg, const fs::path& path) { cfg.write(path); }

fs::path sidecar(const fs::path& file, const std::string& suffix) {
  return file.string() + suffix;
}

/// Raw lines, blank ones included, so summaries stay aligned with inputs.
std::vector<corpus::TokenizedText> read_summary_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open summaries '" + path.string() + "'");
  std::vector<corpus::TokenizedText> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      out.emplace_back();
      continue;
    }
    out.push_back(corpus::tokenize(line));
  }
  return out;
}

struct Models {
  std::unique_ptr<TextEmbedder> embedder;
  std::unique_ptr<LanguageModel> lm;
};

Models make_models(const config::RunConfig& cfg, std::span<const corpus::TokenizedText> fallback) {
  std::vector<corpus::TokenizedText> fit;
  if (!cfg.get("corpus").empty()) fit = corpus::load_corpus(cfg.get("corpus"), corpus_limit(cfg));
  const std::span<const corpus::TokenizedText> texts = fit.empty() ? fallback : fit;
  return {backends::make_embedder(cfg.get("embedder"), texts),
          backends::make_language_model(cfg.get("lm"), texts)};
}

std::unique_ptr<policy::ConditionalGenerator> generator_for(
    const config::RunConfig& cfg, std::span<const corpus::TokenizedText> vocab_texts) {
  if (!cfg.get("checkpoint").empty())
    return backends::load_generator(resolve_checkpoint(cfg.get("checkpoint")) / "generator.bin");
  return backends::make_generator(cfg.get("generator"), corpus::Vocabulary::build(vocab_texts),
                                  cfg.toy_options());
}

struct SummaryRun {
  std::vector<corpus::TokenizedText> summaries;
  std::vector<std::size_t> fallbacks;
  double seconds = 0;
};

SummaryRun summarize_texts(const config::RunConfig& cfg, const policy::ConditionalGenerator& gen,
                           std::span<const corpus::TokenizedText> texts, const Models& models) {
  const auto rcfg = cfg.reward_config();
  const auto patterns = cfg.pattern_config();
  const auto spec = corpus::LengthSpec::parse(cfg.get("length"));
  const int beam = cfg.integer("beam_size");
  if (beam < 1) throw ConfigError("beam_size must be positive");
  SummaryRun run;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const int target = corpus::resolve_length(spec, texts[i]);
    const auto input = corpus::make_prompted_input(texts[i], target);
    const auto beams = policy::beam_search(gen, input, beam, rcfg.max_len_for(target));
    try {
      const auto sel = policy::select_best(beams, texts[i].tokens, target, *models.embedder,
                                           *models.lm, rcfg, patterns);
      run.summaries.push_back(corpus::from_tokens(sel.summary.tokens));
    } catch (const AllCandidatesEmpty&) {
      run.fallbacks.push_back(i);
      run.summaries.push_back(beams.empty() ? corpus::TokenizedText{}
                                            : corpus::from_tokens(beams.front().tokens));
    }
  }
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

}  // namespace

void cmd_pretrain_data(const config::RunConfig& cfg, std::ostream& out) {
  const auto corpus_path = required_path(cfg, "corpus");
  const auto dataset = required_path(cfg, "dataset");
  const auto pcfg = cfg.perturb_config();
  const int workers = cfg.integer("workers");
  if (workers < 1) throw ConfigError("workers must be positive");
  const auto texts = corpus::load_corpus(corpus_path, corpus_limit(cfg));
  const auto n = perturb::generate_dataset(texts, pcfg, dataset, static_cast<unsigned>(workers));
  write_resolved(cfg, sidecar(dataset, ".run_config.txt"));
  out << "records = " << n << "\n";
}

void cmd_pretrain(const config::RunConfig& cfg, std::ostream& out) {
  const auto data = perturb::load_dataset(required_path(cfg, "dataset"));
  const auto output = required_path(cfg, "output");
  const auto pcfg = cfg.pretrain_config();

  std::vector<corpus::TokenizedText> vocab_texts;
  for (const auto& p : data) {
    vocab_texts.push_back(p.input.body);
    vocab_texts.push_back(p.target);
  }
  auto gen = generator_for(cfg, vocab_texts);
  rl::TrainOptions opts;
  opts.output_dir = output;
  opts.config_text = cfg.to_text();
  if (cfg.boolean("resume")) opts.resume_from = resolve_checkpoint(required_path(cfg, "checkpoint"));

  const auto result = rl::pretrain(*gen, pcfg, data, opts);
  write_resolved(cfg, output / "run_config.txt");
  std::ofstream curve(output / "pretrain_loss.tsv");
  curve << "step\tloss\n" << std::setprecision(10);
  for (std::size_t i = 0; i < result.losses.size(); ++i) curve << i + 1 << "\t" << result.losses[i] << "\n";
  if (!curve) throw IoError("cannot write loss curve under '" + output.string() + "'");

  out << "steps = " << result.final_step << "\n";
  if (!result.losses.empty())
    out << "initial_loss = " << result.losses.front() << "\nfinal_loss = " << result.losses.back() << "\n";
  if (result.last_checkpoint) out << "checkpoint = " << result.last_checkpoint->string() << "\n";
}

void cmd_train_rl(const config::RunConfig& cfg, std::ostream& out) {
  const auto output = required_path(cfg, "output");
  const auto tcfg = cfg.train_config();
  const auto rcfg = cfg.reward_config();
  const auto texts = corpus::load_corpus(required_path(cfg, "corpus"), corpus_limit(cfg));
  const auto split = corpus::split_validation(
      texts, static_cast<std::size_t>(cfg.integer("validation_size")), tcfg.seed);

  auto gen = generator_for(cfg, texts);
  const Models models{backends::make_embedder(cfg.get("embedder"), split.train),
                      backends::make_language_model(cfg.get("lm"), split.train)};
  rl::TrainOptions opts;
  opts.output_dir = output;
  opts.config_text = cfg.to_text();
  if (cfg.boolean("resume")) opts.resume_from = resolve_checkpoint(required_path(cfg, "checkpoint"));
  opts.on_validation = [&](const rl::ValidationPoint& p) {
    out << "validation step=" << p.step << " reward=" << p.report.mean_reward
        << " length_reward=" << p.report.mean_length_reward
        << " abs_length_error=" << p.report.mean_abs_length_error << "\n";
  };

  const rl::RewardContext ctx{rcfg, *models.embedder, *models.lm};
  const auto result = rl::train(*gen, tcfg, split, ctx, opts);
  write_resolved(cfg, output / "run_config.txt");
  std::ofstream log(output / "train_log.jsonl");
  for (const auto& r : result.reports) log << r.to_json() << "\n";
  if (!log) throw IoError("cannot write training log under '" + output.string() + "'");

  out << "steps = " << result.final_step << "\n";
  out << "stopped_early = " << (result.stopped_early ? "true" : "false") << "\n";
  if (!result.reports.empty())
    out << "final_sampled_reward = " << result.reports.back().mean_sampled_reward << "\n";
  if (result.last_checkpoint) out << "checkpoint = " << result.last_checkpoint->string() << "\n";
}

void cmd_summarize(const config::RunConfig& cfg, std::ostream& out) {
  const auto inputs = corpus::load_corpus(required_path(cfg, "input"));
  const auto dest = required_path(cfg, "summaries");
  auto gen = generator_for(cfg, inputs);
  const auto models = make_models(cfg, inputs);
  const auto run = summarize_texts(cfg, *gen, inputs, models);

  std::ofstream file(dest);
  double total_len = 0;
  for (const auto& s : run.summaries) {
    file << s.raw << "\n";
    total_len += static_cast<double>(s.size());
  }
  if (!file) throw IoError("cannot write summaries '" + dest.string() + "'");
  std::ofstream flags(sidecar(dest, ".fallbacks"));
  for (auto i : run.fallbacks) flags << i + 1 << "\n";
  write_resolved(cfg, sidecar(dest, ".run_config.txt"));

  const double n = static_cast<double>(std::max<std::size_t>(1, run.summaries.size()));
  out << "summaries = " << run.summaries.size() << "\n";
  out << "mean_length = " << total_len / n << "\n";
  out << "ms_per_item = " << 1000.0 * run.seconds / n << "\n";
  out << "fallbacks = " << run.fallbacks.size() << "\n";
  for (auto i : run.fallbacks)
    out << "fallback line " << i + 1 << ": every filtered candidate was empty; wrote the top beam\n";
}

void cmd_evaluate(const config::RunConfig& cfg, std::ostream& out) {
  const auto dataset = eval::load_eval_dataset(required_path(cfg, "eval_dataset"));
  const auto report_path = required_path(cfg, "report");
  const auto protocol = eval::parse_protocol(cfg.get("protocol"));
  std::vector<corpus::TokenizedText> inputs;
  for (const auto& item : dataset) inputs.push_back(item.input);
  const auto models = make_models(cfg, inputs);

  std::vector<corpus::TokenizedText> summaries;
  std::string source;
  if (!cfg.get("summaries").empty()) {
    summaries = read_summary_lines(cfg.get("summaries"));
    source = cfg.get("summaries");
  } else if (!cfg.get("checkpoint").empty()) {
    auto gen = generator_for(cfg, inputs);
    summaries = summarize_texts(cfg, *gen, inputs, models).summaries;
    source = cfg.get("checkpoint");
  } else {
    throw ConfigError("evaluate needs 'summaries' or 'checkpoint'");
  }

  auto eval_embedder = backends::make_embedder(cfg.get("eval_embedder"), inputs);
  eval::EvalContext ctx{eval_embedder.get(), models.lm.get(), cfg.real("sigma_f")};
  auto report = eval::evaluate(dataset, summaries, protocol, ctx);
  report.metadata.push_back({"source", source});
  report.metadata.push_back({"length", cfg.get("length")});
  const auto text = report.to_text();

  if (report_path.has_parent_path()) fs::create_directories(report_path.parent_path());
  std::ofstream file(report_path);
  file << text;
  if (!file) throw IoError("cannot write report '" + report_path.string() + "'");
  write_resolved(cfg, sidecar(report_path, ".run_config.txt"));
  out << text;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reward-driven unsupervised sentence summarization", "rsum"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file;
  app.add_option("--config", config_file, "key = value file (flags > RSUM_* environment > file > defaults)");
  std::map<std::string, std::string> flags;
  for (const auto& k : config::registry())
    app.add_option("--" + k.name, flags[k.name], k.doc + " [default: " + k.default_value + "]");

  using Command = void (*)(const config::RunConfig&, std::ostream&);
  const std::pair<const char*, Command> commands[] = {
      {"pretrain-data", cmd_pretrain_data}, {"pretrain", cmd_pretrain},
      {"train-rl", cmd_train_rl},           {"summarize", cmd_summarize},
      {"evaluate", cmd_evaluate}};
  const char* docs[] = {"perturb a corpus into a reconstruction dataset",
                        "reconstruction pretraining",
                        "reinforcement-learning training",
                        "summarize input lines with beam search and selection",
                        "score summaries against references"};
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < std::size(commands); ++i) subs.push_back(app.add_subcommand(commands[i].first, docs[i]));

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    config::RunConfig cfg;
    if (!config_file.empty()) cfg.merge_file(config_file);
    cfg.merge_env([](const char* name) { return static_cast<const char*>(std::getenv(name)); });
    for (const auto& k : config::registry())
      if (app.count("--" + k.name) > 0) cfg.set(k.name, flags[k.name]);
    for (std::size_t i = 0; i < subs.size(); ++i)
      if (subs[i]->parsed()) commands[i].second(cfg, out);
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace rsum::cli
