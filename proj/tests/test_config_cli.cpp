#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "rsum/config.hpp"
#include "rsum/error.hpp"
#include "rsum/toy.hpp"

using namespace rsum;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

struct Run {
  int code;
  std::string out, err;
};

Run invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("rsum_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::string lines;
    for (const auto& t : toy::synthetic_corpus(120, 5)) lines += t.raw + "\n";
    spit(dir / "corpus.txt", lines);
  }
  void TearDown() override { fs::remove_all(dir); }

  std::string p(const char* name) const { return (dir / name).string(); }

  fs::path dir;
};

}  // namespace

TEST(RunConfig, DocumentedDefaults) {
  const config::RunConfig c;
  EXPECT_EQ(c.real("sigma_f"), 1000.0);
  EXPECT_EQ(c.real("sigma_l"), 10.0);
  EXPECT_EQ(c.real("lambda"), 0.01);
  EXPECT_EQ(c.real("alpha"), 0.3);
  EXPECT_EQ(c.real("learning_rate"), 5e-5);
  EXPECT_EQ(c.integer("batch_size"), 24);
  EXPECT_EQ(c.real("weight_decay"), 0.01);
  EXPECT_EQ(c.integer("beam_size"), 20);
  EXPECT_EQ(c.get("mode"), "msl");
  EXPECT_EQ(c.list("lengths"), (std::vector<std::string>{"8", "10", "13"}));
  const auto pc = c.perturb_config();
  EXPECT_EQ(pc.shuffle_ratio, 0.1);
  EXPECT_EQ(pc.drop_ratio, 0.1);
  EXPECT_EQ(pc.add_ratio, 1.0);
  for (const auto& k : config::registry()) EXPECT_FALSE(k.doc.empty()) << k.name;
}

TEST(RunConfig, UnknownKeysAreRejected) {
  config::RunConfig c;
  EXPECT_THROW(c.set("sigma_x", "1"), ConfigError);
  EXPECT_THROW(c.get("nope"), ConfigError);
  EXPECT_THROW(c.merge_text("sigma_f = 5\nbogus = 1\n"), ConfigError);
  EXPECT_THROW(c.merge_text("no equals sign\n"), ConfigError);
}

TEST(RunConfig, FileSyntaxAndRoundTrip) {
  config::RunConfig c;
  c.merge_text("# a comment\n\n  sigma_f =  250 \nlengths = 0.3, 0.5\n");
  EXPECT_EQ(c.real("sigma_f"), 250.0);
  EXPECT_EQ(c.list("lengths"), (std::vector<std::string>{"0.3", "0.5"}));
  config::RunConfig back;
  back.merge_text(c.to_text());
  EXPECT_EQ(back, c);
}

TEST(RunConfig, TypedAccessorsValidate) {
  config::RunConfig c;
  c.set("batch_size", "many");
  EXPECT_THROW(c.integer("batch_size"), ConfigError);
  c.set("resume", "maybe");
  EXPECT_THROW(c.boolean("resume"), ConfigError);
  c.set("mode", "both");
  EXPECT_ANY_THROW(c.train_config());
  config::RunConfig r;
  r.set("drop_ratio", "3");
  EXPECT_THROW(r.perturb_config(), ConfigError);
}

TEST(RunConfig, EnvironmentNames) {
  EXPECT_EQ(config::env_name("sigma_f"), "RSUM_SIGMA_F");
  config::RunConfig c;
  c.merge_env([](const char* name) -> const char* {
    return std::string_view(name) == "RSUM_ALPHA" ? "0.7" : nullptr;
  });
  EXPECT_EQ(c.real("alpha"), 0.7);
}

TEST_F(CliTest, PrecedenceFlagOverEnvOverFileOverDefault) {
  spit(dir / "run.cfg", "sigma_f = 111\nsigma_l = 222\nalpha = 0.9\n");
  ::setenv("RSUM_SIGMA_L", "333", 1);
  ::setenv("RSUM_ALPHA", "0.8", 1);
  const auto r = invoke({"pretrain-data", "--config", p("run.cfg"), "--corpus", p("corpus.txt"),
                      "--dataset", p("data.tsv"), "--alpha", "0.5"});
  ::unsetenv("RSUM_SIGMA_L");
  ::unsetenv("RSUM_ALPHA");
  ASSERT_EQ(r.code, 0) << r.err;
  config::RunConfig resolved;
  resolved.merge_file(p("data.tsv.run_config.txt"));
  EXPECT_EQ(resolved.real("sigma_f"), 111.0);  // file
  EXPECT_EQ(resolved.real("sigma_l"), 333.0);  // env over file
  EXPECT_EQ(resolved.real("alpha"), 0.5);      // flag over env
  EXPECT_EQ(resolved.real("lambda"), 0.01);    // default
}

TEST_F(CliTest, ErrorsGiveNonzeroExit) {
  EXPECT_NE(invoke({}).code, 0);
  EXPECT_NE(invoke({"no-such-command"}).code, 0);
  EXPECT_NE(invoke({"pretrain-data", "--bogus_key", "1"}).code, 0);
  const auto missing = invoke({"pretrain-data", "--dataset", p("x.tsv")});
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.err.find("corpus"), std::string::npos);
  spit(dir / "bad.cfg", "unknown_thing = 4\n");
  EXPECT_EQ(invoke({"pretrain-data", "--config", p("bad.cfg")}).code, 2);
  EXPECT_EQ(invoke({"summarize", "--input", p("absent.txt"), "--summaries", p("s.txt")}).code, 2);
  EXPECT_EQ(invoke({"--help"}).code, 0);
}

TEST_F(CliTest, PretrainDataRatiosPropagate) {
  ASSERT_EQ(invoke({"pretrain-data", "--corpus", p("corpus.txt"), "--dataset", p("a.tsv")}).code, 0);
  ASSERT_EQ(invoke({"pretrain-data", "--corpus", p("corpus.txt"), "--dataset", p("b.tsv"),
                 "--shuffle_ratio", "0", "--drop_ratio", "0", "--add_ratio", "0"}).code, 0);
  const auto a = perturb::load_dataset(p("a.tsv"));
  const auto b = perturb::load_dataset(p("b.tsv"));
  ASSERT_EQ(a.size(), 120u);
  ASSERT_EQ(b.size(), 120u);
  for (std::size_t i = 0; i < b.size(); ++i) {
    EXPECT_EQ(b[i].input.body.tokens, b[i].target.tokens);
    const std::size_t n = a[i].target.size();
    const std::size_t k = perturb::stage_count(0.1, n);
    EXPECT_EQ(a[i].input.body.size(), n - k + n);
  }
  // Shards draw from per-shard streams, so reruns with the same worker
  // count are byte-identical.
  for (const char* w : {"c.tsv", "d.tsv"})
    ASSERT_EQ(invoke({"pretrain-data", "--corpus", p("corpus.txt"), "--dataset", p(w), "--workers", "4"}).code, 0);
  EXPECT_EQ(slurp(p("c.tsv")), slurp(p("d.tsv")));
  EXPECT_EQ(perturb::load_dataset(p("c.tsv")).size(), 120u);
}

TEST_F(CliTest, FullPipelineAndRerunIsBitIdentical) {
  const std::vector<std::string> small = {"--max_steps", "3", "--batch_size", "4",
                                          "--learning_rate", "0.01", "--toy_max_offset", "4",
                                          "--lengths", "4,6", "--validation_size", "20"};
  ASSERT_EQ(invoke({"pretrain-data", "--corpus", p("corpus.txt"), "--dataset", p("data.tsv")}).code, 0);
  auto args = std::vector<std::string>{"pretrain", "--dataset", p("data.tsv"), "--output", p("pre")};
  args.insert(args.end(), small.begin(), small.end());
  auto r = invoke(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("steps = 3"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(p("pre") + "/pretrain_loss.tsv"));

  args = {"train-rl", "--corpus", p("corpus.txt"), "--checkpoint", p("pre"), "--output", p("rl"),
          "--eval_every", "3", "--validation_limit", "10"};
  args.insert(args.end(), small.begin(), small.end());
  r = invoke(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("validation step=3"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(p("rl") + "/train_log.jsonl"));

  std::string inputs;
  const auto corpus = corpus::load_corpus(p("corpus.txt"));
  for (std::size_t i = 0; i < 8; ++i) inputs += corpus[i].raw + "\n";
  spit(dir / "in.txt", inputs);
  r = invoke({"summarize", "--input", p("in.txt"), "--checkpoint", p("rl"), "--summaries", p("s1.txt"),
           "--corpus", p("corpus.txt"), "--length", "5", "--beam_size", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("summaries = 8"), std::string::npos) << r.out;

  // The resolved configuration reproduces the run exactly.
  r = invoke({"summarize", "--config", p("s1.txt.run_config.txt"), "--summaries", p("s2.txt")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(p("s1.txt")), slurp(p("s2.txt")));
  EXPECT_EQ(slurp(p("s1.txt.fallbacks")), slurp(p("s2.txt.fallbacks")));

  std::string tsv;
  for (std::size_t i = 0; i < 8; ++i) tsv += corpus[i].raw + "\t" + corpus[i].raw + "\t" + corpus[i + 8].raw + "\n";
  spit(dir / "eval.tsv", tsv);
  for (const char* protocol : {"gigaword_f1", "duc_recall"}) {
    r = invoke({"evaluate", "--eval_dataset", p("eval.tsv"), "--summaries", p("s1.txt"),
             "--report", p("report.txt"), "--protocol", protocol});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, slurp(p("report.txt")));
    EXPECT_NE(r.out.find("rouge1"), std::string::npos) << r.out;
  }
  const auto first = invoke({"evaluate", "--config", p("report.txt.run_config.txt"), "--report", p("report2.txt")});
  ASSERT_EQ(first.code, 0) << first.err;
  EXPECT_EQ(slurp(p("report.txt")), slurp(p("report2.txt")));
}
