#include <benchmark/benchmark.h>

#include "rsum/eval.hpp"
#include "rsum/kernel.hpp"
#include "rsum/perturb.hpp"
#include "rsum/policy.hpp"
#include "rsum/rl.hpp"
#include "rsum/toy.hpp"

using namespace rsum;

namespace {

const std::vector<corpus::TokenizedText>& texts() {
  static const auto corpus = toy::synthetic_corpus(10000, 1);
  return corpus;
}

void BM_PerturbBatch(benchmark::State& state) {
  const auto& t = texts();
  std::vector<corpus::TokenizedText> donors(t.rbegin(), t.rend());
  const kernel::TextKernels kernels;
  for (auto _ : state) benchmark::DoNotOptimize(kernels.perturb_batch(t, donors, {}, 7));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(t.size()));
  state.SetLabel(kernels.accelerated() ? "accelerated" : "reference");
}
BENCHMARK(BM_PerturbBatch)->Unit(benchmark::kMillisecond);

void BM_Rouge(benchmark::State& state) {
  const auto& t = texts();
  std::vector<std::vector<std::string>> cands;
  std::vector<std::vector<std::vector<std::string>>> refs;
  for (std::size_t i = 0; i + 1 < 2000; i += 2) {
    cands.push_back(t[i].tokens);
    refs.push_back({t[i + 1].tokens, t[i].tokens});
  }
  const std::vector<int> ns = {1, 2, 0};
  const kernel::TextKernels kernels;
  for (auto _ : state) benchmark::DoNotOptimize(kernels.rouge_batch(cands, refs, ns, eval::MultiRef::best_f1));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cands.size()));
}
BENCHMARK(BM_Rouge)->Unit(benchmark::kMillisecond);

void BM_MslTrainStep(benchmark::State& state) {
  const auto& t = texts();
  toy::ToyGenerator gen(corpus::Vocabulary::build(t));
  toy::HashedBagOfWords embedder(64);
  embedder.fit_idf(t);
  const toy::BigramLanguageModel lm(t);
  rewards::RewardConfig rcfg;
  rcfg.max_gen_len = 24;
  const rl::RewardContext ctx{rcfg, embedder, lm};
  rl::TrainConfig cfg;
  cfg.lengths = {corpus::LengthSpec::parse("4"), corpus::LengthSpec::parse("6")};
  rl::AdamW opt(gen.parameters().size(), {.learning_rate = 0.01, .weight_decay = 0.01});
  const std::vector<corpus::TokenizedText> batch(t.begin(), t.begin() + 24);
  Rng rng(3);
  int step = 0;
  for (auto _ : state) benchmark::DoNotOptimize(rl::msl_train_step(gen, opt, batch, cfg, ctx, rng, ++step));
  state.SetItemsProcessed(state.iterations() * 24);
}
BENCHMARK(BM_MslTrainStep)->Unit(benchmark::kMillisecond);

void BM_BeamSearch(benchmark::State& state) {
  const auto& t = texts();
  toy::ToyGenerator gen(corpus::Vocabulary::build(t));
  Rng rng(4);
  for (double& p : gen.parameters()) p = rng.uniform01() - 0.5;
  const auto input = corpus::make_prompted_input(t[0], 8);
  for (auto _ : state) benchmark::DoNotOptimize(policy::beam_search(gen, input, static_cast<int>(state.range(0)), 12));
}
BENCHMARK(BM_BeamSearch)->Arg(1)->Arg(5)->Arg(20)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
