#include <benchmark/benchmark.h>

#include "dlg/rl/dqn.hpp"

using namespace dlg;

namespace {

struct Fixture {
  nlg::TemplateBank bank = nlg::default_template_bank();
  kb::Corpus corpus = kb::generate_corpus(kb::CorpusSpec{}, bank);
  env::Environment env{corpus.kb, corpus.goals,
                       env::EnvConfig{{},
                                      {error_model::IntentErrorType::kRandom, 0.1,
                                       error_model::SlotErrorType::kRandom, 0.1},
                                      env::Level::kFrame}};
  rl::QNetwork net = rl::QNetwork::random(env.encoder().width(), 80, env.actions().size(), 1);
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void BM_EvaluateSerial(benchmark::State& state) {
  auto& f = fixture();
  const auto policy = rl::greedy_policy(f.net);
  for (auto _ : state) benchmark::DoNotOptimize(rl::evaluate_serial(f.env, policy, state.range(0), 7));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_EvaluateParallel(benchmark::State& state) {
  auto& f = fixture();
  const auto policy = rl::greedy_policy(f.net);
  for (auto _ : state) benchmark::DoNotOptimize(rl::evaluate(f.env, policy, state.range(0), 7));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_CollectSerial(benchmark::State& state) {
  auto& f = fixture();
  const auto policy = rl::greedy_policy(f.net);
  for (auto _ : state) benchmark::DoNotOptimize(rl::collect_serial(f.env, policy, state.range(0), 7, 0.05));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_CollectParallel(benchmark::State& state) {
  auto& f = fixture();
  const auto policy = rl::greedy_policy(f.net);
  for (auto _ : state) benchmark::DoNotOptimize(rl::collect(f.env, policy, state.range(0), 7, 0.05));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_EvaluateSerial)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateParallel)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CollectSerial)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CollectParallel)->Arg(100)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
