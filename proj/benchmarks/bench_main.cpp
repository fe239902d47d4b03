// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "prefopt/datagen.hpp"
#include "prefopt/losses.hpp"
#include "prefopt/theory.hpp"
#include "prefopt/trainer.hpp"

namespace {

using namespace prefopt;

PolicyParams bench_policy(ModelKind kind) {
  RngStream rng = make_stream(7);
  PolicyParams p =
      kind == ModelKind::Bigram ? PolicyParams::bigram(32, 4) : PolicyParams::mlp(32, 4, 16);
  for (double& v : p.values) v = 0.4 * next_gaussian(rng);
  return p;
}

TokenSeq bench_seq(int vocab, int len, std::uint64_t seed) {
  RngStream rng = make_stream(seed);
  TokenSeq y;
  for (int i = 0; i < len; ++i) y.tokens.push_back(next_index(rng, vocab));
  return y;
}

void BM_SeqLogprobBigram(benchmark::State& state) {
  const PolicyParams p = bench_policy(ModelKind::Bigram);
  const TokenSeq y = bench_seq(32, 16, 1);
  for (auto _ : state)
    benchmark::DoNotOptimize(seq_logprob(p, Prompt{1, {}}, y, true));
}
BENCHMARK(BM_SeqLogprobBigram);

void BM_SeqLogprobMlp(benchmark::State& state) {
  const PolicyParams p = bench_policy(ModelKind::Mlp);
  const TokenSeq y = bench_seq(32, 16, 2);
  for (auto _ : state)
    benchmark::DoNotOptimize(seq_logprob(p, Prompt{1, {}}, y, true));
}
BENCHMARK(BM_SeqLogprobMlp);

void BM_GradSeqLogprobBigram(benchmark::State& state) {
  const PolicyParams p = bench_policy(ModelKind::Bigram);
  const TokenSeq y = bench_seq(32, 16, 3);
  for (auto _ : state)
    benchmark::DoNotOptimize(grad_seq_logprob(p, Prompt{1, {}}, y, true));
}
BENCHMARK(BM_GradSeqLogprobBigram);

void BM_PairGradient(benchmark::State& state) {
  const PolicyParams p = bench_policy(ModelKind::Bigram);
  const TokenSeq y_w = bench_seq(32, 16, 4);
  const TokenSeq y_l = bench_seq(32, 12, 5);
  const LossConfig cfg{static_cast<LossKind>(state.range(0)), 0.4, 10.0, 0.1, 0.5, 0.05};
  for (auto _ : state)
    benchmark::DoNotOptimize(pair_gradient(p, nullptr, Prompt{1, {}}, y_w, y_l, cfg));
}
BENCHMARK(BM_PairGradient)
    ->Arg(static_cast<int>(LossKind::RePO))
    ->Arg(static_cast<int>(LossKind::SimPO))
    ->Arg(static_cast<int>(LossKind::RePOpp));

void BM_LowerConvexEnvelope(benchmark::State& state) {
  const auto grid = theory_grid(-1.0, 2.0, 3.0 / static_cast<double>(state.range(0)));
  std::vector<std::pair<double, double>> points;
  for (double x : grid) points.emplace_back(x, zero_one_loss(x));
  for (auto _ : state) {
    auto copy = points;
    benchmark::DoNotOptimize(lower_convex_envelope(std::move(copy)));
  }
}
BENCHMARK(BM_LowerConvexEnvelope)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_TrainStep(benchmark::State& state) {
  RngStream rng = make_stream(11);
  const PolicyParams sampler = PolicyParams::bigram(12, 4);
  DatasetMeta meta;
  meta.vocab_size = 12;
  meta.class_count = 4;
  meta.max_len = 8;
  meta.seed = 11;
  meta.labeling = Labeling::Argmax;
  RngStream gold_rng = make_stream(11, 1);
  meta.gold = GoldRewardSpec::random(12, 4, 1.0, 0.05, gold_rng);
  const auto triples = make_dataset(meta, 64, sampler, rng);

  TrainConfig config;
  config.loss = LossConfig{LossKind::RePO, 0.4};
  config.lr = 0.05;
  config.epochs = 1;
  config.batch_size = 64;
  config.seed = 11;
  config.schedule = GammaSchedule{ScheduleMode::Constant, 0.4, 0.4};
  const PolicyParams init = PolicyParams::bigram(12, 4);
  for (auto _ : state)
    benchmark::DoNotOptimize(train(config, triples, init, nullptr));  // one 64-pair step
}
BENCHMARK(BM_TrainStep);

}  // namespace

BENCHMARK_MAIN();
