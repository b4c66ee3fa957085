#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "riskcal/bca.hpp"
#include "riskcal/bvs.hpp"
#include "riskcal/estimators.hpp"
#include "riskcal/model_space.hpp"
#include "riskcal/priors.hpp"
#include "riskcal/risk.hpp"

using namespace riskcal;

namespace {

Eigen::MatrixXd random_coclustering(int p, std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::vector<Partition> draws;
  const auto prior = PriorSpec::crp(1.0);
  for (int i = 0; i < 200; ++i) draws.push_back(sample_partition(prior, p, rng));
  return coclustering_from_draws(draws);
}

}  // namespace

static void BM_EnumeratePartitions(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  for (auto _ : state) {
    std::size_t count = 0;
    for (const auto& z : enumerate_partitions(p)) count += static_cast<std::size_t>(z.k());
    benchmark::DoNotOptimize(count);
  }
}
BENCHMARK(BM_EnumeratePartitions)->DenseRange(6, 10, 2);

static void BM_PriorRiskExactGB(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  const auto prior = PriorSpec::crp(1.0);
  const auto loss = LossSpec::generalized_binder(1.0);
  for (auto _ : state) benchmark::DoNotOptimize(prior_risk(prior, loss, p).values.back());
}
BENCHMARK(BM_PriorRiskExactGB)->DenseRange(3, 6, 1)->Unit(benchmark::kMillisecond);

static void BM_CheckEquilibriumEnumeration(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  const auto prior = PriorSpec::crp(1.0);
  const auto loss = LossSpec::generalized_binder(1.0);
  for (auto _ : state) benchmark::DoNotOptimize(check_equilibrium(prior, loss, p, 1e-9, Route::enumeration).max_spread);
}
BENCHMARK(BM_CheckEquilibriumEnumeration)->DenseRange(4, 8, 2)->Unit(benchmark::kMillisecond);

static void BM_GreedyBinder(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  const GbObjective objective(random_coclustering(p, 7), 1.0);
  SearchConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(greedy_minimizer(objective, cfg).risk);
}
BENCHMARK(BM_GreedyBinder)->RangeMultiplier(2)->Range(8, 128)->Unit(benchmark::kMillisecond);

static void BM_GreedyViLb(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  const ViLbObjective objective(random_coclustering(p, 11));
  SearchConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(greedy_minimizer(objective, cfg).risk);
}
BENCHMARK(BM_GreedyViLb)->RangeMultiplier(2)->Range(8, 128)->Unit(benchmark::kMillisecond);

static void BM_AllLogMarginals(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  auto rng = make_rng(3);
  std::vector<double> beta(p, 0.0);
  for (int i = 0; i < std::min(p, 6); ++i) beta[i] = i < 3 ? 1.0 : -1.0;
  const auto data = simulate_dataset(60, p, beta, 9.0, rng);
  for (auto _ : state) benchmark::DoNotOptimize(all_log_marginals(data).back());
}
BENCHMARK(BM_AllLogMarginals)->DenseRange(8, 14, 2)->Unit(benchmark::kMillisecond);

static void BM_ZellnerSiowLogBf(benchmark::State& state) {
  auto rng = make_rng(5);
  const auto data = simulate_dataset(60, 8, {1, 1, 1, -1, -1, -1, 0, 0}, 9.0, rng);
  const MarginalLikelihood ml(data, {LikelihoodKind::zellner_siow, std::nullopt, 64});
  const auto g = GammaVector::parse("11100000");
  for (auto _ : state) benchmark::DoNotOptimize(ml.log_bf(g));
}
BENCHMARK(BM_ZellnerSiowLogBf);

static void BM_DpmmSweeps(benchmark::State& state) {
  std::normal_distribution<double> z(0.0, 1.0);
  auto rng = make_rng(9);
  std::vector<double> data(82);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = (i % 3 == 0 ? 10.0 : 20.0) + z(rng);
  DPMMConfig cfg;
  cfg.iterations = static_cast<int>(state.range(0));
  cfg.burn_in = 0;
  cfg.thin = 10;
  for (auto _ : state) benchmark::DoNotOptimize(dpmm_sample(data, cfg).draws.size());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DpmmSweeps)->Arg(1000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
