// Serial reference vs OpenMP versions of the data-parallel kernels.
#include <benchmark/benchmark.h>

#include <map>
#include <random>
#include <string>
#include <vector>

#include "groundrl/batch.hpp"
#include "groundrl/evaluation.hpp"
#include "groundrl/output_parser.hpp"
#include "groundrl/toy_policy.hpp"

using namespace groundrl;

namespace {

BoundingBox random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 900.0), size(8.0, 120.0);
  const double x = u(rng), y = u(rng);
  return BoundingBox(x, y, x + size(rng), y + size(rng));
}

// n instances with 1-3 objects, and a noisy completion for each.
struct Corpus {
  std::vector<GroundingInstance> instances;
  std::vector<std::string> completions;
  std::map<std::string, std::string> predictions;

  explicit Corpus(std::size_t n) {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> jitter(0.0, 4.0);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<Entity> gt = {{EntityRole::Subject, random_box(rng)}};
      for (std::size_t k = 0, m = 1 + rng() % 3; k < m; ++k) {
        gt.push_back({EntityRole::Object, random_box(rng)});
      }
      const std::string id = "b" + std::to_string(i);
      instances.emplace_back(id, id, 1024, 1024, "e", gt, std::nullopt, Split::Test);
      std::vector<Entity> guess;
      for (const auto& e : gt) {
        const auto& b = e.bbox;
        const double dx = std::abs(jitter(rng));
        guess.push_back({e.role, BoundingBox(b.x1() + dx, b.y1(), b.x2() + dx, b.y2())});
      }
      completions.push_back(canonical_completion("looking at the scene", guess));
      predictions[id] = completions.back();
    }
  }

  std::vector<ScoreRequest> requests() const {
    std::vector<ScoreRequest> out;
    for (std::size_t i = 0; i < instances.size(); ++i) {
      out.push_back({&instances[i], completions[i]});
    }
    return out;
  }
};

const Corpus& corpus() {
  static const Corpus c(20000);
  return c;
}

ToyPolicy bench_policy() {
  std::vector<std::string> tokens;
  for (int i = 0; i < 32; ++i) tokens.push_back("t" + std::to_string(i));
  ToyPolicy p(Vocabulary(tokens, 0), 24);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (double& x : p.parameters()) x = n(rng);
  return p;
}

void BM_ScoreBatchSerial(benchmark::State& state) {
  const auto req = corpus().requests();
  const std::span<const ScoreRequest> part(req.data(), state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(score_batch_serial(part, RewardConfig{}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ScoreBatchParallel(benchmark::State& state) {
  const auto req = corpus().requests();
  const std::span<const ScoreRequest> part(req.data(), state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(score_batch(part, RewardConfig{}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_EvaluateSerial(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate_dataset_serial(corpus().predictions, corpus().instances));
  }
  state.SetItemsProcessed(state.iterations() * corpus().instances.size());
}

void BM_EvaluateParallel(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate_dataset(corpus().predictions, corpus().instances));
  }
  state.SetItemsProcessed(state.iterations() * corpus().instances.size());
}

void BM_SampleGroupSerial(benchmark::State& state) {
  const ToyPolicy p = bench_policy();
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sample_group_serial(p, state.range(0), ++seed));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_SampleGroupParallel(benchmark::State& state) {
  const ToyPolicy p = bench_policy();
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sample_group(p, state.range(0), ++seed));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_ScoreBatchSerial)->Arg(8)->Arg(1024)->Arg(20000)->UseRealTime();
BENCHMARK(BM_ScoreBatchParallel)->Arg(8)->Arg(1024)->Arg(20000)->UseRealTime();
BENCHMARK(BM_EvaluateSerial)->UseRealTime();
BENCHMARK(BM_EvaluateParallel)->UseRealTime();
BENCHMARK(BM_SampleGroupSerial)->Arg(8)->Arg(4096)->UseRealTime();
BENCHMARK(BM_SampleGroupParallel)->Arg(8)->Arg(4096)->UseRealTime();

BENCHMARK_MAIN();
