#include <benchmark/benchmark.h>

#include "biasdef/attacksim.hpp"
#include "biasdef/defense.hpp"
#include "biasdef/harness.hpp"
#include "biasdef/metrics.hpp"
#include "biasdef/random.hpp"
#include "biasdef/retriever.hpp"
#include "biasdef/vecmath.hpp"

using namespace biasdef;

namespace {

// One attacked scene: 30 benign passages plus 10 adversarial, dimension 128.
struct Scene {
  Query query;
  Corpus corpus;
  RankedList pool;
};

Scene attacked_scene(std::size_t dim = 128) {
  Scene s{synth_query("q", dim, 11), {}, {}};
  const Corpus benign = synth_benign_scene(s.query, {}, 12);
  const PolarizationAxis hint{Embedding(dim, 0.0), viewpoint_direction(s.query, 13)};
  const auto candidates = synth_candidates(s.query, hint, 8, 14);
  const PolarizationAxis axis = fit_attacker_axis(candidates);
  AttackConfig cfg;
  cfg.rng_seed = 15;
  const Embedding seed = select_seed(candidates, axis, cfg.direction);
  const auto adv = generate_adversarial(s.query, seed, benign, axis, cfg);
  s.corpus = inject(benign, adv, 10, polarization_score(axis, seed), axis).corpus;
  s.pool = candidate_pool(s.corpus, s.query, 5);
  return s;
}

void BM_PrincipalAxis(benchmark::State& state) {
  const Scene s = attacked_scene();
  std::vector<Embedding> points;
  for (const auto& item : s.pool.items) points.push_back(s.corpus.at(item.passage_id).embedding);
  for (auto _ : state) benchmark::DoNotOptimize(principal_axis(points));
}
BENCHMARK(BM_PrincipalAxis);

void BM_ScanMaxKl(benchmark::State& state) {
  Rng rng(3);
  std::vector<ScoredPassage> pool;
  for (int i = 0; i < state.range(0); ++i) {
    pool.push_back({"p" + std::to_string(i), rng.uniform(0.2, 0.9), rng.uniform(-1.0, 1.0)});
  }
  for (auto _ : state) benchmark::DoNotOptimize(scan_max_kl(pool, {}));
}
BENCHMARK(BM_ScanMaxKl)->Arg(20)->Arg(80)->Arg(320);

void BM_BiasDefFilter(benchmark::State& state) {
  const Scene s = attacked_scene();
  for (auto _ : state) benchmark::DoNotOptimize(biasdef_filter(s.pool, s.corpus, {}));
}
BENCHMARK(BM_BiasDefFilter);

void BM_RetrieveTop(benchmark::State& state) {
  Rng rng(4);
  Corpus c;
  for (int i = 0; i < state.range(0); ++i) {
    c.add({"p" + std::to_string(i), rng.gaussian_vector(128), Provenance::kBenign, std::nullopt, std::nullopt});
  }
  const Query q{"q", rng.gaussian_vector(128), std::nullopt};
  for (auto _ : state) benchmark::DoNotOptimize(retrieve_top(c, q, 20));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RetrieveTop)->Arg(1000)->Arg(10000);

void BM_RunExperimentSmall(benchmark::State& state) {
  ExperimentConfig c;
  c.num_queries = 10;
  c.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(run_experiment(c));
}
BENCHMARK(BM_RunExperimentSmall)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
