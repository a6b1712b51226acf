// Serial vs OpenMP Q-evaluation kernels on the bundled 42-node map.

#include <benchmark/benchmark.h>

#include "taxi/demand.hpp"
#include "taxi/graph.hpp"
#include "taxi/mdp.hpp"
#include "taxi/policy.hpp"
#include "taxi/rollout.hpp"

namespace {

using namespace taxi;

struct Fixture {
  World world;
  FleetState state;
  RolloutConfig cfg;
  std::vector<JointAction> candidates;

  explicit Fixture(std::size_t mc) : world(load_map_file(TAXI_DATA_DIR "/maps/sf42.json")) {
    const auto demand = DemandModel::uniform(world.graph, 0.3);
    const auto sc = sample_scenario(demand, world, 60, 3, 11, LoadLevel::high, "sf42");
    state = initial_state(sc);
    // Advance a few steps so requests are outstanding.
    const GreedyPolicy greedy;
    for (Step k = 0; k < 8; ++k) apply_step(state, greedy.decide(state, world, k).actions, arrivals_at(sc, k + 1), world);
    cfg.base = std::make_shared<GreedyPolicy>();
    cfg.demand = demand;
    cfg.mc_samples = mc;
    const auto base = greedy.decide(state, world, 0).actions;
    for (const auto& u : local_controls(state, world, 0)) {
      auto joint = base;
      joint[0] = u;
      candidates.push_back(joint);
    }
  }
};

void BM_EvaluateSerial(benchmark::State& st) {
  const Fixture f(static_cast<std::size_t>(st.range(0)));
  const auto futures = draw_futures(f.cfg, f.world, 1);
  for (auto _ : st) benchmark::DoNotOptimize(evaluate_serial(f.state, f.world, f.candidates, futures, f.cfg, 1));
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(f.candidates.size() * futures.size()));
}

void BM_EvaluateOpenMP(benchmark::State& st) {
  Fixture f(static_cast<std::size_t>(st.range(0)));
  f.cfg.threads = static_cast<int>(st.range(1));
  const auto futures = draw_futures(f.cfg, f.world, 1);
  for (auto _ : st) benchmark::DoNotOptimize(evaluate_openmp(f.state, f.world, f.candidates, futures, f.cfg, 1));
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(f.candidates.size() * futures.size()));
}

void BM_RolloutDecide(benchmark::State& st) {
  Fixture f(200);
  f.cfg.evaluator = st.range(0) == 0 ? Evaluator::serial : Evaluator::openmp;
  std::uint64_t seed = 0;
  for (auto _ : st) benchmark::DoNotOptimize(rollout_decide(f.state, f.cfg, f.world, ++seed));
}

}  // namespace

BENCHMARK(BM_EvaluateSerial)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateOpenMP)->ArgsProduct({{50, 200}, {1, 2, 4, 0}})->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_RolloutDecide)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
