#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "taxi/bench.hpp"
#include "taxi/llm/chat.hpp"
#include "taxi/rng.hpp"
#include "taxi/simulate.hpp"

#ifndef TAXI_DATA_DIR
#define TAXI_DATA_DIR "data"
#endif

namespace fs = std::filesystem;
using namespace taxi;

namespace {

struct Globals {
  std::string map;
  std::string config = std::string(TAXI_DATA_DIR) + "/config/default.json";
  std::string out = "out";
  std::uint64_t seed = 2024;
};

struct Context {
  ExperimentConfig cfg;
  World world;
};

Context open(const Globals& g) {
  auto cfg = load_config(g.config);
  if (!g.map.empty()) cfg.map_path = g.map;
  if (cfg.map_path.empty()) throw std::invalid_argument("no map given (use --map or set \"map\" in the config)");
  return {cfg, World(load_map_file(cfg.map_path))};
}

std::vector<LoadLevel> loads_of(const std::string& text) {
  if (text == "all") return {LoadLevel::low, LoadLevel::medium, LoadLevel::high};
  return {parse_load_level(text)};
}

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
}

std::vector<Scenario> scenarios_for(const Context& ctx, const Globals& g, LoadLevel load, const std::string& testset,
                                    std::size_t n) {
  if (!testset.empty()) return load_test_set(testset, load, ctx.world);
  return build_test_set(load, n ? n : ctx.cfg.scenarios_per_load, ctx.world,
                        DemandModel::uniform(ctx.world.graph, ctx.cfg.rate(load)), g.seed, ctx.cfg.horizon,
                        ctx.cfg.agents, ctx.cfg.map_id);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-taxi routing: test sets, benchmarks, MC sweeps and fine-tune export."};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--map", g.map, "Road map JSON (overrides the config)");
  app.add_option("--config", g.config, "Experiment config JSON")->capture_default_str();
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--seed", g.seed, "Root seed")->capture_default_str();

  std::string load = "all", testset, policies = "greedy,rollout:greedy", base = "ia-ra", mc_text = "10,50,200,500";
  std::string scenario_path, trace_path, policy_name = "greedy";
  std::size_t n = 0;
  int threads = -1;
  std::size_t mc = 0;

  auto* gen = app.add_subcommand("gen-testset", "Sample and persist test scenarios");
  gen->add_option("--load", load, "low | medium | high | all")->capture_default_str();
  gen->add_option("-n,--count", n, "Scenarios per load (default from config)");

  auto* bench = app.add_subcommand("bench", "Run policies head-to-head");
  bench->add_option("--policies", policies, "Comma-separated policy names")->capture_default_str();
  bench->add_option("--load", load, "low | medium | high | all")->capture_default_str();
  bench->add_option("--testset", testset, "Directory written by gen-testset (default: sample in memory)");
  bench->add_option("-n,--count", n, "Scenarios per load when sampling");
  bench->add_option("--threads", threads, "Concurrent benchmark cells");
  bench->add_option("--mc", mc, "MC futures per rollout decision (default from config)");

  auto* sweep = app.add_subcommand("sweep-mc", "Rollout cost versus number of MC futures");
  sweep->add_option("--base", base, "Base policy of the rollout")->capture_default_str();
  sweep->add_option("--mc", mc_text, "Ascending comma-separated sample counts")->capture_default_str();
  sweep->add_option("--load", load, "low | medium | high")->capture_default_str();
  sweep->add_option("--testset", testset, "Directory written by gen-testset");
  sweep->add_option("-n,--count", n, "Scenarios when sampling");
  sweep->add_option("--threads", threads, "Concurrent benchmark cells");

  auto* exp = app.add_subcommand("export-finetune", "Write rollout-labelled chat records");
  exp->add_option("--base", base, "Base policy of the rollout")->capture_default_str();
  exp->add_option("--load", load, "Demand level of the generated trajectories")->capture_default_str();
  exp->add_option("-n,--count", n, "Trajectories (default 128)");
  exp->add_option("--mc", mc, "MC futures per decision (default from config)");

  auto* rep = app.add_subcommand("replay", "Run one scenario and write its trace, or verify a recorded trace");
  rep->add_option("--scenario", scenario_path, "Scenario JSON")->required();
  rep->add_option("--policy", policy_name, "Policy to run")->capture_default_str();
  rep->add_option("--trace", trace_path, "Recorded trace to replay and verify");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto ctx = open(g);
    const fs::path out(g.out);
    PolicyFactory factory(ctx.world, ctx.cfg);

    if (gen->parsed()) {
      for (const auto l : loads_of(load)) {
        const auto set = scenarios_for(ctx, g, l, "", n);
        const auto paths = write_test_set((out / "testset").string(), set, ctx.world.graph);
        std::cout << fmt::format("{}: {} scenarios -> {}\n", to_string(l), paths.size(),
                                 (out / "testset" / std::string(to_string(l))).string());
      }
    } else if (bench->parsed()) {
      auto cfg = ctx.cfg;
      if (mc) cfg.mc_samples = mc;
      PolicyFactory f(ctx.world, cfg);
      for (const auto l : loads_of(load)) {
        std::vector<PolicyPtr> ps;
        for (const auto& name : split(policies)) ps.push_back(f.make(name, l));
        const auto set = scenarios_for(ctx, g, l, testset, n);
        const auto report =
            run_benchmark(ps, set, ctx.world, {g.seed, threads >= 0 ? threads : cfg.threads, cfg.mc_samples, cfg.t_h});
        const auto stem = fmt::format("report_{}", to_string(l));
        write_file(out / (stem + ".json"), report_json(report));
        write_file(out / (stem + ".csv"), report_csv(report));
        std::cout << report_table(report) << '\n';
      }
    } else if (sweep->parsed()) {
      const auto l = parse_load_level(load);
      std::vector<std::size_t> mcs;
      for (const auto& s : split(mc_text)) mcs.push_back(std::stoul(s));
      const auto b = factory.make(base, l);
      const auto set = scenarios_for(ctx, g, l, testset, n ? n : 10);
      const auto proto = factory.rollout_config(b, l);
      const auto curve =
          mc_sweep(b, set, ctx.world, proto, mcs, {g.seed, threads >= 0 ? threads : ctx.cfg.threads, 0, ctx.cfg.t_h});
      const auto stem = fmt::format("mc_sweep_{}_{}", base, to_string(l));
      write_file(out / (stem + ".csv"), curve_csv(curve));
      write_file(out / (stem + ".svg"), curve_svg(curve, fmt::format("rollout:{} ({} load)", base, to_string(l))));
      for (const auto& p : curve) std::cout << fmt::format("mc={:<5} cost={:.2f} +/- {:.2f}\n", p.mc_samples, p.mean_cost, p.std_cost);
    } else if (exp->parsed()) {
      const auto l = parse_load_level(load);
      auto cfg = factory.rollout_config(factory.make(base, l), l);
      if (mc) cfg.mc_samples = mc;
      const auto count = n ? n : 128;
      std::vector<Scenario> set;
      for (std::size_t i = 0; i < count; ++i) {
        set.push_back(sample_scenario(cfg.demand, ctx.world, ctx.cfg.horizon, ctx.cfg.agents,
                                      derive_seed(g.seed, 0x46540000 + i), l, ctx.cfg.map_id));
      }
      fs::create_directories(out);
      const auto path = out / "finetune.jsonl";
      std::ofstream file(path, std::ios::binary);
      std::optional<std::string> context;
      if (!ctx.cfg.llm.semantic_context.empty()) context = ctx.cfg.llm.semantic_context;
      const auto records = export_finetune_data(set, cfg, ctx.world, g.seed, file, context);
      std::cout << fmt::format("{} records from {} trajectories -> {}\n", records, count, path.string());
    } else if (rep->parsed()) {
      const auto sc = load_scenario_file(scenario_path, ctx.world);
      if (!trace_path.empty()) {
        std::ifstream in(trace_path);
        if (!in) throw std::runtime_error(fmt::format("cannot open trace '{}'", trace_path));
        const auto records = read_trace(in, ctx.world.graph);
        std::vector<JointAction> actions;
        for (const auto& r : records) {
          if (!r.action.empty()) actions.push_back(r.action);
        }
        const auto result = simulate(sc, ctx.world, ReplayPolicy(actions), g.seed);
        if (result.trace.size() != records.size()) throw std::runtime_error("trace length does not match the scenario");
        for (std::size_t k = 0; k < records.size(); ++k) {
          if (digest(result.trace[k].state, ctx.world.graph) != records[k].digest) {
            throw std::runtime_error(fmt::format("state digest mismatch at step {}", k));
          }
        }
        std::cout << fmt::format("trace verified: {} steps, cost {}\n", records.size(), result.total_cost);
      } else {
        const auto policy = factory.make(policy_name, sc.load);
        const auto result = simulate(sc, ctx.world, *policy, g.seed);
        fs::create_directories(out);
        const auto path = out / fmt::format("trace_{}.jsonl", fs::path(scenario_path).stem().string());
        std::ofstream file(path, std::ios::binary);
        write_trace(file, result, ctx.world.graph);
        std::cout << fmt::format("{}: cost {}, hallucinations {} -> {}\n", policy->name(), result.total_cost,
                                 result.hallucinations, path.string());
      }
    }
  } catch (const llm::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
