#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "support/fixtures.hpp"
#include "taxi/bench.hpp"
#include "taxi/llm/parse.hpp"
#include "taxi/llm/policy.hpp"
#include "taxi/simulate.hpp"

using namespace taxi;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("taxisim_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<Scenario> small_set(const World& w, LoadLevel load, std::size_t n, double rate, Step horizon = 60) {
  return build_test_set(load, n, w, DemandModel::uniform(w.graph, rate), 77, horizon, 3, "sf42");
}

}  // namespace

TEST_CASE("test sets are persisted per load and rebuild identically") {
  const auto w = fixture::sf42();
  const auto dir = scratch("testset");
  std::size_t files = 0;
  for (const auto load : {LoadLevel::low, LoadLevel::medium, LoadLevel::high}) {
    files += write_test_set(dir.string(), small_set(w, load, 20, 0.1), w.graph).size();
  }
  CHECK(files == 60);
  CHECK(fs::exists(dir / "high" / "scenario_20.json"));
  const auto first = slurp(dir / "medium" / "scenario_07.json");
  write_test_set(dir.string(), small_set(w, LoadLevel::medium, 20, 0.1), w.graph);
  CHECK(slurp(dir / "medium" / "scenario_07.json") == first);

  const auto loaded = load_test_set(dir.string(), LoadLevel::medium, w);
  CHECK(loaded == small_set(w, LoadLevel::medium, 20, 0.1));
  CHECK_THROWS(load_test_set((dir / "missing").string(), LoadLevel::low, w));
  fs::remove_all(dir);
}

TEST_CASE("hardest scenarios rank by greedy cost") {
  const auto w = fixture::sf42();
  const auto set = small_set(w, LoadLevel::high, 8, 0.3);
  const auto top = hardest_scenarios(set, w, 2, 5);
  REQUIRE(top.size() == 2);
  std::vector<std::int64_t> cost;
  for (std::size_t i = 0; i < set.size(); ++i) {
    cost.push_back(simulate(set[i], w, GreedyPolicy{}, cell_seed(5, i), false).total_cost);
  }
  const auto max = *std::max_element(cost.begin(), cost.end());
  CHECK(cost[top[0]] == max);
  CHECK(cost[top[0]] >= cost[top[1]]);
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (i != top[0] && i != top[1]) CHECK(cost[i] <= cost[top[1]]);
  }
}

TEST_CASE("report aggregates are the mean of the stored vector") {
  const auto w = fixture::sf42();
  const auto set = small_set(w, LoadLevel::medium, 6, 0.15);
  const std::vector<PolicyPtr> ps{std::make_shared<GreedyPolicy>(), std::make_shared<IaRaPolicy>()};
  const auto r = run_benchmark(ps, set, w, {3, 2, 0, 0});
  REQUIRE(r.rows.size() == 2);
  for (const auto& row : r.rows) {
    CHECK(row.version == "Base");
    CHECK(row.costs.size() == 6);
    std::int64_t sum = 0;
    for (const auto& c : row.costs) sum += c.value();
    CHECK(row.mean_cost == doctest::Approx(static_cast<double>(sum) / 6.0));
    CHECK_FALSE(row.partial);
  }
  CHECK(r.rows[0].costs[2].value() == simulate(set[2], w, GreedyPolicy{}, cell_seed(3, 2), false).total_cost);

  const auto csv = report_csv(r);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 13);
  CHECK(report_table(r).find("ia-ra") != std::string::npos);
  CHECK_THROWS_AS(run_benchmark(ps, {}, w, {}), std::invalid_argument);
}

TEST_CASE("standard deviation") {
  PolicyRow row;
  row.costs = {2, 4, 4, 4, 5, 5, 7, 9};
  row.hallucinations.assign(8, 1);
  summarise(row);
  CHECK(row.mean_cost == doctest::Approx(5.0));
  CHECK(row.std_cost == doctest::Approx(std::sqrt(32.0 / 7.0)));
  CHECK(row.mean_hallucinations == doctest::Approx(1.0));
}

TEST_CASE("failing policies mark the row partial") {
  const auto w = fixture::sf42();
  const auto set = small_set(w, LoadLevel::low, 3, 0.1);
  const std::vector<PolicyPtr> ps{std::make_shared<FunctionPolicy>(
      "broken", [](const FleetState&, const World&, std::uint64_t) -> JointAction { return {}; })};
  const auto r = run_benchmark(ps, set, w, {1, 1, 0, 0});
  CHECK(r.rows[0].partial);
  CHECK(r.rows[0].failures.size() == 3);
  CHECK_FALSE(r.rows[0].costs[0].has_value());
  CHECK(report_json(r).find("null") != std::string::npos);
}

TEST_CASE("reports do not depend on the worker count") {
  const auto w = fixture::sf42();
  ExperimentConfig cfg;
  cfg.mc_samples = 8;
  PolicyFactory f(w, cfg);
  const auto set = small_set(w, LoadLevel::high, 4, 0.3, 30);
  const std::vector<PolicyPtr> ps{f.make("greedy", LoadLevel::high), f.make("rollout:ia-ra", LoadLevel::high)};
  const auto a = report_json(run_benchmark(ps, set, w, {9, 1, 8, 10}));
  const auto b = report_json(run_benchmark(ps, set, w, {9, 3, 8, 10}));
  CHECK(a == b);
}

TEST_CASE("policy factory") {
  const auto w = fixture::sf42();
  PolicyFactory f(w, ExperimentConfig{});
  CHECK(f.make("greedy", LoadLevel::low)->name() == "greedy");
  CHECK(f.make("rollout:ia-ra", LoadLevel::low)->name() == "rollout:ia-ra");
  CHECK(f.make("rollout:rollout:greedy", LoadLevel::low)->name() == "rollout:rollout:greedy");
  CHECK_THROWS_AS(f.make("gnn", LoadLevel::low), std::invalid_argument);
  CHECK_THROWS_AS(f.make("llm:zero-shot", LoadLevel::low), llm::ConfigError);
  CHECK_THROWS_AS(f.make("finetuned-llm", LoadLevel::low), llm::ConfigError);

  f.set_chat_client(std::make_shared<llm::MockChatClient>(std::vector<llm::MockChatClient::Rule>{}, "(pickup: False, next position: 1)"));
  CHECK(f.make("llm:cot-sc", LoadLevel::low)->name() == "llm:cot-sc");
  CHECK(f.make("finetuned-llm", LoadLevel::low)->name() == "finetuned-llm");
  const auto online = std::dynamic_pointer_cast<const RolloutPolicy>(f.make("rollout:finetuned-llm", LoadLevel::low));
  REQUIRE(online);
  CHECK(dynamic_cast<const ValidatedPolicy*>(online->config().base.get()) != nullptr);
  CHECK(online->config().demand.arrival_rate == doctest::Approx(0.05));
}

TEST_CASE("config parsing") {
  const auto c = parse_config(R"({"horizon": 30, "load_rates": {"low": 0.1, "high": 0.4}, "rollout": {"mc_samples": 50},
                                  "llm": {"mock_script": "m.json"}})",
                              "/base");
  CHECK(c.horizon == 30);
  CHECK(c.mc_samples == 50);
  CHECK(c.t_h == 10);
  CHECK(c.rate(LoadLevel::high) == doctest::Approx(0.4));
  CHECK_THROWS(c.rate(LoadLevel::medium));
  CHECK(c.llm.mock_script == "/base/m.json");
  CHECK_THROWS(parse_config(R"({"horizon": 1})"));
  CHECK_THROWS(parse_config(R"({"load_rates": {"low": 0}})"));
  CHECK_THROWS(parse_config("nope"));
  const auto d = load_config(fixture::data_path("config/default.json"));
  CHECK(fs::exists(d.map_path));
  CHECK(d.rate(LoadLevel::low) < d.rate(LoadLevel::medium));
  CHECK(d.rate(LoadLevel::medium) < d.rate(LoadLevel::high));
}

TEST_CASE("mc sweep") {
  const auto w = fixture::sf42();
  const auto set = small_set(w, LoadLevel::medium, 2, 0.15, 20);
  RolloutConfig proto;
  proto.demand = DemandModel::uniform(w.graph, 0.15);
  const auto base = std::make_shared<GreedyPolicy>();
  const auto curve = mc_sweep(base, set, w, proto, {4}, {1, 1, 0, 10});
  REQUIRE(curve.size() == 1);
  CHECK(curve[0].costs.size() == 2);
  CHECK(curve_csv(curve).starts_with("mc_samples,mean_cost,std_cost\n4,"));
  CHECK(curve_svg(curve, "t").find("<polyline") != std::string::npos);
  CHECK_THROWS(mc_sweep(base, set, w, proto, {8, 4}, {}));
}

TEST_CASE("fine-tune records parse back to the rollout controls") {
  const auto w = fixture::sf42();
  const auto set = small_set(w, LoadLevel::high, 2, 0.3, 15);
  RolloutConfig cfg;
  cfg.base = std::make_shared<GreedyPolicy>();
  cfg.demand = DemandModel::uniform(w.graph, 0.3);
  cfg.mc_samples = 6;
  std::stringstream buf;
  const auto n = export_finetune_data(set, cfg, w, 4, buf);
  const auto records = read_finetune_data(buf);
  CHECK(records.size() == n);
  CHECK(n > 0);

  std::vector<SimulationResult> runs;
  for (std::size_t i = 0; i < set.size(); ++i) runs.push_back(simulate(set[i], w, RolloutPolicy(cfg), cell_seed(4, i)));
  for (const auto& r : records) {
    const auto parsed = llm::parse_action(r.assistant);
    REQUIRE(parsed.has_value());
    const auto& p = r.provenance;
    const auto& e = runs[p.scenario].trace[static_cast<std::size_t>(p.step)];
    CHECK(e.state.agents[p.agent].available());
    CHECK(parsed->next_position == w.graph.id(e.action[p.agent].next));
    CHECK(parsed->pickup == e.action[p.agent].pickup);
    CHECK(r.user.starts_with(fmt::format("You are Taxi {}.", p.agent)));
    CHECK(r.system.starts_with("You are a taxi driver"));
  }
}
