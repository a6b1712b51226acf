#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "taxi/config.hpp"
#include "taxi/demand.hpp"
#include "taxi/policy.hpp"
#include "taxi/rollout.hpp"

namespace taxi {

/// Builds policies from names: greedy, ia-ra, stay, llm:<strategy>,
/// finetuned-llm and rollout:<base> (recursively).
class PolicyFactory {
 public:
  PolicyFactory(const World& world, ExperimentConfig cfg);

  /// `load` fixes the arrival rate the rollout futures are sampled with.
  /// Throws std::invalid_argument for unknown names and llm::ConfigError when
  /// an LLM policy has no endpoint or mock script.
  PolicyPtr make(const std::string& name, LoadLevel load) const;
  RolloutConfig rollout_config(PolicyPtr base, LoadLevel load) const;

  /// Replaces the chat client used by LLM policies (tests, scripted runs).
  void set_chat_client(llm::ChatClientPtr client) { client_ = std::move(client); }

 private:
  llm::ChatClientPtr chat_client(const std::string& model) const;

  const World* world_;
  ExperimentConfig cfg_;
  llm::ChatClientPtr client_;
};

/// Scenario seed of test-set entry `index` at `load`.
std::uint64_t scenario_seed(std::uint64_t seed, LoadLevel load, std::size_t index);

std::vector<Scenario> build_test_set(LoadLevel load, std::size_t n, const World& world, const DemandModel& model,
                                     std::uint64_t seed, Step horizon, std::size_t agents,
                                     const std::string& map_id);

/// Writes <dir>/<load>/scenario_01.json ... ; returns the paths written.
std::vector<std::string> write_test_set(const std::string& dir, const std::vector<Scenario>& scenarios,
                                        const RoadGraph& g);
/// Reads every scenario_*.json of <dir>/<load> in name order.
std::vector<Scenario> load_test_set(const std::string& dir, LoadLevel load, const World& world);

/// Indices of the k scenarios with the largest greedy cost (ties: lower index).
std::vector<std::size_t> hardest_scenarios(const std::vector<Scenario>& scenarios, const World& world,
                                           std::size_t k, std::uint64_t seed);

struct PolicyRow {
  std::string policy;
  std::string version;  // "Base" or "Rollout"
  std::vector<std::optional<std::int64_t>> costs;  // per scenario; nullopt when the run failed
  std::vector<std::size_t> hallucinations;
  std::vector<std::string> failures;
  double mean_cost = 0.0;
  double std_cost = 0.0;
  double mean_hallucinations = 0.0;
  bool partial = false;
};

struct BenchReport {
  std::string map_id;
  LoadLevel load = LoadLevel::low;
  Step horizon = 0;
  std::uint64_t seed = 0;
  std::size_t mc_samples = 0;
  Step t_h = 0;
  std::vector<std::uint64_t> scenario_seeds;
  std::vector<PolicyRow> rows;
};

struct BenchOptions {
  std::uint64_t seed = 0;
  /// Concurrent (policy, scenario) cells; 0 leaves it to the runtime.
  int threads = 0;
  std::size_t mc_samples = 0;
  Step t_h = 0;
};

/// Simulation seed of scenario `index` in a benchmark seeded with `seed`;
/// shared by every policy so rows see the same randomness.
std::uint64_t cell_seed(std::uint64_t seed, std::size_t index);

/// Simulates every (policy, scenario) pair. Throws std::invalid_argument on an
/// empty scenario list; individual policy failures mark the row partial.
BenchReport run_benchmark(const std::vector<PolicyPtr>& policies, const std::vector<Scenario>& scenarios,
                          const World& world, const BenchOptions& opts);

/// Mean and sample standard deviation of the successful runs.
void summarise(PolicyRow& row);

std::string report_json(const BenchReport& r);
std::string report_csv(const BenchReport& r);
/// Method x Version table of mean +- std.
std::string report_table(const BenchReport& r);

struct McPoint {
  std::size_t mc_samples = 0;
  double mean_cost = 0.0;
  double std_cost = 0.0;
  std::vector<std::int64_t> costs;
};

/// Rollout over `base` once per mc value (ascending), on common scenario seeds.
std::vector<McPoint> mc_sweep(const PolicyPtr& base, const std::vector<Scenario>& scenarios, const World& world,
                              const RolloutConfig& proto, const std::vector<std::size_t>& mc_list,
                              const BenchOptions& opts);

std::string curve_csv(const std::vector<McPoint>& curve);
/// Static cost-versus-samples line chart.
std::string curve_svg(const std::vector<McPoint>& curve, const std::string& title);

struct FinetuneProvenance {
  std::size_t scenario = 0;
  std::uint64_t scenario_seed = 0;
  std::uint64_t sim_seed = 0;
  Step step = 0;
  AgentIndex agent = 0;
};

/// Runs rollout over every scenario and writes one JSONL record per decision
/// step and non-forced agent: {messages: [system, user, assistant], provenance}.
/// Returns the number of records.
std::size_t export_finetune_data(const std::vector<Scenario>& scenarios, const RolloutConfig& cfg,
                                 const World& world, std::uint64_t seed, std::ostream& out,
                                 const std::optional<std::string>& semantic_context = {});

struct FinetuneRecord {
  std::string system;
  std::string user;
  std::string assistant;
  FinetuneProvenance provenance;
};

std::vector<FinetuneRecord> read_finetune_data(std::istream& in);

}  // namespace taxi
