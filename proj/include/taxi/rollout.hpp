#pragma once

#include <atomic>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "taxi/demand.hpp"
#include "taxi/mdp.hpp"
#include "taxi/policy.hpp"

namespace taxi {

/// How the (candidate, future) evaluations of one agent are executed. Both
/// produce identical results; `serial` is the reference path.
enum class Evaluator { serial, openmp };

struct RolloutConfig {
  std::size_t mc_samples = 200;
  Step t_h = 10;
  PolicyPtr base;
  /// Demand parameters frozen for the certainty-equivalent futures.
  DemandModel demand;
  /// Order in which agents are optimised; empty means index order.
  std::vector<AgentIndex> agent_order;
  Evaluator evaluator = Evaluator::openmp;
  /// OpenMP team size; 0 leaves it to the runtime.
  int threads = 0;
  /// Multiplier applied to every stage cost inside the lookahead.
  std::int64_t cost_weight = 1;

  /// Throws std::invalid_argument when a field is out of range.
  void validate(std::size_t agents) const;
};

/// Sample-average Q-factor of one candidate. Sums are exact integers; all
/// candidates of a decision share the same futures, so comparing sums is
/// comparing means.
struct QEstimate {
  AgentAction action;
  std::int64_t total_cost = 0;
  std::size_t sample_count = 0;

  double mean_cost() const {
    return sample_count == 0 ? 0.0 : static_cast<double>(total_cost) / static_cast<double>(sample_count);
  }
};

struct AgentQTable {
  AgentIndex agent = 0;
  bool forced = false;
  std::vector<QEstimate> estimates;  // local_controls order
  std::size_t chosen = 0;
};

struct RolloutDecision {
  JointAction actions;
  /// Base policy's joint control at the decision state.
  JointAction base_actions;
  std::vector<AgentQTable> tables;  // agent_order order
  std::size_t q_evaluations = 0;
  std::size_t hallucinations = 0;
};

/// Lookahead cost of one future: apply `first` at `s`, then run `base` jointly
/// for the remaining steps (capped at the scenario horizon), summing weighted
/// stage costs from s_k through the last simulated state.
std::int64_t future_cost(const FleetState& s, const World& w, std::span<const AgentAction> first,
                         const FutureStream& future, const Policy& base, Step t_h, std::int64_t cost_weight,
                         std::uint64_t seed);

/// Later agents' controls given the fixed prefix and a candidate for `l`.
JointAction compose_joint(const FleetState& s, const World& w, AgentIndex l, const AgentAction& candidate,
                          std::span<const AgentAction> current, std::span<const AgentIndex> order,
                          std::size_t position, const Policy& base, std::uint64_t seed);

/// Q-factor of candidate `u_l` for agent `l`: agents before `l` use `fixed`,
/// agents after it use the base policy.
QEstimate q_estimate(const FleetState& s, const World& w, AgentIndex l, const AgentAction& u_l,
                     std::span<const AgentAction> fixed, const RolloutConfig& cfg,
                     std::span<const FutureStream> futures, std::uint64_t seed);

/// Per-future costs for a batch of composed joint actions, row-major
/// [candidate][future]. The serial and OpenMP kernels are interchangeable.
std::vector<std::int64_t> evaluate_serial(const FleetState& s, const World& w,
                                          std::span<const JointAction> candidates,
                                          std::span<const FutureStream> futures, const RolloutConfig& cfg,
                                          std::uint64_t seed);
std::vector<std::int64_t> evaluate_openmp(const FleetState& s, const World& w,
                                          std::span<const JointAction> candidates,
                                          std::span<const FutureStream> futures, const RolloutConfig& cfg,
                                          std::uint64_t seed);

/// Futures shared by every agent and candidate of the decision at `seed`.
std::vector<FutureStream> draw_futures(const RolloutConfig& cfg, const World& w, std::uint64_t seed);

/// One-at-a-time rollout: agents optimised in order, each over its local
/// control set, earlier choices fixed and later agents on the base policy.
RolloutDecision rollout_decide(const FleetState& s, const RolloutConfig& cfg, const World& w, std::uint64_t seed);

/// Rollout over an external (learned) base policy. Same machinery; requires
/// cfg.base to be an external_policy adapter.
RolloutDecision online_play_decide(const FleetState& s, const RolloutConfig& cfg, const World& w,
                                   std::uint64_t seed);

class RolloutPolicy final : public Policy {
 public:
  explicit RolloutPolicy(RolloutConfig cfg);

  std::string name() const override;
  Decision decide(const FleetState& s, const World& w, std::uint64_t seed) const override;

  const RolloutConfig& config() const { return cfg_; }
  std::size_t q_evaluations() const { return q_evaluations_.load(); }

 private:
  RolloutConfig cfg_;
  mutable std::atomic<std::size_t> q_evaluations_{0};
};

}  // namespace taxi
