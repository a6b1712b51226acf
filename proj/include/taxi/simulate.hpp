#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "taxi/mdp.hpp"
#include "taxi/policy.hpp"

namespace taxi {

class SimulationError : public std::runtime_error {
 public:
  SimulationError(Step step, const std::string& what);
  Step step() const { return step_; }

 private:
  Step step_;
};

struct TraceEntry {
  FleetState state;
  JointAction action;  // empty for the terminal state
};

struct SimulationResult {
  std::int64_t total_cost = 0;  // request-minutes of waiting
  std::size_t hallucinations = 0;
  std::vector<TraceEntry> trace;
  std::vector<PickupEvent> pickups;
};

/// Seed handed to the policy at step k of a simulation seeded with `seed`.
std::uint64_t decision_seed(std::uint64_t seed, Step k);

/// Runs the policy over the scenario: states s_0..s_{N-1} with N-1
/// transitions; total cost is the sum of their stage costs.
SimulationResult simulate(const Scenario& sc, const World& w, const Policy& policy, std::uint64_t seed,
                          bool keep_trace = true);

/// Replays recorded joint actions in order.
class ReplayPolicy final : public Policy {
 public:
  explicit ReplayPolicy(std::vector<JointAction> actions) : actions_(std::move(actions)) {}
  std::string name() const override { return "replay"; }
  Decision decide(const FleetState& s, const World& w, std::uint64_t seed) const override;

 private:
  std::vector<JointAction> actions_;
};

ReplayPolicy replay_policy(const SimulationResult& r);

/// Line-delimited trace: one JSON object per step with the clock, state
/// digest, stage cost and joint action (node ids).
void write_trace(std::ostream& out, const SimulationResult& r, const RoadGraph& g);

struct TraceRecord {
  Step k = 0;
  std::uint64_t digest = 0;
  JointAction action;
};

std::vector<TraceRecord> read_trace(std::istream& in, const RoadGraph& g);

}  // namespace taxi
