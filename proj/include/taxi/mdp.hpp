#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "taxi/demand.hpp"
#include "taxi/graph.hpp"
#include "taxi/ids.hpp"

namespace taxi {

struct AgentStatus {
  Vertex position{};
  Step remaining = 0;  // 0 = available
  std::optional<Vertex> destination;

  bool available() const { return remaining == 0; }
  friend bool operator==(const AgentStatus&, const AgentStatus&) = default;
};

struct FleetState {
  Step clock = 0;
  Step horizon = 0;
  std::vector<AgentStatus> agents;
  std::vector<Request> outstanding;  // entered and not picked up, ascending (entry_time, id)

  std::size_t agent_count() const { return agents.size(); }
  friend bool operator==(const FleetState&, const FleetState&) = default;
};

struct AgentAction {
  Vertex next{};
  bool pickup = false;

  friend bool operator==(const AgentAction&, const AgentAction&) = default;
};

using JointAction = std::vector<AgentAction>;

struct PickupEvent {
  RequestId request = 0;
  AgentIndex agent = 0;
  Step time = 0;
  Step entry_time = 0;
};

class InfeasibleAction : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

FleetState initial_state(const Scenario& sc);

/// Requests of `sc` entering at step `k`.
std::span<const Request> arrivals_at(const Scenario& sc, Step k);

bool has_request_at(const FleetState& s, Vertex v);

/// Local control set of agent `l`. Occupied agents get their forced next hop.
/// Available agents: stay first, then out-neighbours ascending; each position
/// is followed by its pickup variant when an outstanding request waits there.
std::vector<AgentAction> local_controls(const FleetState& s, const World& w, AgentIndex l);

/// Number of controls without materialising them.
std::size_t local_control_count(const FleetState& s, const World& w, AgentIndex l);

bool is_feasible(const FleetState& s, const World& w, AgentIndex l, const AgentAction& a);

/// Forced control for occupied agents, stay otherwise.
AgentAction fallback_action(const FleetState& s, const World& w, AgentIndex l);

/// In-place transition. Throws InfeasibleAction for controls outside the
/// local control sets or arrivals not entering at clock + 1.
void apply_step(FleetState& s, std::span<const AgentAction> u, std::span<const Request> arrivals,
                const World& w, std::vector<PickupEvent>* events = nullptr);

/// Transition as a value: returns s_{k+1}.
FleetState step(const FleetState& s, std::span<const AgentAction> u, std::span<const Request> arrivals,
                const World& w, std::vector<PickupEvent>* events = nullptr);

inline std::size_t stage_cost(const FleetState& s) { return s.outstanding.size(); }

/// Stable 64-bit digest of a state (FNV-1a over a canonical encoding).
std::uint64_t digest(const FleetState& s, const RoadGraph& g);

std::string render_action(const AgentAction& a, const RoadGraph& g);

}  // namespace taxi
