#include "taxi/policy.hpp"

#include <fmt/format.h>

namespace taxi {

AgentDecision Policy::decide_agent(const FleetState& s, const World& w, AgentIndex l,
                                   std::span<const AgentAction>, std::span<const AgentAction>,
                                   std::uint64_t seed) const {
  auto d = decide(s, w, seed);
  return {d.actions.at(l), 0};
}

AgentAction action_toward(const FleetState& s, const World& w, AgentIndex l, Vertex target) {
  const auto here = s.agents[l].position;
  if (here == target) return {here, true};
  const auto hop = w.paths.next_hop(here, target);
  return {hop, hop == target};
}

AgentAction greedy_action(const FleetState& s, const World& w, AgentIndex l) {
  const auto& agent = s.agents[l];
  if (!agent.available()) return fallback_action(s, w, l);
  const Request* nearest = nullptr;
  Hops best = kUnreachable;
  for (const auto& r : s.outstanding) {  // ascending (entry_time, id): first minimum wins ties
    const auto d = w.paths.hops(agent.position, r.pickup);
    if (d < best) {
      best = d;
      nearest = &r;
    }
  }
  if (!nearest) return {agent.position, false};
  return action_toward(s, w, l, nearest->pickup);
}

Decision GreedyPolicy::decide(const FleetState& s, const World& w, std::uint64_t) const {
  Decision d;
  d.actions.reserve(s.agents.size());
  for (std::size_t l = 0; l < s.agents.size(); ++l) d.actions.push_back(greedy_action(s, w, l));
  return d;
}

AgentDecision GreedyPolicy::decide_agent(const FleetState& s, const World& w, AgentIndex l,
                                         std::span<const AgentAction>, std::span<const AgentAction>,
                                         std::uint64_t) const {
  return {greedy_action(s, w, l), 0};
}

Assignment ia_ra_assignment(const FleetState& s, const World& w) {
  CostMatrix costs;
  costs.reserve(s.agents.size());
  for (const auto& agent : s.agents) {
    auto& row = costs.emplace_back(s.outstanding.size());
    if (!agent.available()) continue;  // row stays infeasible
    for (std::size_t j = 0; j < s.outstanding.size(); ++j) {
      const auto d = w.paths.hops(agent.position, s.outstanding[j].pickup);
      if (d != kUnreachable) row[j] = d;
    }
  }
  return auction_assign(costs);
}

Decision IaRaPolicy::decide(const FleetState& s, const World& w, std::uint64_t) const {
  Decision d;
  d.actions.reserve(s.agents.size());
  if (s.outstanding.empty()) {
    for (std::size_t l = 0; l < s.agents.size(); ++l) d.actions.push_back(fallback_action(s, w, l));
    return d;
  }
  const auto assignment = ia_ra_assignment(s, w);
  for (std::size_t l = 0; l < s.agents.size(); ++l) {
    const auto& target = assignment.request_of[l];
    if (s.agents[l].available() && target) {
      d.actions.push_back(action_toward(s, w, l, s.outstanding[*target].pickup));
    } else {
      d.actions.push_back(fallback_action(s, w, l));
    }
  }
  return d;
}

Decision StayPolicy::decide(const FleetState& s, const World& w, std::uint64_t) const {
  Decision d;
  for (std::size_t l = 0; l < s.agents.size(); ++l) d.actions.push_back(fallback_action(s, w, l));
  return d;
}

AgentAction ValidatedPolicy::enforce(const FleetState& s, const World& w, AgentIndex l,
                                     const AgentAction& a) const {
  if (is_feasible(s, w, l, a)) return a;
  {
    std::lock_guard lock(mutex_);
    incidents_.push_back({s.clock, l,
                          fmt::format("{} proposed infeasible control (next vertex {}, pickup {})", adapter_->name(),
                                      index(a.next), a.pickup)});
  }
  return fallback_action(s, w, l);
}

Decision ValidatedPolicy::decide(const FleetState& s, const World& w, std::uint64_t seed) const {
  Decision d;
  try {
    d = adapter_->decide(s, w, seed);
  } catch (const std::exception& e) {
    throw PolicyError(fmt::format("{} failed at step {}: {}", adapter_->name(), s.clock, e.what()));
  }
  if (d.actions.size() != s.agents.size()) {
    throw PolicyError(fmt::format("{} returned {} controls for {} agents", adapter_->name(), d.actions.size(),
                                  s.agents.size()));
  }
  for (std::size_t l = 0; l < d.actions.size(); ++l) d.actions[l] = enforce(s, w, l, d.actions[l]);
  return d;
}

AgentDecision ValidatedPolicy::decide_agent(const FleetState& s, const World& w, AgentIndex l,
                                            std::span<const AgentAction> fixed, std::span<const AgentAction> suggested,
                                            std::uint64_t seed) const {
  AgentDecision d;
  try {
    d = adapter_->decide_agent(s, w, l, fixed, suggested, seed);
  } catch (const std::exception& e) {
    throw PolicyError(fmt::format("{} failed at step {}: {}", adapter_->name(), s.clock, e.what()));
  }
  d.action = enforce(s, w, l, d.action);
  return d;
}

std::vector<PolicyIncident> ValidatedPolicy::incidents() const {
  std::lock_guard lock(mutex_);
  return incidents_;
}

}  // namespace taxi
