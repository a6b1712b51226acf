#include "taxi/mdp.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace taxi {

FleetState initial_state(const Scenario& sc) {
  FleetState s;
  s.clock = 0;
  s.horizon = sc.horizon;
  for (const auto p : sc.initial_positions) s.agents.push_back(AgentStatus{p, 0, std::nullopt});
  const auto first = arrivals_at(sc, 0);
  s.outstanding.assign(first.begin(), first.end());
  return s;
}

std::span<const Request> arrivals_at(const Scenario& sc, Step k) {
  const auto by_entry = [](const Request& r, Step t) { return r.entry_time < t; };
  const auto lo = std::lower_bound(sc.requests.begin(), sc.requests.end(), k, by_entry);
  auto hi = lo;
  while (hi != sc.requests.end() && hi->entry_time == k) ++hi;
  return {lo, hi};
}

bool has_request_at(const FleetState& s, Vertex v) {
  return std::any_of(s.outstanding.begin(), s.outstanding.end(),
                     [v](const Request& r) { return r.pickup == v; });
}

std::vector<AgentAction> local_controls(const FleetState& s, const World& w, AgentIndex l) {
  const auto& agent = s.agents.at(l);
  if (!agent.available()) {
    return {AgentAction{w.paths.next_hop(agent.position, *agent.destination), false}};
  }
  std::vector<AgentAction> controls;
  const auto add = [&](Vertex p) {
    controls.push_back({p, false});
    if (has_request_at(s, p)) controls.push_back({p, true});
  };
  add(agent.position);
  for (const auto n : w.graph.out(agent.position)) add(n);
  return controls;
}

std::size_t local_control_count(const FleetState& s, const World& w, AgentIndex l) {
  const auto& agent = s.agents.at(l);
  if (!agent.available()) return 1;
  std::size_t count = 1 + (has_request_at(s, agent.position) ? 1 : 0);
  for (const auto n : w.graph.out(agent.position)) count += 1 + (has_request_at(s, n) ? 1 : 0);
  return count;
}

bool is_feasible(const FleetState& s, const World& w, AgentIndex l, const AgentAction& a) {
  const auto& agent = s.agents.at(l);
  if (!agent.available()) {
    return !a.pickup && a.next == w.paths.next_hop(agent.position, *agent.destination);
  }
  if (a.next != agent.position && !w.graph.has_edge(agent.position, a.next)) return false;
  return !a.pickup || has_request_at(s, a.next);
}

AgentAction fallback_action(const FleetState& s, const World& w, AgentIndex l) {
  const auto& agent = s.agents.at(l);
  if (!agent.available()) return {w.paths.next_hop(agent.position, *agent.destination), false};
  return {agent.position, false};
}

void apply_step(FleetState& s, std::span<const AgentAction> u, std::span<const Request> arrivals,
                const World& w, std::vector<PickupEvent>* events) {
  const auto m = s.agents.size();
  if (u.size() != m) {
    throw InfeasibleAction(fmt::format("joint action has {} components for {} agents", u.size(), m));
  }
  for (std::size_t l = 0; l < m; ++l) {
    if (!is_feasible(s, w, l, u[l])) {
      throw InfeasibleAction(fmt::format("agent {} control (next {}, pickup {}) is outside its control set at step {}",
                                         l, value(w.graph.id(u[l].next)), u[l].pickup, s.clock));
    }
  }
  const Step next_clock = s.clock + 1;

  // Occupied agents advance along their dropoff route; available agents move,
  // then claim pickups in agent-index order (oldest request at the node).
  for (std::size_t l = 0; l < m; ++l) {
    auto& agent = s.agents[l];
    agent.position = u[l].next;
    if (!agent.available()) {
      if (--agent.remaining == 0) agent.destination.reset();
      continue;
    }
    if (!u[l].pickup) continue;
    const auto it = std::find_if(s.outstanding.begin(), s.outstanding.end(),
                                 [&](const Request& r) { return r.pickup == agent.position; });
    if (it == s.outstanding.end()) continue;  // claimed by a lower-index agent
    agent.destination = it->dropoff;
    agent.remaining = w.paths.hops(agent.position, it->dropoff);
    if (events) events->push_back({it->id, l, next_clock, it->entry_time});
    s.outstanding.erase(it);
  }

  for (const auto& r : arrivals) {
    if (r.entry_time != next_clock) {
      throw InfeasibleAction(fmt::format("arrival {} enters at {} but the step produces time {}",
                                         r.id, r.entry_time, next_clock));
    }
    s.outstanding.push_back(r);
  }
  s.clock = next_clock;
}

FleetState step(const FleetState& s, std::span<const AgentAction> u, std::span<const Request> arrivals,
                const World& w, std::vector<PickupEvent>* events) {
  FleetState next = s;
  apply_step(next, u, arrivals, w, events);
  return next;
}

namespace {

struct Fnv1a {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void add(std::uint64_t x) {
    for (int i = 0; i < 8; ++i) {
      h ^= (x >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  }
};

}  // namespace

std::uint64_t digest(const FleetState& s, const RoadGraph& g) {
  Fnv1a f;
  f.add(static_cast<std::uint64_t>(s.clock));
  f.add(static_cast<std::uint64_t>(s.horizon));
  f.add(s.agents.size());
  for (const auto& a : s.agents) {
    f.add(value(g.id(a.position)));
    f.add(static_cast<std::uint64_t>(a.remaining));
    f.add(a.destination ? value(g.id(*a.destination)) : 0);
  }
  f.add(s.outstanding.size());
  for (const auto& r : s.outstanding) {
    f.add(r.id);
    f.add(value(g.id(r.pickup)));
    f.add(value(g.id(r.dropoff)));
    f.add(static_cast<std::uint64_t>(r.entry_time));
  }
  return f.h;
}

std::string render_action(const AgentAction& a, const RoadGraph& g) {
  return fmt::format("(pickup: {}, next position: {})", a.pickup ? "True" : "False", value(g.id(a.next)));
}

}  // namespace taxi
