#include "taxi/simulate.hpp"

#include <istream>
#include <ostream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "taxi/rng.hpp"

namespace taxi {

SimulationError::SimulationError(Step step, const std::string& what)
    : std::runtime_error(fmt::format("step {}: {}", step, what)), step_(step) {}

std::uint64_t decision_seed(std::uint64_t seed, Step k) {
  return derive_seed(seed, static_cast<std::uint64_t>(k));
}

SimulationResult simulate(const Scenario& sc, const World& w, const Policy& policy, std::uint64_t seed,
                          bool keep_trace) {
  SimulationResult result;
  FleetState s = initial_state(sc);
  result.total_cost += static_cast<std::int64_t>(stage_cost(s));
  for (Step k = 0; k + 1 < sc.horizon; ++k) {
    Decision d;
    try {
      d = policy.decide(s, w, decision_seed(seed, k));
      result.hallucinations += d.hallucinations;
      if (keep_trace) result.trace.push_back({s, d.actions});
      apply_step(s, d.actions, arrivals_at(sc, k + 1), w, &result.pickups);
    } catch (const std::exception& e) {
      throw SimulationError(k, e.what());
    }
    result.total_cost += static_cast<std::int64_t>(stage_cost(s));
  }
  if (keep_trace) result.trace.push_back({s, {}});
  return result;
}

Decision ReplayPolicy::decide(const FleetState& s, const World&, std::uint64_t) const {
  if (s.clock < 0 || static_cast<std::size_t>(s.clock) >= actions_.size()) {
    throw PolicyError(fmt::format("no recorded action for step {}", s.clock));
  }
  return {actions_[static_cast<std::size_t>(s.clock)], 0};
}

ReplayPolicy replay_policy(const SimulationResult& r) {
  std::vector<JointAction> actions;
  for (const auto& e : r.trace) {
    if (!e.action.empty()) actions.push_back(e.action);
  }
  return ReplayPolicy(std::move(actions));
}

void write_trace(std::ostream& out, const SimulationResult& r, const RoadGraph& g) {
  for (const auto& e : r.trace) {
    nlohmann::ordered_json line;
    line["k"] = e.state.clock;
    line["digest"] = fmt::format("{:016x}", digest(e.state, g));
    line["stage_cost"] = stage_cost(e.state);
    auto& action = line["action"] = nlohmann::ordered_json::array();
    for (const auto& a : e.action) action.push_back({{"next", value(g.id(a.next))}, {"pickup", a.pickup}});
    out << line.dump() << '\n';
  }
}

std::vector<TraceRecord> read_trace(std::istream& in, const RoadGraph& g) {
  std::vector<TraceRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    TraceRecord rec;
    rec.k = j.at("k").get<Step>();
    rec.digest = std::stoull(j.at("digest").get<std::string>(), nullptr, 16);
    for (const auto& a : j.at("action")) {
      rec.action.push_back({g.at(NodeId{a.at("next").get<std::uint64_t>()}), a.at("pickup").get<bool>()});
    }
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace taxi
