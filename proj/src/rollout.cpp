#include "taxi/rollout.hpp"

#include <algorithm>
#include <array>
#include <exception>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>
#include <omp.h>

#include "taxi/rng.hpp"

namespace taxi {

namespace {

constexpr RequestId kFutureIdBase = 1'000'000;

// Sub-stream tags under a decision seed.
constexpr std::uint64_t kFuturesTag = 0x46555455;  // futures family
constexpr std::uint64_t kBaseTag = 0x42415345;     // base-policy seeds inside futures
constexpr std::uint64_t kPrefixTag = 0x50524546;   // base decisions at the decision state

std::uint64_t sample_seed(std::uint64_t seed, std::size_t f) {
  return derive_seed(derive_seed(seed, kBaseTag), f);
}

std::vector<AgentIndex> resolved_order(const RolloutConfig& cfg, std::size_t m) {
  if (!cfg.agent_order.empty()) return cfg.agent_order;
  std::vector<AgentIndex> order(m);
  std::iota(order.begin(), order.end(), AgentIndex{0});
  return order;
}

}  // namespace

void RolloutConfig::validate(std::size_t agents) const {
  if (mc_samples < 1) throw std::invalid_argument("mc_samples must be at least 1");
  if (t_h < 1) throw std::invalid_argument("t_h must be at least 1");
  if (!base) throw std::invalid_argument("rollout needs a base policy");
  if (cost_weight < 1) throw std::invalid_argument("cost_weight must be positive");
  if (!agent_order.empty()) {
    std::vector<bool> seen(agents, false);
    if (agent_order.size() != agents) throw std::invalid_argument("agent_order must list every agent once");
    for (const auto a : agent_order) {
      if (a >= agents || seen[a]) throw std::invalid_argument("agent_order must be a permutation");
      seen[a] = true;
    }
  }
}

std::int64_t future_cost(const FleetState& s, const World& w, std::span<const AgentAction> first,
                         const FutureStream& future, const Policy& base, Step t_h, std::int64_t cost_weight,
                         std::uint64_t seed) {
  const Step k0 = s.clock;
  const Step steps = std::min<Step>(t_h, s.horizon - 1 - k0);
  std::int64_t cost = static_cast<std::int64_t>(stage_cost(s));
  if (steps <= 0) return cost * cost_weight;

  FleetState state = s;
  std::vector<Request> arrivals;
  std::size_t next_future = 0;
  const auto arrivals_for = [&](Step offset) {
    arrivals.clear();
    while (next_future < future.size() && future[next_future].offset == offset) {
      const auto& f = future[next_future];
      arrivals.push_back(Request{kFutureIdBase + static_cast<RequestId>(next_future), f.pickup, f.dropoff,
                                 k0 + offset, std::nullopt, std::nullopt});
      ++next_future;
    }
    return std::span<const Request>(arrivals);
  };

  apply_step(state, first, arrivals_for(1), w);
  cost += static_cast<std::int64_t>(stage_cost(state));
  for (Step j = 1; j < steps; ++j) {
    const auto d = base.decide(state, w, derive_seed(seed, static_cast<std::uint64_t>(j)));
    apply_step(state, d.actions, arrivals_for(j + 1), w);
    cost += static_cast<std::int64_t>(stage_cost(state));
  }
  return cost * cost_weight;
}

JointAction compose_joint(const FleetState& s, const World& w, AgentIndex l, const AgentAction& candidate,
                          std::span<const AgentAction> current, std::span<const AgentIndex> order,
                          std::size_t position, const Policy& base, std::uint64_t seed) {
  JointAction joint(current.begin(), current.end());
  joint[l] = candidate;
  if (!base.conditions_on_others()) return joint;
  for (std::size_t p = position + 1; p < order.size(); ++p) {
    const auto j = order[p];
    const std::span<const AgentAction> all(joint);
    joint[j] = base.decide_agent(s, w, j, all.subspan(0, j), all.subspan(j + 1), derive_seed(seed, j)).action;
  }
  return joint;
}

std::vector<std::int64_t> evaluate_serial(const FleetState& s, const World& w,
                                          std::span<const JointAction> candidates,
                                          std::span<const FutureStream> futures, const RolloutConfig& cfg,
                                          std::uint64_t seed) {
  std::vector<std::int64_t> costs(candidates.size() * futures.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    for (std::size_t f = 0; f < futures.size(); ++f) {
      costs[c * futures.size() + f] =
          future_cost(s, w, candidates[c], futures[f], *cfg.base, cfg.t_h, cfg.cost_weight, sample_seed(seed, f));
    }
  }
  return costs;
}

std::vector<std::int64_t> evaluate_openmp(const FleetState& s, const World& w,
                                          std::span<const JointAction> candidates,
                                          std::span<const FutureStream> futures, const RolloutConfig& cfg,
                                          std::uint64_t seed) {
  const auto n_futures = futures.size();
  const auto tasks = static_cast<std::int64_t>(candidates.size() * n_futures);
  std::vector<std::int64_t> costs(static_cast<std::size_t>(tasks));
  std::exception_ptr failure;
  // Inside an enclosing parallel region (benchmark cells) the team is one thread.
  const int threads = omp_in_parallel() ? 1 : (cfg.threads > 0 ? cfg.threads : omp_get_max_threads());

#pragma omp parallel for schedule(dynamic, 8) num_threads(threads) if (tasks > 1)
  for (std::int64_t t = 0; t < tasks; ++t) {
    const auto c = static_cast<std::size_t>(t) / n_futures;
    const auto f = static_cast<std::size_t>(t) % n_futures;
    try {
      costs[static_cast<std::size_t>(t)] =
          future_cost(s, w, candidates[c], futures[f], *cfg.base, cfg.t_h, cfg.cost_weight, sample_seed(seed, f));
    } catch (...) {
#pragma omp critical(taxi_rollout_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return costs;
}

std::vector<FutureStream> draw_futures(const RolloutConfig& cfg, const World& w, std::uint64_t seed) {
  const CeFutureSampler sampler(cfg.demand, w, cfg.t_h, derive_seed(seed, kFuturesTag));
  return sampler.samples(cfg.mc_samples);
}

namespace {

std::vector<QEstimate> estimates_for(const FleetState& s, const World& w, std::span<const AgentAction> controls,
                                     std::span<const JointAction> joints, std::span<const FutureStream> futures,
                                     const RolloutConfig& cfg, std::uint64_t seed) {
  const auto costs = cfg.evaluator == Evaluator::serial ? evaluate_serial(s, w, joints, futures, cfg, seed)
                                                        : evaluate_openmp(s, w, joints, futures, cfg, seed);
  std::vector<QEstimate> out;
  out.reserve(controls.size());
  for (std::size_t c = 0; c < controls.size(); ++c) {
    QEstimate q{controls[c], 0, futures.size()};
    for (std::size_t f = 0; f < futures.size(); ++f) q.total_cost += costs[c * futures.size() + f];
    out.push_back(q);
  }
  return out;
}

}  // namespace

QEstimate q_estimate(const FleetState& s, const World& w, AgentIndex l, const AgentAction& u_l,
                     std::span<const AgentAction> fixed, const RolloutConfig& cfg,
                     std::span<const FutureStream> futures, std::uint64_t seed) {
  cfg.validate(s.agents.size());
  if (!is_feasible(s, w, l, u_l)) throw InfeasibleAction("q_estimate candidate outside the local control set");
  if (fixed.size() != l) throw std::invalid_argument("fixed must hold the controls of agents before l");

  auto base_joint = cfg.base->decide(s, w, derive_seed(seed, kPrefixTag)).actions;
  std::copy(fixed.begin(), fixed.end(), base_joint.begin());
  std::vector<AgentIndex> order(s.agents.size());
  std::iota(order.begin(), order.end(), AgentIndex{0});
  const std::vector<JointAction> joints{
      compose_joint(s, w, l, u_l, base_joint, order, l, *cfg.base, derive_seed(seed, kPrefixTag + 1 + l))};
  const std::array<AgentAction, 1> controls{u_l};
  return estimates_for(s, w, controls, joints, futures, cfg, seed).front();
}

RolloutDecision rollout_decide(const FleetState& s, const RolloutConfig& cfg, const World& w, std::uint64_t seed) {
  const auto m = s.agents.size();
  cfg.validate(m);
  RolloutDecision out;

  const auto base_decision = cfg.base->decide(s, w, derive_seed(seed, kPrefixTag));
  out.hallucinations = base_decision.hallucinations;
  out.base_actions = base_decision.actions;
  JointAction current = base_decision.actions;
  const auto order = resolved_order(cfg, m);

  std::vector<FutureStream> futures;
  bool futures_drawn = false;

  for (std::size_t position = 0; position < order.size(); ++position) {
    const auto l = order[position];
    const auto controls = local_controls(s, w, l);
    AgentQTable table;
    table.agent = l;
    if (controls.size() == 1) {
      table.forced = true;
      table.estimates.push_back({controls.front(), 0, 0});
      current[l] = controls.front();
      out.tables.push_back(std::move(table));
      continue;
    }
    if (!futures_drawn) {
      futures = draw_futures(cfg, w, seed);
      futures_drawn = true;
    }

    std::vector<JointAction> joints;
    joints.reserve(controls.size());
    for (const auto& u : controls) {
      joints.push_back(
          compose_joint(s, w, l, u, current, order, position, *cfg.base, derive_seed(seed, kPrefixTag + 1 + l)));
    }
    table.estimates = estimates_for(s, w, controls, joints, futures, cfg, seed);
    out.q_evaluations += controls.size();

    // Strict improvement keeps the earliest candidate on ties.
    for (std::size_t c = 1; c < table.estimates.size(); ++c) {
      if (table.estimates[c].total_cost < table.estimates[table.chosen].total_cost) table.chosen = c;
    }
    current[l] = controls[table.chosen];
    out.tables.push_back(std::move(table));
  }
  out.actions = std::move(current);
  return out;
}

RolloutDecision online_play_decide(const FleetState& s, const RolloutConfig& cfg, const World& w,
                                   std::uint64_t seed) {
  if (!dynamic_cast<const ValidatedPolicy*>(cfg.base.get())) {
    throw std::invalid_argument("online play needs an external_policy base");
  }
  return rollout_decide(s, cfg, w, seed);
}

RolloutPolicy::RolloutPolicy(RolloutConfig cfg) : cfg_(std::move(cfg)) {
  if (!cfg_.base) throw std::invalid_argument("rollout needs a base policy");
}

std::string RolloutPolicy::name() const { return "rollout:" + cfg_.base->name(); }

Decision RolloutPolicy::decide(const FleetState& s, const World& w, std::uint64_t seed) const {
  auto d = rollout_decide(s, cfg_, w, seed);
  q_evaluations_ += d.q_evaluations;
  return {std::move(d.actions), d.hallucinations};
}

}  // namespace taxi
