#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "taxi/auction.hpp"
#include "taxi/mdp.hpp"

namespace taxi {

class PolicyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AgentDecision {
  AgentAction action;
  std::size_t hallucinations = 0;
};

struct Decision {
  JointAction actions;
  std::size_t hallucinations = 0;
};

/// A decision rule mu_k. Implementations must be safe to call concurrently.
class Policy {
 public:
  virtual ~Policy() = default;

  virtual std::string name() const = 0;

  virtual Decision decide(const FleetState& s, const World& w, std::uint64_t seed) const = 0;

  /// Control for agent `l` given the controls already fixed for agents < l and
  /// suggested controls for agents > l. The default ignores both and returns
  /// component l of decide().
  virtual AgentDecision decide_agent(const FleetState& s, const World& w, AgentIndex l,
                                     std::span<const AgentAction> fixed,
                                     std::span<const AgentAction> suggested, std::uint64_t seed) const;

  /// True when decide_agent depends on `fixed`/`suggested`; rollout then
  /// re-queries it for every candidate instead of reusing decide().
  virtual bool conditions_on_others() const { return false; }
};

using PolicyPtr = std::shared_ptr<const Policy>;

/// Each available taxi heads for its nearest outstanding request (ties:
/// earliest entry, then lowest id) without coordinating; stays when none.
class GreedyPolicy final : public Policy {
 public:
  std::string name() const override { return "greedy"; }
  Decision decide(const FleetState& s, const World& w, std::uint64_t seed) const override;
  AgentDecision decide_agent(const FleetState& s, const World& w, AgentIndex l, std::span<const AgentAction> fixed,
                             std::span<const AgentAction> suggested, std::uint64_t seed) const override;
};

AgentAction greedy_action(const FleetState& s, const World& w, AgentIndex l);

/// Instantaneous reassignment: available taxis are re-matched to all
/// outstanding requests every step with the auction; unmatched taxis stay.
class IaRaPolicy final : public Policy {
 public:
  std::string name() const override { return "ia-ra"; }
  Decision decide(const FleetState& s, const World& w, std::uint64_t seed) const override;
};

/// Step toward `target`, flagging pickup when the step lands on it.
AgentAction action_toward(const FleetState& s, const World& w, AgentIndex l, Vertex target);

/// Current matching used by IaRaPolicy: request index per agent.
Assignment ia_ra_assignment(const FleetState& s, const World& w);

/// Every available taxi stays put.
class StayPolicy final : public Policy {
 public:
  std::string name() const override { return "stay"; }
  Decision decide(const FleetState& s, const World& w, std::uint64_t seed) const override;
};

/// Policy backed by a callable; used for scripted and test adapters.
class FunctionPolicy final : public Policy {
 public:
  using Fn = std::function<JointAction(const FleetState&, const World&, std::uint64_t)>;
  FunctionPolicy(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}
  std::string name() const override { return name_; }
  Decision decide(const FleetState& s, const World& w, std::uint64_t seed) const override {
    return {fn_(s, w, seed), 0};
  }

 private:
  std::string name_;
  Fn fn_;
};

struct PolicyIncident {
  Step step = 0;
  AgentIndex agent = 0;
  std::string detail;
};

/// Wraps an adapter with action-validity enforcement: infeasible components
/// are replaced by the fallback control and logged as incidents. Adapter
/// exceptions are rethrown as PolicyError.
class ValidatedPolicy final : public Policy {
 public:
  explicit ValidatedPolicy(PolicyPtr adapter) : adapter_(std::move(adapter)) {}

  std::string name() const override { return adapter_->name(); }
  Decision decide(const FleetState& s, const World& w, std::uint64_t seed) const override;
  AgentDecision decide_agent(const FleetState& s, const World& w, AgentIndex l, std::span<const AgentAction> fixed,
                             std::span<const AgentAction> suggested, std::uint64_t seed) const override;
  bool conditions_on_others() const override { return adapter_->conditions_on_others(); }

  std::vector<PolicyIncident> incidents() const;
  const Policy& adapter() const { return *adapter_; }

 private:
  AgentAction enforce(const FleetState& s, const World& w, AgentIndex l, const AgentAction& a) const;

  PolicyPtr adapter_;
  mutable std::mutex mutex_;
  mutable std::vector<PolicyIncident> incidents_;
};

inline PolicyPtr external_policy(PolicyPtr adapter) {
  return std::make_shared<ValidatedPolicy>(std::move(adapter));
}

}  // namespace taxi
