#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "taxi/mdp.hpp"

namespace taxi::llm {

struct ParsedAction {
  bool pickup = false;
  NodeId next_position{};
  std::string raw_text;
  std::string reasoning;  // text before the tuple
};

/// Last "(pickup: <bool>, next position: <id>)" tuple in `text`. Tolerates
/// case, markdown emphasis, brackets and underscores. nullopt when absent.
std::optional<ParsedAction> parse_action(std::string_view text);

/// Last "score: N" (or a bare integer) in 1..10; 0 when none is found.
int parse_score(std::string_view text);

enum class HallucinationKind { spatial, parse_failure };

std::string_view to_string(HallucinationKind k);

struct HallucinationReport {
  HallucinationKind kind = HallucinationKind::spatial;
  std::optional<NodeId> attempted;
  Step step = 0;
  AgentIndex agent = 0;
};

struct FeasibilityCheck {
  std::optional<HallucinationReport> hallucination;
  /// Control to execute when no hallucination was found.
  AgentAction executed;
  /// A pickup was requested where no request waits; the flag was dropped.
  bool pickup_ignored = false;

  bool ok() const { return !hallucination.has_value(); }
};

/// Accepts the current position, an out-neighbour, or (without a pickup flag)
/// any node on a shortest route to an outstanding request's pickup, which is
/// executed as the first hop toward it. Anything else, including a pickup at a
/// node that cannot be reached this step, is a spatial hallucination.
FeasibilityCheck check_feasible(const FleetState& s, const World& w, AgentIndex l, const ParsedAction& a);

}  // namespace taxi::llm
