#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "taxi/llm/chat.hpp"
#include "taxi/mdp.hpp"

namespace taxi::llm {

/// Map description: every node with coordinates, every directed road, the
/// optional semantic context sentence, then the two decision rules.
ChatMessage build_system_prompt(const RoadGraph& g, const std::optional<std::string>& semantic_context = {});

/// Per-agent state description F(s, l): fleet status, outstanding requests
/// with every taxi's shortest route, the known controls of earlier agents and
/// the expected controls of later ones, then the answer-format instruction.
ChatMessage build_user_prompt(const FleetState& s, const World& w, AgentIndex l, std::span<const AgentAction> fixed,
                              std::span<const AgentAction> suggested);

/// "pickup, go to X." / "do not pickup, go to X."
std::string describe_action(const AgentAction& a, const RoadGraph& g);

/// Assistant turn used for fine-tuning labels.
std::string render_reply(const AgentAction& a, const RoadGraph& g);

extern const char* const kAnswerFormat;
extern const char* const kChainOfThought;
extern const char* const kTreeOfThoughts;

/// Three worked user/assistant exemplars (six messages).
const std::vector<ChatMessage>& few_shot_exemplars();

/// Value prompt asking for a 1-10 score of one candidate control.
std::string value_prompt(const std::string& user_prompt, const AgentAction& candidate, const RoadGraph& g);

/// Reprompt after an invalid answer.
std::string correction_prompt(const FleetState& s, const World& w, AgentIndex l, const std::string& problem);

}  // namespace taxi::llm
