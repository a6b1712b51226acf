#include "taxi/llm/prompt.hpp"

#include <fmt/format.h>

namespace taxi::llm {

const char* const kAnswerFormat =
    "Please provide your next action as a tuple in the format: (pickup: True or False, next position: [numeric "
    "value]).";

const char* const kChainOfThought =
    "Before deciding your next action, consider the following steps:\n"
    "1. Identify all outstanding requests.\n"
    "2. Determine which request you should prioritize picking up, aiming to minimize the total waiting time.\n"
    "  - You should pick up a request immediately if you are at the same location/one step away from the request.\n"
    "  - You can move to a node and pick up the request at that node in the same step.\n"
    "3. Evaluate which requests other agents are already closer to or actively moving toward, based on their known "
    "or expected actions. Adjust your action if necessary.\n"
    "After reasoning through these steps, provide your next action as a tuple in the format: (pickup: True or False, "
    "next position: a numeric value).\n"
    "Remember, your goal is to minimize total waiting time and avoid targeting requests that are better suited for "
    "other agents unless no alternative exists.";

const char* const kTreeOfThoughts =
    "Before deciding your next action, think through the following tree of possibilities:\n"
    "1. Identify Requests:\n"
    "  - Which requests are outstanding?\n"
    "  - Which are closest or most urgent?\n"
    "  - Are other agents closer or already handling them?\n"
    "-> Rank requests by priority based on proximity, urgency, and agent competition.\n"
    "2. Evaluate Actions:\n"
    "  - Action 1: Pick up a request if you're at/one step away. You can move to a node and pick up the request at "
    "that node in the same step.\n"
    "  - Action 2: Move toward a high-priority request.\n"
    "  - Action 3: Stay if no better option exists.\n"
    "-> Simulate the impact of each action on total waiting time.\n"
    "3. Decide:\n"
    "  - Which action minimizes waiting time?\n"
    "  - Does it avoid unnecessary conflicts with other agents?";

namespace {

std::string id_of(const RoadGraph& g, Vertex v) { return fmt::format("{}", value(g.id(v))); }

std::string route_text(const World& w, Vertex from, Vertex to) {
  const auto r = w.paths.route(from, to);
  if (!r) return "unreachable";
  std::vector<std::string> ids;
  for (const auto v : r->nodes) ids.push_back(id_of(w.graph, v));
  return fmt::format("[{}] (length: {})", fmt::join(ids, ", "), r->length());
}

std::string status_sentence(const FleetState& s, const RoadGraph& g, AgentIndex j, AgentIndex l) {
  const auto& a = s.agents[j];
  const auto who = j == l ? std::string("You are") : fmt::format("Taxi {} is", j);
  if (a.available()) return fmt::format("{} idle at location {}.", who, id_of(g, a.position));
  return fmt::format("{} serving a rider at location {}, heading to {} ({} steps remaining).", who,
                     id_of(g, a.position), id_of(g, *a.destination), a.remaining);
}

}  // namespace

ChatMessage build_system_prompt(const RoadGraph& g, const std::optional<std::string>& semantic_context) {
  std::vector<std::string> nodes;
  std::vector<std::string> roads;
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    const auto v = vertex(i);
    const auto c = g.coordinate(v);
    nodes.push_back(fmt::format("{}: ({:.7f}, {:.7f})", id_of(g, v), c.lon, c.lat));
    for (const auto n : g.out(v)) roads.push_back(fmt::format("{} to {}", id_of(g, v), id_of(g, n)));
  }
  std::string text = fmt::format(
      "You are a taxi driver in a multi-taxicab team on a map described by roads and intersections. Nodes "
      "(intersections) are listed by index with coordinates (longitude, latitude): {}\n\n"
      "Roads are expressed as connections between nodes in the form 'from node to node': {}\n\n",
      fmt::join(nodes, ", "), fmt::join(roads, ", "));
  if (semantic_context && !semantic_context->empty()) text += *semantic_context + "\n\n";
  text +=
      "Your goal is to minimize the waiting time of all riders. Make your decisions based on the following rules:\n\n"
      "1. A taxi can only pick up an active request if it is idle.\n\n"
      "2. If no request exists or you choose not to pick up, you must decide where to move next.";
  return {Role::system, std::move(text)};
}

std::string describe_action(const AgentAction& a, const RoadGraph& g) {
  return fmt::format("{}, go to {}.", a.pickup ? "pickup" : "do not pickup", id_of(g, a.next));
}

std::string render_reply(const AgentAction& a, const RoadGraph& g) {
  return fmt::format("My next action is: (pickup: {}, next position: {}).", a.pickup ? "True" : "False",
                     id_of(g, a.next));
}

ChatMessage build_user_prompt(const FleetState& s, const World& w, AgentIndex l, std::span<const AgentAction> fixed,
                              std::span<const AgentAction> suggested) {
  const auto& g = w.graph;
  const auto m = s.agents.size();
  std::string text = fmt::format("You are Taxi {}. You may only pick up a request if there is active request in the system.", l);
  for (std::size_t j = 0; j < m; ++j) text += " " + status_sentence(s, g, j, l);

  if (s.outstanding.empty()) {
    text += " Currently there are no outstanding requests in the system.\n";
  } else {
    text += " Currently there are outstanding requests in the system:\n";
    std::vector<AgentIndex> order{l};
    for (std::size_t j = 0; j < m; ++j) {
      if (j != l) order.push_back(j);
    }
    for (const auto& r : s.outstanding) {
      text += fmt::format("\npickup_location: {}\n", id_of(g, r.pickup));
      for (const auto j : order) {
        text += fmt::format("  Taxi {} shortest route: {}\n", j, route_text(w, s.agents[j].position, r.pickup));
      }
    }
  }

  std::vector<std::string> others;
  for (std::size_t j = 0; j < fixed.size() && j < l; ++j) {
    others.push_back(fmt::format("Known next action for taxi {}: {}", j, describe_action(fixed[j], g)));
  }
  for (std::size_t i = 0; i < suggested.size(); ++i) {
    const auto j = l + 1 + i;
    if (j >= m) break;
    others.push_back(fmt::format("Expected next action for taxi {}: {}", j, describe_action(suggested[i], g)));
  }
  if (!others.empty()) text += fmt::format("{}\n", fmt::join(others, " "));
  text += kAnswerFormat;
  return {Role::user, std::move(text)};
}

const std::vector<ChatMessage>& few_shot_exemplars() {
  static const std::vector<ChatMessage> exemplars{
      {Role::user,
       "You are Taxi 0. You are idle at location 65334120. Taxi 1 is idle at location 1580501206. Taxi 2 is idle at "
       "location 1580501206. Currently there are outstanding requests in the system:\n\n"
       "pickup_location: 65314158\n"
       "  Taxi 0 shortest route: [65334120, 65314158] (length: 1)\n"
       "  Taxi 1 shortest route: [1580501206, 65334120, 65314158] (length: 2)\n"
       "  Taxi 2 shortest route: [1580501206, 65334120, 65314158] (length: 2)\n"
       "Expected next action for taxi 1: go to 65334120. Expected next action for taxi 2: go to 65334120. You should "
       "prefer picking up requests closer to you. You should not follow other agents. Please provide your next "
       "action as a tuple in the format: (pickup: True or False, next position: a numeric value)."},
      {Role::assistant,
       "I'm the closest to the request at 65314158 among all taxis. I will pick it up. My next action is: (pickup: "
       "True, next position: 65314158)."},
      {Role::user,
       "You are Taxi 1. Taxi 0 is idle at location 65314156. You are idle at location 65317939. Taxi 2 is idle at "
       "location 65314156. Currently there are outstanding requests in the system:\n\n"
       "pickup_location: 1580501214\n"
       "  Taxi 1 shortest route: [65317939, 1580501214] (length: 1)\n"
       "  Taxi 0 shortest route: [65314156, 6988532585, 386885670, 1271001343, 6988532615, 2936165726, 65317939, "
       "1580501214] (length: 7)\n"
       "  Taxi 2 shortest route: [65314156, 6988532585, 386885670, 1271001343, 6988532615, 2936165726, 65317939, "
       "1580501214] (length: 7)\n"
       "Known next action for taxi 0: go to 65314156. Expected next action for taxi 2: go to 6988532585. Provide "
       "your next action as a tuple in the format: (pickup: True or False, next position: a numeric value)."},
      {Role::assistant,
       "I'm the closest to the request at 1580501214 among all taxis. I will pick it up. My next action is: (pickup: "
       "True, next position: 1580501214)."},
      {Role::user,
       "You are Taxi 1. Taxi 0 is idle at location 1308305528. You are idle at location 552853360. Taxi 2 is idle "
       "at location 65313133. Currently there are outstanding requests in the system:\n\n"
       "pickup_location: 6988532585\n"
       "  Taxi 0 shortest route: [1308305528, 6988532585] (length: 1)\n"
       "  Taxi 1 shortest route: [552853360, 1308305528, 6988532585] (length: 2)\n"
       "  Taxi 2 shortest route: [65313133, 65313138, 1578907668, 552853360, 1308305528, 6988532585] (length: 5)\n"
       "Known next action for taxi 0: go to 6988532585. Expected next action for taxi 2: go to 65313138. You should "
       "prefer picking up requests closer to you. You should not follow other agents. Please provide your next "
       "action as a tuple in the format: (pickup: True or False, next position: a numeric value)."},
      {Role::assistant,
       "Since there is only one request at 6988532585 and Taxi 0 is closer to it and trying to pick it up, I will "
       "not try to pick it up. My next action is: (pickup: False, next position: 552853360)."},
  };
  return exemplars;
}

std::string value_prompt(const std::string& user_prompt, const AgentAction& candidate, const RoadGraph& g) {
  return fmt::format(
      "{}\n\n{}\n\nCandidate action: (pickup: {}, next position: {}).\n"
      "Rate how well this candidate minimizes the total waiting time on a scale from 1 to 10. Answer as: Score: "
      "[numeric value].",
      user_prompt, kTreeOfThoughts, candidate.pickup ? "True" : "False", id_of(g, candidate.next));
}

std::string correction_prompt(const FleetState& s, const World& w, AgentIndex l, const std::string& problem) {
  const auto pos = s.agents[l].position;
  std::vector<std::string> valid{id_of(w.graph, pos)};
  for (const auto n : w.graph.out(pos)) valid.push_back(id_of(w.graph, n));
  return fmt::format("{} Valid next positions from your location {} are: {}. {}", problem, id_of(w.graph, pos),
                     fmt::join(valid, ", "), kAnswerFormat);
}

}  // namespace taxi::llm
