#include "taxi/llm/parse.hpp"

#include <cctype>
#include <regex>

namespace taxi::llm {

namespace {

const std::regex& tuple_pattern() {
  static const std::regex re(
      R"(\(\s*[*_$\s]*pickup[*_$\s]*:[*_$\s]*(true|false)[*_$\s]*,[*_$\s]*next[\s_]*position[*_$\s]*:)"
      R"([*_$\[\s]*(\d+)[*_$\]\s]*\))",
      std::regex::ECMAScript | std::regex::icase);
  return re;
}

}  // namespace

std::optional<ParsedAction> parse_action(std::string_view text) {
  const std::string s(text);
  std::smatch last;
  bool found = false;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), tuple_pattern()); it != std::sregex_iterator(); ++it) {
    last = *it;
    found = true;
  }
  if (!found) return std::nullopt;
  ParsedAction a;
  auto flag = last[1].str();
  a.pickup = flag[0] == 't' || flag[0] == 'T';
  try {
    a.next_position = NodeId{std::stoull(last[2].str())};
  } catch (const std::out_of_range&) {
    return std::nullopt;
  }
  a.raw_text = s;
  a.reasoning = s.substr(0, static_cast<std::size_t>(last.position(0)));
  while (!a.reasoning.empty() && std::isspace(static_cast<unsigned char>(a.reasoning.back()))) a.reasoning.pop_back();
  return a;
}

int parse_score(std::string_view text) {
  static const std::regex labelled(R"(score[*_\s]*[:=]?[*_\s]*(\d+))", std::regex::ECMAScript | std::regex::icase);
  static const std::regex bare(R"(^\s*(\d+)\s*$)");
  const std::string s(text);
  std::smatch m;
  std::string digits;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), labelled); it != std::sregex_iterator(); ++it) {
    digits = (*it)[1].str();
  }
  if (digits.empty() && std::regex_match(s, m, bare)) digits = m[1].str();
  if (digits.empty() || digits.size() > 2) return 0;
  const int v = std::stoi(digits);
  return v >= 1 && v <= 10 ? v : 0;
}

std::string_view to_string(HallucinationKind k) {
  return k == HallucinationKind::spatial ? "spatial" : "parse_failure";
}

FeasibilityCheck check_feasible(const FleetState& s, const World& w, AgentIndex l, const ParsedAction& a) {
  FeasibilityCheck out;
  const auto spatial = [&] {
    out.hallucination = HallucinationReport{HallucinationKind::spatial, a.next_position, s.clock, l};
    out.executed = fallback_action(s, w, l);
    return out;
  };
  const auto& agent = s.agents.at(l);
  const auto target = w.graph.find(a.next_position);
  if (!target) return spatial();
  const auto pos = agent.position;

  if (!agent.available()) {
    // Occupied taxis have a single control; any other answer is off-route.
    const auto forced = fallback_action(s, w, l);
    if (*target != forced.next) return spatial();
    out.executed = forced;
    out.pickup_ignored = a.pickup;
    return out;
  }

  if (*target == pos || w.graph.has_edge(pos, *target)) {
    const bool can_pick = has_request_at(s, *target);
    out.executed = {*target, a.pickup && can_pick};
    out.pickup_ignored = a.pickup && !can_pick;
    return out;
  }
  if (a.pickup) return spatial();  // a pickup this step needs the node to be reachable in one hop

  const auto d_target = w.paths.hops(pos, *target);
  if (d_target == kUnreachable) return spatial();
  for (const auto& r : s.outstanding) {
    const auto d_req = w.paths.hops(pos, r.pickup);
    const auto d_rest = w.paths.hops(*target, r.pickup);
    if (d_req == kUnreachable || d_rest == kUnreachable) continue;
    if (d_target + d_rest == d_req) {
      out.executed = {w.paths.next_hop(pos, *target), false};
      return out;
    }
  }
  return spatial();
}

}  // namespace taxi::llm
