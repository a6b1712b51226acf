#include "taxi/llm/policy.hpp"

#include <future>
#include <map>
#include <ostream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "taxi/llm/prompt.hpp"

namespace taxi::llm {

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::zero_shot: return "zero-shot";
    case Strategy::few_shot: return "few-shot";
    case Strategy::cot: return "cot";
    case Strategy::cot_sc: return "cot-sc";
    case Strategy::tot: return "tot";
    case Strategy::zs_hc: return "zs-hc";
  }
  return "zero-shot";
}

Strategy parse_strategy(std::string_view text) {
  std::string t(text);
  for (auto& c : t) c = c == '_' ? '-' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (const auto s : {Strategy::zero_shot, Strategy::few_shot, Strategy::cot, Strategy::cot_sc, Strategy::tot,
                       Strategy::zs_hc}) {
    if (t == to_string(s)) return s;
  }
  throw ConfigError(fmt::format("unknown prompting strategy '{}'", text));
}

void LlmConfig::validate() const {
  if (temperature < 0.0 || sc_temperature < 0.0) throw ConfigError("temperature must be nonnegative");
  if (sc_samples < 1) throw ConfigError("sc_samples must be at least 1");
}

namespace {

struct Ask {
  ChatClient& client;
  StrategyOutcome& out;

  std::optional<std::string> operator()(std::vector<ChatMessage> messages, double temperature, std::size_t index) {
    ++out.calls;
    try {
      return client.complete({std::move(messages), temperature, index});
    } catch (const TransportError&) {
      out.transport_failure = true;
      return std::nullopt;
    }
  }
};

/// Parsed and checked answer; `problem` is filled for the correction prompt.
struct Verdict {
  std::optional<AgentAction> action;
  std::optional<HallucinationReport> report;
  bool pickup_ignored = false;
  std::string problem;
};

Verdict judge(const FleetState& s, const World& w, AgentIndex l, const std::string& reply) {
  Verdict v;
  const auto parsed = parse_action(reply);
  if (!parsed) {
    v.report = HallucinationReport{HallucinationKind::parse_failure, std::nullopt, s.clock, l};
    v.problem = "Your answer did not contain an action tuple.";
    return v;
  }
  const auto check = check_feasible(s, w, l, *parsed);
  if (check.ok()) {
    v.action = check.executed;
    v.pickup_ignored = check.pickup_ignored;
    return v;
  }
  v.report = check.hallucination;
  const auto pos = value(w.graph.id(s.agents[l].position));
  v.problem = parsed->pickup
                  ? fmt::format("You cannot pick up at node {} this step: it is not adjacent to your location {}.",
                                value(parsed->next_position), pos)
                  : fmt::format(
                        "Node {} is neither a neighbor of your location {} nor on a shortest route to an outstanding "
                        "request.",
                        value(parsed->next_position), pos);
  return v;
}

void fall_back(StrategyOutcome& out, const FleetState& s, const World& w, AgentIndex l, bool hallucinated) {
  out.action = fallback_action(s, w, l);
  out.hallucinations = hallucinated ? 1 : 0;
}

void accept(StrategyOutcome& out, const Verdict& v) {
  out.action = *v.action;
  out.pickup_ignored = v.pickup_ignored;
}

}  // namespace

StrategyOutcome decide_with_strategy(const FleetState& s, const World& w, AgentIndex l,
                                     std::span<const AgentAction> fixed, std::span<const AgentAction> suggested,
                                     const LlmConfig& cfg, ChatClient& client, const ChatMessage& system_prompt) {
  StrategyOutcome out;
  if (!s.agents.at(l).available()) {
    out.action = fallback_action(s, w, l);
    return out;
  }
  auto user = build_user_prompt(s, w, l, fixed, suggested);
  std::vector<ChatMessage> messages{system_prompt};
  if (cfg.strategy == Strategy::few_shot) {
    const auto& ex = few_shot_exemplars();
    messages.insert(messages.end(), ex.begin(), ex.end());
    user.content = "Now, " + user.content;
  }
  if (cfg.strategy == Strategy::cot || cfg.strategy == Strategy::cot_sc) {
    user.content += "\n\n" + std::string(kChainOfThought);
  }
  Ask ask{client, out};

  switch (cfg.strategy) {
    case Strategy::zero_shot:
    case Strategy::few_shot:
    case Strategy::cot: {
      messages.push_back(user);
      const auto reply = ask(messages, cfg.temperature, 0);
      if (!reply) {
        fall_back(out, s, w, l, false);
        return out;
      }
      out.last_reply = *reply;
      const auto v = judge(s, w, l, *reply);
      if (v.report) {
        out.reports.push_back(*v.report);
        fall_back(out, s, w, l, true);
      } else {
        accept(out, v);
      }
      return out;
    }

    case Strategy::zs_hc: {
      messages.push_back(user);
      for (std::size_t attempt = 0;; ++attempt) {
        const auto reply = ask(messages, cfg.temperature, attempt);
        if (!reply) {
          fall_back(out, s, w, l, false);
          return out;
        }
        out.last_reply = *reply;
        const auto v = judge(s, w, l, *reply);
        if (!v.report) {
          accept(out, v);
          return out;
        }
        out.reports.push_back(*v.report);
        if (attempt == cfg.max_reprompts) {
          fall_back(out, s, w, l, true);
          return out;
        }
        messages.push_back({Role::assistant, *reply});
        messages.push_back({Role::user, correction_prompt(s, w, l, v.problem)});
      }
    }

    case Strategy::cot_sc: {
      messages.push_back(user);
      std::vector<std::future<std::optional<std::string>>> pending;
      std::vector<StrategyOutcome> scratch(cfg.sc_samples);
      for (std::size_t i = 0; i < cfg.sc_samples; ++i) {
        pending.push_back(std::async(std::launch::async, [&, i] {
          Ask sample{client, scratch[i]};
          return sample(messages, cfg.sc_temperature, i);
        }));
      }
      std::map<std::pair<Vertex, bool>, std::size_t> votes;
      std::map<std::pair<Vertex, bool>, bool> ignored;
      for (std::size_t i = 0; i < pending.size(); ++i) {
        const auto reply = pending[i].get();
        out.calls += scratch[i].calls;
        out.transport_failure |= scratch[i].transport_failure;
        if (!reply) continue;
        out.last_reply = *reply;
        const auto v = judge(s, w, l, *reply);
        if (v.report) {
          out.reports.push_back(*v.report);
          continue;
        }
        const auto key = std::pair{v.action->next, v.action->pickup};
        ++votes[key];
        ignored[key] = ignored[key] || v.pickup_ignored;
      }
      if (votes.empty()) {
        fall_back(out, s, w, l, !out.reports.empty());
        return out;
      }
      // Map order breaks ties toward the smallest next-hop id.
      auto best = votes.begin();
      for (auto it = votes.begin(); it != votes.end(); ++it) {
        if (it->second > best->second) best = it;
      }
      out.action = {best->first.first, best->first.second};
      out.pickup_ignored = ignored[best->first];
      return out;
    }

    case Strategy::tot: {
      const auto candidates = local_controls(s, w, l);
      std::vector<std::future<std::optional<std::string>>> pending;
      std::vector<StrategyOutcome> scratch(candidates.size());
      for (std::size_t c = 0; c < candidates.size(); ++c) {
        auto prompt = messages;
        prompt.push_back({Role::user, value_prompt(user.content, candidates[c], w.graph)});
        pending.push_back(std::async(std::launch::async, [&, c, prompt = std::move(prompt)] {
          Ask value{client, scratch[c]};
          return value(prompt, cfg.temperature, 0);
        }));
      }
      std::size_t best = 0;
      int best_score = -1;
      for (std::size_t c = 0; c < pending.size(); ++c) {
        const auto reply = pending[c].get();
        out.calls += scratch[c].calls;
        out.transport_failure |= scratch[c].transport_failure;
        const int score = reply ? parse_score(*reply) : 0;
        if (score > best_score) {
          best_score = score;
          best = c;
        }
      }
      if (out.transport_failure) {
        fall_back(out, s, w, l, false);
        return out;
      }
      out.action = candidates[best];
      return out;
    }
  }
  fall_back(out, s, w, l, false);
  return out;
}

namespace {

std::uint64_t messages_digest(const FleetState& s, const World& w, AgentIndex l, std::span<const AgentAction> fixed,
                              std::span<const AgentAction> suggested) {
  const auto text = build_user_prompt(s, w, l, fixed, suggested).content;
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

void TranscriptLog::record(Step step, AgentIndex agent, std::uint64_t messages_digest, const StrategyOutcome& o,
                           const RoadGraph& g) {
  nlohmann::ordered_json line;
  line["step"] = step;
  line["agent"] = agent;
  line["messages_digest"] = fmt::format("{:016x}", messages_digest);
  line["raw_reply"] = o.last_reply;
  line["action"] = {{"pickup", o.action.pickup}, {"next", value(g.id(o.action.next))}};
  line["hallucination"] = o.reports.empty() ? nlohmann::ordered_json(nullptr)
                                            : nlohmann::ordered_json(std::string(to_string(o.reports.back().kind)));
  line["fallback"] = o.hallucinations > 0 || o.transport_failure;
  std::lock_guard lock(mutex_);
  *out_ << line.dump() << '\n';
}

LlmJointPolicy::LlmJointPolicy(LlmConfig cfg, ChatClientPtr client, const RoadGraph& g, std::string name)
    : cfg_(std::move(cfg)), client_(std::move(client)), system_(build_system_prompt(g, cfg_.semantic_context)),
      name_(name.empty() ? "llm:" + std::string(to_string(cfg_.strategy)) : std::move(name)) {
  cfg_.validate();
  if (!client_) throw ConfigError("LLM policy needs a chat client");
}

AgentDecision LlmJointPolicy::decide_agent(const FleetState& s, const World& w, AgentIndex l,
                                           std::span<const AgentAction> fixed, std::span<const AgentAction> suggested,
                                           std::uint64_t) const {
  const auto o = decide_with_strategy(s, w, l, fixed, suggested, cfg_, *client_, system_);
  if (o.transport_failure || o.pickup_ignored) {
    std::lock_guard lock(mutex_);
    incidents_.push_back({s.clock, l, o.transport_failure ? "transport failure; stayed" : "pickup flag ignored"});
  }
  if (transcript_ && s.agents[l].available()) {
    transcript_->record(s.clock, l, messages_digest(s, w, l, fixed, suggested), o, w.graph);
  }
  return {o.action, o.hallucinations};
}

Decision LlmJointPolicy::decide(const FleetState& s, const World& w, std::uint64_t seed) const {
  const auto m = s.agents.size();
  JointAction defaults;
  for (std::size_t l = 0; l < m; ++l) defaults.push_back(fallback_action(s, w, l));
  Decision d;
  d.actions = defaults;
  for (std::size_t l = 0; l < m; ++l) {
    const std::span<const AgentAction> all(d.actions);
    const auto a = decide_agent(s, w, l, all.subspan(0, l), std::span<const AgentAction>(defaults).subspan(l + 1), seed);
    d.actions[l] = a.action;
    d.hallucinations += a.hallucinations;
  }
  return d;
}

std::vector<LlmIncident> LlmJointPolicy::incidents() const {
  std::lock_guard lock(mutex_);
  return incidents_;
}

}  // namespace taxi::llm
