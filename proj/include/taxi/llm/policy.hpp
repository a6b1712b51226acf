#pragma once

#include <iosfwd>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "taxi/llm/chat.hpp"
#include "taxi/llm/parse.hpp"
#include "taxi/policy.hpp"

namespace taxi::llm {

enum class Strategy { zero_shot, few_shot, cot, cot_sc, tot, zs_hc };

std::string_view to_string(Strategy s);
/// Accepts the names above and the dashed forms (zero-shot, cot-sc, zs-hc, ...).
Strategy parse_strategy(std::string_view text);

struct LlmConfig {
  std::string endpoint;
  std::string model_name;
  double temperature = 0.0;
  /// Temperature of the self-consistency samples.
  double sc_temperature = 0.7;
  std::size_t max_reprompts = 5;
  std::size_t sc_samples = 5;
  Strategy strategy = Strategy::zero_shot;
  std::optional<std::string> semantic_context;

  /// Throws ConfigError.
  void validate() const;
};

struct StrategyOutcome {
  AgentAction action;
  /// Every invalid answer seen while deciding, including recovered ones.
  std::vector<HallucinationReport> reports;
  /// 1 when the final answer was unusable and the stay fallback was executed.
  std::size_t hallucinations = 0;
  bool pickup_ignored = false;
  bool transport_failure = false;
  std::size_t calls = 0;
  std::string last_reply;
};

/// One agent's control from the language model under the configured strategy.
StrategyOutcome decide_with_strategy(const FleetState& s, const World& w, AgentIndex l,
                                     std::span<const AgentAction> fixed, std::span<const AgentAction> suggested,
                                     const LlmConfig& cfg, ChatClient& client, const ChatMessage& system_prompt);

/// Line-delimited log of every model decision.
class TranscriptLog {
 public:
  explicit TranscriptLog(std::ostream& out) : out_(&out) {}
  void record(Step step, AgentIndex agent, std::uint64_t messages_digest, const StrategyOutcome& o,
              const RoadGraph& g);

 private:
  std::ostream* out_;
  std::mutex mutex_;
};

struct LlmIncident {
  Step step = 0;
  AgentIndex agent = 0;
  std::string detail;
};

/// Language-model base policy. Agents decide in index order; each sees the
/// controls already chosen for earlier agents and stay defaults for later ones.
class LlmJointPolicy final : public Policy {
 public:
  LlmJointPolicy(LlmConfig cfg, ChatClientPtr client, const RoadGraph& g, std::string name = {});

  std::string name() const override { return name_; }
  Decision decide(const FleetState& s, const World& w, std::uint64_t seed) const override;
  AgentDecision decide_agent(const FleetState& s, const World& w, AgentIndex l, std::span<const AgentAction> fixed,
                             std::span<const AgentAction> suggested, std::uint64_t seed) const override;
  bool conditions_on_others() const override { return true; }

  void set_transcript(TranscriptLog* log) { transcript_ = log; }
  std::vector<LlmIncident> incidents() const;
  const LlmConfig& config() const { return cfg_; }

 private:
  LlmConfig cfg_;
  ChatClientPtr client_;
  ChatMessage system_;
  std::string name_;
  TranscriptLog* transcript_ = nullptr;
  mutable std::mutex mutex_;
  mutable std::vector<LlmIncident> incidents_;
};

}  // namespace taxi::llm
