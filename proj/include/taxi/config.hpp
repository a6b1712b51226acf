#pragma once

#include <map>
#include <string>
#include <string_view>

#include "taxi/demand.hpp"
#include "taxi/llm/chat.hpp"
#include "taxi/llm/policy.hpp"

namespace taxi {

struct LlmSettings {
  std::string endpoint;
  std::string model;
  /// Model served for the "finetuned-llm" policy.
  std::string finetuned_model;
  std::string token_env = "TAXISIM_LLM_TOKEN";
  int timeout_seconds = 60;
  int retries = 3;
  int max_in_flight = 4;
  /// Scripted replies instead of a live endpoint (path relative to the config).
  std::string mock_script;
  double temperature = 0.0;
  double sc_temperature = 0.7;
  std::size_t sc_samples = 5;
  std::size_t max_reprompts = 5;
  std::string semantic_context;
};

struct ExperimentConfig {
  std::string map_path;
  std::string map_id = "sf42";
  Step horizon = 60;
  std::size_t agents = 3;
  std::size_t scenarios_per_load = 20;
  std::map<LoadLevel, double> load_rates{{LoadLevel::low, 0.05}, {LoadLevel::medium, 0.15}, {LoadLevel::high, 0.30}};
  std::size_t mc_samples = 200;
  Step t_h = 10;
  /// Worker threads for benchmark cells; 0 leaves it to the runtime.
  int threads = 0;
  LlmSettings llm;

  double rate(LoadLevel l) const;
  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

/// Reads a config document; missing keys keep their defaults. Relative paths
/// are resolved against `base_dir`.
ExperimentConfig parse_config(std::string_view document, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

}  // namespace taxi
