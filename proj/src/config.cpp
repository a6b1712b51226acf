#include "taxi/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace taxi {

double ExperimentConfig::rate(LoadLevel l) const {
  const auto it = load_rates.find(l);
  if (it == load_rates.end()) throw std::invalid_argument(fmt::format("no arrival rate for load '{}'", to_string(l)));
  return it->second;
}

void ExperimentConfig::validate() const {
  if (horizon < 2) throw std::invalid_argument("horizon must be at least 2");
  if (agents < 1) throw std::invalid_argument("agents must be at least 1");
  if (scenarios_per_load < 1) throw std::invalid_argument("scenarios_per_load must be at least 1");
  if (mc_samples < 1) throw std::invalid_argument("mc_samples must be at least 1");
  if (t_h < 1) throw std::invalid_argument("t_h must be at least 1");
  for (const auto& [level, r] : load_rates) {
    if (!(r > 0.0)) throw std::invalid_argument(fmt::format("arrival rate for '{}' must be positive", to_string(level)));
  }
}

namespace {

std::string resolve(const std::string& base_dir, const std::string& p) {
  if (p.empty()) return p;
  const std::filesystem::path path(p);
  return path.is_absolute() ? p : (std::filesystem::path(base_dir) / path).lexically_normal().string();
}

}  // namespace

ExperimentConfig parse_config(std::string_view document, const std::string& base_dir) {
  ExperimentConfig c;
  try {
    const auto j = nlohmann::json::parse(document);
    c.map_path = resolve(base_dir, j.value("map", std::string{}));
    c.map_id = j.value("map_id", c.map_id);
    c.horizon = j.value("horizon", c.horizon);
    c.agents = j.value("agents", c.agents);
    c.scenarios_per_load = j.value("scenarios_per_load", c.scenarios_per_load);
    c.threads = j.value("threads", c.threads);
    if (j.contains("load_rates")) {
      c.load_rates.clear();
      for (const auto& [k, v] : j.at("load_rates").items()) c.load_rates[parse_load_level(k)] = v.get<double>();
    }
    if (j.contains("rollout")) {
      const auto& r = j.at("rollout");
      c.mc_samples = r.value("mc_samples", c.mc_samples);
      c.t_h = r.value("t_h", c.t_h);
    }
    if (j.contains("llm")) {
      const auto& l = j.at("llm");
      auto& s = c.llm;
      s.endpoint = l.value("endpoint", s.endpoint);
      s.model = l.value("model", s.model);
      s.finetuned_model = l.value("finetuned_model", s.finetuned_model);
      s.token_env = l.value("token_env", s.token_env);
      s.timeout_seconds = l.value("timeout_seconds", s.timeout_seconds);
      s.retries = l.value("retries", s.retries);
      s.max_in_flight = l.value("max_in_flight", s.max_in_flight);
      s.mock_script = resolve(base_dir, l.value("mock_script", s.mock_script));
      s.temperature = l.value("temperature", s.temperature);
      s.sc_temperature = l.value("sc_temperature", s.sc_temperature);
      s.sc_samples = l.value("sc_samples", s.sc_samples);
      s.max_reprompts = l.value("max_reprompts", s.max_reprompts);
      s.semantic_context = l.value("semantic_context", s.semantic_context);
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(fmt::format("malformed config: {}", e.what()));
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument(fmt::format("cannot open config '{}'", path));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), std::filesystem::path(path).parent_path().string());
}

}  // namespace taxi
