#include "taxi/llm/chat.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

namespace taxi::llm {

std::string_view to_string(Role r) {
  switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

MockChatClient::MockChatClient(std::vector<Rule> rules, std::string fallback) : fallback_(std::move(fallback)) {
  for (auto& r : rules) {
    if (r.replies.empty()) throw ConfigError(fmt::format("mock rule '{}' has no replies", r.pattern));
    try {
      rules_.push_back({std::regex(r.pattern, std::regex::ECMAScript), std::move(r.replies)});
    } catch (const std::regex_error& e) {
      throw ConfigError(fmt::format("bad mock pattern '{}': {}", r.pattern, e.what()));
    }
  }
}

std::shared_ptr<MockChatClient> MockChatClient::from_json(std::string_view document) {
  try {
    const auto doc = nlohmann::json::parse(document);
    std::vector<Rule> rules;
    for (const auto& r : doc.value("rules", nlohmann::json::array())) {
      rules.push_back({r.at("match").get<std::string>(), r.at("replies").get<std::vector<std::string>>()});
    }
    return std::make_shared<MockChatClient>(std::move(rules), doc.value("default", std::string{}));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("malformed mock script: {}", e.what()));
  }
}

std::shared_ptr<MockChatClient> MockChatClient::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open mock script '{}'", path));
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

std::string MockChatClient::complete(const CompletionRequest& req) {
  ++calls_;
  {
    std::lock_guard lock(mutex_);
    history_.push_back(req);
  }
  std::string last_user;
  for (auto it = req.messages.rbegin(); it != req.messages.rend(); ++it) {
    if (it->role == Role::user) {
      last_user = it->content;
      break;
    }
  }
  for (const auto& r : rules_) {
    if (std::regex_search(last_user, r.re)) return r.replies[req.sample_index % r.replies.size()];
  }
  return fallback_;
}

std::vector<CompletionRequest> MockChatClient::history() const {
  std::lock_guard lock(mutex_);
  return history_;
}

std::string completion_body(const CompletionRequest& req, const std::string& model) {
  nlohmann::json body;
  body["model"] = model;
  body["temperature"] = req.temperature;
  body["n"] = 1;
  auto& msgs = body["messages"] = nlohmann::json::array();
  for (const auto& m : req.messages) msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  return body.dump();
}

std::string completion_text(std::string_view response) {
  try {
    const auto doc = nlohmann::json::parse(response);
    return doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(fmt::format("unexpected completion response: {}", e.what()));
  }
}

HttpChatClient::HttpChatClient(HttpClientOptions opts) : opts_(std::move(opts)), in_flight_(opts_.max_in_flight) {
  if (opts_.endpoint.empty()) throw ConfigError("LLM endpoint is not configured");
  if (opts_.model.empty()) throw ConfigError("LLM model name is not configured");
  if (opts_.max_in_flight < 1 || opts_.max_in_flight > 1024) throw ConfigError("max_in_flight must be in [1, 1024]");
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (opts_.endpoint.starts_with("https://")) throw ConfigError("this build has no TLS support; use an http endpoint");
#endif
  if (!opts_.token_env.empty()) {
    if (const char* t = std::getenv(opts_.token_env.c_str())) token_ = t;
  }
}

std::string HttpChatClient::complete(const CompletionRequest& req) {
  const auto body = completion_body(req, opts_.model);
  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{in_flight_};

  std::string last_error;
  for (int attempt = 0; attempt <= opts_.retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(250 << std::min(attempt, 5)));
    httplib::Client cli(opts_.endpoint);
    cli.set_connection_timeout(opts_.timeout);
    cli.set_read_timeout(opts_.timeout);
    cli.set_write_timeout(opts_.timeout);
    httplib::Headers headers;
    if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
    const auto res = cli.Post("/v1/chat/completions", headers, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) return completion_text(res->body);
    last_error = fmt::format("HTTP {}", res->status);
    if (res->status < 500 && res->status != 429) break;
  }
  throw TransportError(fmt::format("chat completion at {} failed: {}", opts_.endpoint, last_error));
}

}  // namespace taxi::llm
