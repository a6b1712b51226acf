#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <regex>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace taxi::llm {

enum class Role { system, user, assistant };

std::string_view to_string(Role r);

struct ChatMessage {
  Role role = Role::user;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct CompletionRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  /// Index of this draw among repeated samples of the same prompt.
  std::size_t sample_index = 0;
};

/// Raised when the endpoint cannot be reached or keeps failing after retries.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A chat-completion backend. Implementations must be safe for concurrent calls.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string complete(const CompletionRequest& req) = 0;
};

using ChatClientPtr = std::shared_ptr<ChatClient>;

/// Scripted client: the first rule whose pattern matches the last user message
/// answers with replies[sample_index % replies.size()]; otherwise `fallback`.
class MockChatClient final : public ChatClient {
 public:
  struct Rule {
    std::string pattern;
    std::vector<std::string> replies;
  };

  explicit MockChatClient(std::vector<Rule> rules, std::string fallback = "");

  /// Script document: {"rules": [{"match": regex, "replies": [..]}], "default": text}.
  static std::shared_ptr<MockChatClient> from_json(std::string_view document);
  static std::shared_ptr<MockChatClient> from_file(const std::string& path);

  std::string complete(const CompletionRequest& req) override;

  std::size_t calls() const { return calls_.load(); }
  std::vector<CompletionRequest> history() const;

 private:
  struct Compiled {
    std::regex re;
    std::vector<std::string> replies;
  };
  std::vector<Compiled> rules_;
  std::string fallback_;
  std::atomic<std::size_t> calls_{0};
  mutable std::mutex mutex_;
  std::vector<CompletionRequest> history_;
};

struct HttpClientOptions {
  /// Base address, e.g. "http://localhost:8000"; the request goes to
  /// <endpoint>/v1/chat/completions.
  std::string endpoint;
  std::string model;
  /// Name of the environment variable holding the bearer token; empty or
  /// unset sends no Authorization header.
  std::string token_env = "TAXISIM_LLM_TOKEN";
  std::chrono::seconds timeout{60};
  int retries = 3;
  int max_in_flight = 4;
};

/// Chat-completions client over HTTP(S).
class HttpChatClient final : public ChatClient {
 public:
  explicit HttpChatClient(HttpClientOptions opts);
  std::string complete(const CompletionRequest& req) override;

 private:
  HttpClientOptions opts_;
  std::string token_;
  std::counting_semaphore<1024> in_flight_;
};

/// JSON body of a chat-completions request.
std::string completion_body(const CompletionRequest& req, const std::string& model);
/// Text of the first choice of a chat-completions response.
std::string completion_text(std::string_view response);

}  // namespace taxi::llm
