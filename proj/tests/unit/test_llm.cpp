#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "support/fixtures.hpp"
#include "taxi/llm/chat.hpp"
#include "taxi/llm/parse.hpp"
#include "taxi/llm/policy.hpp"
#include "taxi/llm/prompt.hpp"
#include "taxi/rng.hpp"
#include "taxi/simulate.hpp"

using namespace taxi;
using namespace taxi::llm;
using fixture::v;

namespace {

std::string reply_of(const std::string& script) {
  const auto doc = nlohmann::json::parse(std::ifstream(fixture::data_path("mock/" + script + ".json")));
  return doc["rules"][0]["replies"][0].get<std::string>();
}

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = text.find(needle); p != std::string::npos; p = text.find(needle, p + needle.size())) ++n;
  return n;
}

LlmConfig with(Strategy s) {
  LlmConfig cfg;
  cfg.strategy = s;
  return cfg;
}

std::shared_ptr<MockChatClient> always(std::vector<std::string> replies) {
  return std::make_shared<MockChatClient>(std::vector<MockChatClient::Rule>{{".", std::move(replies)}});
}

/// Two requests where the second is nearer, current position 65328690.
FleetState two_request_state(const World& w) {
  auto s = fixture::state(w, {65328690, 65334120, 65306810});
  s.outstanding.push_back(fixture::request(w, 0, 65343958, 65328690));
  s.outstanding.push_back(fixture::request(w, 1, 65303546, 65328690));
  return s;
}

class FailingClient final : public ChatClient {
 public:
  std::string complete(const CompletionRequest&) override { throw TransportError("unreachable"); }
};

}  // namespace

TEST_CASE("parse extracts the last action tuple") {
  const auto a = parse_action(reply_of("idle_fleet"));
  REQUIRE(a.has_value());
  CHECK_FALSE(a->pickup);
  CHECK(a->next_position == NodeId{65306810});
  CHECK(a->reasoning.find("closest idle taxi") != std::string::npos);

  const auto c = parse_action(reply_of("two_requests"));
  REQUIRE(c.has_value());
  CHECK(c->pickup);
  CHECK(c->next_position == NodeId{65343958});

  CHECK_FALSE(parse_action("I cannot decide.").has_value());
  const auto styled = parse_action("first (pickup: false, next position: 1) then **(Pickup: TRUE, next_position: [42])**");
  REQUIRE(styled.has_value());
  CHECK(styled->pickup);
  CHECK(styled->next_position == NodeId{42});
  CHECK(parse_action("(pickup: *True*, next position: *7*)")->next_position == NodeId{7});
}

TEST_CASE("rendered actions parse back") {
  const auto w = fixture::sf42();
  for (std::size_t i = 0; i < w.graph.node_count(); ++i) {
    for (const bool pickup : {false, true}) {
      const AgentAction a{vertex(i), pickup};
      for (const auto& text : {render_action(a, w.graph), render_reply(a, w.graph)}) {
        const auto p = parse_action(text);
        REQUIRE(p.has_value());
        CHECK(p->pickup == pickup);
        CHECK(p->next_position == w.graph.id(vertex(i)));
      }
    }
  }
}

TEST_CASE("scores") {
  CHECK(parse_score("Score: 7") == 7);
  CHECK(parse_score("I'd say **score: 10** overall") == 10);
  CHECK(parse_score(" 3 ") == 3);
  CHECK(parse_score("Score: 11") == 0);
  CHECK(parse_score("great move") == 0);
}

TEST_CASE("system prompt lists the whole map") {
  const auto w = fixture::sf42();
  const auto p = build_system_prompt(w.graph);
  CHECK(p.role == Role::system);
  CHECK(count(p.content, ": (-122.") == 42);
  const auto roads = p.content.substr(p.content.find("'from node to node':"));
  CHECK(count(roads.substr(0, roads.find("\n")), " to ") == 125 + 1);
  CHECK(p.content.find("65293741: (-122.4097034, 37.7817636)") != std::string::npos);
  CHECK(p.content.find("65293741 to 65293743, 65293741 to 65318282, 65293741 to 1723738829") != std::string::npos);
  CHECK(p.content.find("rain") == std::string::npos);

  const auto rainy = build_system_prompt(w.graph, std::string("Current weather: heavy rain with temperature: 11.8 C."));
  const auto at = rainy.content.find("heavy rain");
  REQUIRE(at != std::string::npos);
  CHECK(at < rainy.content.find("1. A taxi can only pick up"));
}

TEST_CASE("user prompt describes fleet, routes and other taxis") {
  const auto w = fixture::sf42();
  auto idle = fixture::state(w, {6925582021, 1578907668, 65306810});
  const auto p = build_user_prompt(idle, w, 0, {}, {});
  CHECK(p.content.starts_with("You are Taxi 0."));
  CHECK(p.content.find("You are idle at location 6925582021.") != std::string::npos);
  CHECK(p.content.find("Taxi 2 is idle at location 65306810.") != std::string::npos);
  CHECK(p.content.ends_with(kAnswerFormat));

  auto s = fixture::state(w, {65334120, 1580501206, 1580501206});
  s.outstanding.push_back(fixture::request(w, 0, 65314158, 65334120));
  const std::vector<AgentAction> fixed{{v(w, 65334120), false}};
  const std::vector<AgentAction> suggested{{v(w, 65334120), false}};
  const auto q = build_user_prompt(s, w, 1, fixed, suggested);
  CHECK(q.content.find("pickup_location: 65314158") != std::string::npos);
  CHECK(q.content.find("Taxi 0 shortest route: [65334120, 65314158] (length: 1)") != std::string::npos);
  CHECK(q.content.find("Taxi 1 shortest route: [1580501206, 65334120, 65314158] (length: 2)") != std::string::npos);
  CHECK(count(q.content, "Known next action") == 1);
  CHECK(count(q.content, "Expected next action") == 1);
  CHECK(q.content.find("Expected next action for taxi 2: do not pickup, go to 65334120.") != std::string::npos);
  // Own route is listed first.
  CHECK(q.content.find("Taxi 1 shortest route") < q.content.find("Taxi 0 shortest route"));
}

TEST_CASE("unreachable requests stay in the prompt") {
  const auto w = fixture::line3();
  auto s = fixture::state(w, {3});
  s.outstanding.push_back(fixture::request(w, 0, 1, 2));
  CHECK(build_user_prompt(s, w, 0, {}, {}).content.find("Taxi 0 shortest route: unreachable") != std::string::npos);
}

TEST_CASE("feasibility of parsed answers") {
  const auto w = fixture::sf42();
  const auto s = two_request_state(w);
  REQUIRE(w.paths.hops(v(w, 65328690), v(w, 65343958)) == 8);
  REQUIRE(w.paths.hops(v(w, 65328690), v(w, 65303546)) == 7);

  const auto c = check_feasible(s, w, 0, *parse_action(reply_of("two_requests")));
  REQUIRE_FALSE(c.ok());
  CHECK(c.hallucination->kind == HallucinationKind::spatial);
  CHECK(c.hallucination->attempted == NodeId{65343958});
  CHECK(c.executed == AgentAction{v(w, 65328690), false});

  ParsedAction stay{false, NodeId{65328690}, "", ""};
  CHECK(check_feasible(s, w, 0, stay).ok());

  // Three hops along the displayed route to the second request.
  ParsedAction ahead{false, NodeId{552853360}, "", ""};
  const auto on_route = check_feasible(s, w, 0, ahead);
  REQUIRE(on_route.ok());
  CHECK(on_route.executed == AgentAction{v(w, 2936165726), false});

  ParsedAction unknown{false, NodeId{123}, "", ""};
  CHECK_FALSE(check_feasible(s, w, 0, unknown).ok());

  ParsedAction bogus_pickup{true, NodeId{2936165726}, "", ""};
  const auto ignored = check_feasible(s, w, 0, bogus_pickup);
  REQUIRE(ignored.ok());
  CHECK(ignored.pickup_ignored);
  CHECK(ignored.executed == AgentAction{v(w, 2936165726), false});
}

TEST_CASE("local controls are never flagged") {
  const auto w = fixture::sf42();
  const auto sc = sample_scenario(DemandModel::uniform(w.graph, 0.3), w, 60, 3, 6);
  const auto r = simulate(sc, w, GreedyPolicy{}, 6);
  for (const auto& e : r.trace) {
    for (std::size_t l = 0; l < e.state.agents.size(); ++l) {
      for (const auto& u : local_controls(e.state, w, l)) {
        const auto c = check_feasible(e.state, w, l, ParsedAction{u.pickup, w.graph.id(u.next), "", ""});
        CHECK(c.ok());
        CHECK(c.executed == u);
      }
    }
  }
}

TEST_CASE("zero-shot answer from the idle-fleet transcript") {
  const auto w = fixture::sf42();
  const auto s = fixture::state(w, {6925582021, 1578907668, 65306810});
  const auto client = MockChatClient::from_file(fixture::data_path("mock/idle_fleet.json"));
  const auto sys = build_system_prompt(w.graph);
  const std::vector<AgentAction> later{{v(w, 1578907668), false}, {v(w, 65306810), false}};
  const auto o = decide_with_strategy(s, w, 0, {}, later, with(Strategy::zero_shot), *client, sys);
  CHECK(o.action == AgentAction{v(w, 65306810), false});
  CHECK(o.hallucinations == 0);
  CHECK(o.reports.empty());
  CHECK(o.calls == 1);
}

TEST_CASE("two-request transcript falls back and counts one hallucination") {
  const auto w = fixture::sf42();
  const auto s = two_request_state(w);
  const auto client = MockChatClient::from_file(fixture::data_path("mock/two_requests.json"));
  const auto o = decide_with_strategy(s, w, 0, {}, {}, with(Strategy::zero_shot), *client, build_system_prompt(w.graph));
  CHECK(o.action == AgentAction{v(w, 65328690), false});
  CHECK(o.hallucinations == 1);
  REQUIRE(o.reports.size() == 1);
  CHECK(o.reports[0].kind == HallucinationKind::spatial);
}

TEST_CASE("worked examples parse to their printed tuples") {
  const auto client = MockChatClient::from_file(fixture::data_path("mock/worked_examples.json"));
  const std::vector<std::pair<bool, std::uint64_t>> expected{{true, 65314158}, {true, 1580501214}, {false, 552853360}};
  const auto& ex = few_shot_exemplars();
  REQUIRE(ex.size() == 6);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto reply = client->complete({{ex[2 * i]}, 0.0, 0});
    CHECK(reply == ex[2 * i + 1].content);
    const auto a = parse_action(reply);
    REQUIRE(a.has_value());
    CHECK(a->pickup == expected[i].first);
    CHECK(a->next_position == NodeId{expected[i].second});
  }
}

TEST_CASE("few-shot puts the exemplars before the live turn") {
  const auto w = fixture::sf42();
  auto s = fixture::state(w, {65334120, 1580501206, 1580501206});
  s.outstanding.push_back(fixture::request(w, 0, 65314158, 65334120));
  const auto client = always({"My next action is: (pickup: True, next position: 65314158)."});
  const auto o = decide_with_strategy(s, w, 0, {}, {}, with(Strategy::few_shot), *client, build_system_prompt(w.graph));
  CHECK(o.action == AgentAction{v(w, 65314158), true});
  const auto h = client->history();
  REQUIRE(h.size() == 1);
  REQUIRE(h[0].messages.size() == 8);
  CHECK(h[0].messages[0].role == Role::system);
  CHECK(h[0].messages[1] == few_shot_exemplars()[0]);
  CHECK(h[0].messages[7].content.starts_with("Now, You are Taxi 0."));
}

TEST_CASE("chain of thought appends the step list") {
  const auto w = fixture::sf42();
  const auto s = fixture::state(w, {65334120});
  const auto client = always({"(pickup: False, next position: 65334120)"});
  decide_with_strategy(s, w, 0, {}, {}, with(Strategy::cot), *client, build_system_prompt(w.graph));
  CHECK(client->history()[0].messages.back().content.ends_with(kChainOfThought));
}

TEST_CASE("self-consistency takes the majority answer") {
  const auto w = fixture::sf42();
  const auto s = fixture::state(w, {65293741});
  const std::string a = "(pickup: False, next position: 65318282)";
  const std::string b = "(pickup: False, next position: 65293743)";
  auto cfg = with(Strategy::cot_sc);
  cfg.sc_samples = 5;
  const auto client = always({a, a, a, b, b});
  const auto o = decide_with_strategy(s, w, 0, {}, {}, cfg, *client, build_system_prompt(w.graph));
  CHECK(o.action == AgentAction{v(w, 65318282), false});
  CHECK(o.calls == 5);
  for (const auto& req : client->history()) CHECK(req.temperature == doctest::Approx(0.7));

  // 2-2 split with one invalid answer: smallest node id wins.
  const auto tied = always({a, b, a, b, "(pickup: False, next position: 99)"});
  cfg.sc_samples = 5;
  const auto t = decide_with_strategy(s, w, 0, {}, {}, cfg, *tied, build_system_prompt(w.graph));
  CHECK(t.action == AgentAction{v(w, 65293743), false});
  CHECK(t.hallucinations == 0);
  CHECK(t.reports.size() == 1);
}

TEST_CASE("tree of thoughts scores every local control") {
  const auto w = fixture::sf42();
  const auto s = fixture::state(w, {65293741});
  const auto client = std::make_shared<MockChatClient>(std::vector<MockChatClient::Rule>{
      {R"(Candidate action: \(pickup: False, next position: 1723738829\))", {"Score: 9"}},
      {R"(Candidate action: \(pickup: False, next position: 65318282\))", {"Score: 9"}},
      {R"(Candidate action: \(pickup: False, next position: 65293741\))", {"Score: 4"}}},
      "no idea");
  const auto o = decide_with_strategy(s, w, 0, {}, {}, with(Strategy::tot), *client, build_system_prompt(w.graph));
  // Controls: stay, 65293743, 65318282, 1723738829; first of the tied best wins.
  CHECK(o.calls == 4);
  CHECK(o.action == AgentAction{v(w, 65318282), false});
  CHECK(o.hallucinations == 0);
}

TEST_CASE("hallucination correction gives up after the reprompt budget") {
  const auto w = fixture::sf42();
  const auto s = fixture::state(w, {65293741});
  const auto client = always({"(pickup: False, next position: 65343958)"});
  const auto o = decide_with_strategy(s, w, 0, {}, {}, with(Strategy::zs_hc), *client, build_system_prompt(w.graph));
  CHECK(client->calls() == 6);
  CHECK(o.calls == 6);
  CHECK(o.reports.size() == 6);
  CHECK(o.hallucinations == 1);
  CHECK(o.action == AgentAction{v(w, 65293741), false});
  const auto last = client->history().back().messages;
  CHECK(last.back().role == Role::user);
  CHECK(last.back().content.find("Node 65343958 is neither a neighbor") != std::string::npos);
  CHECK(last.back().content.find("65293741, 65293743, 65318282, 1723738829") != std::string::npos);
}

TEST_CASE("hallucination correction accepts a repaired answer") {
  const auto w = fixture::sf42();
  const auto s = fixture::state(w, {65293741});
  const auto client = always({"no tuple here", "(pickup: False, next position: 65293743)"});
  const auto o = decide_with_strategy(s, w, 0, {}, {}, with(Strategy::zs_hc), *client, build_system_prompt(w.graph));
  CHECK(o.calls == 2);
  CHECK(o.hallucinations == 0);
  REQUIRE(o.reports.size() == 1);
  CHECK(o.reports[0].kind == HallucinationKind::parse_failure);
  CHECK(o.action == AgentAction{v(w, 65293743), false});
}

TEST_CASE("joint policy asks each idle taxi in turn") {
  const auto w = fixture::sf42();
  const auto s = fixture::state(w, {65293741, 65334120, 65306810});
  const auto client = always({"(pickup: False, next position: 65293743)"});
  LlmJointPolicy policy(with(Strategy::zero_shot), client, w.graph);
  CHECK(policy.name() == "llm:zero-shot");
  CHECK(policy.conditions_on_others());
  const auto d = policy.decide(s, w, 0);
  CHECK(client->calls() == 3);
  CHECK(d.actions[0] == AgentAction{v(w, 65293743), false});
  CHECK(d.actions[1] == AgentAction{v(w, 65334120), false});
  CHECK(d.hallucinations == 2);
  const auto h = client->history();
  CHECK(h[1].messages.back().content.find("Known next action for taxi 0: do not pickup, go to 65293743.") !=
        std::string::npos);
  CHECK(h[1].messages.back().content.find("Expected next action for taxi 2: do not pickup, go to 65306810.") !=
        std::string::npos);

  std::stringstream log;
  TranscriptLog transcript(log);
  policy.set_transcript(&transcript);
  policy.decide(s, w, 0);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(log, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("messages_digest"));
    ++lines;
  }
  CHECK(lines == 3);
}

TEST_CASE("transport failure stays without counting a hallucination") {
  const auto w = fixture::sf42();
  const auto s = fixture::state(w, {65293741});
  LlmJointPolicy policy(with(Strategy::zero_shot), std::make_shared<FailingClient>(), w.graph);
  const auto d = policy.decide(s, w, 0);
  CHECK(d.actions[0] == AgentAction{v(w, 65293741), false});
  CHECK(d.hallucinations == 0);
  REQUIRE(policy.incidents().size() == 1);
}

TEST_CASE("executed answers are always local controls") {
  const auto w = fixture::sf42();
  const auto sc = sample_scenario(DemandModel::uniform(w.graph, 0.3), w, 20, 3, 9);
  std::vector<std::string> replies;
  Rng rng(1);
  for (int i = 0; i < 40; ++i) {
    const auto node = w.graph.id(vertex(rng.below(w.graph.node_count())));
    replies.push_back(fmt::format("(pickup: {}, next position: {})", rng.below(2) ? "True" : "False", value(node)));
  }
  replies.push_back("gibberish");
  for (const auto s : {Strategy::zero_shot, Strategy::zs_hc, Strategy::cot_sc}) {
    auto cfg = with(s);
    cfg.sc_samples = 3;
    LlmJointPolicy policy(cfg, always(replies), w.graph);
    const auto r = simulate(sc, w, policy, 0);
    for (const auto& e : r.trace) {
      for (std::size_t l = 0; l < e.action.size(); ++l) CHECK(is_feasible(e.state, w, l, e.action[l]));
    }
  }
}

TEST_CASE("strategy names and config validation") {
  CHECK(parse_strategy("cot_sc") == Strategy::cot_sc);
  CHECK(parse_strategy("ZS-HC") == Strategy::zs_hc);
  CHECK_THROWS_AS(parse_strategy("beam"), ConfigError);
  auto cfg = with(Strategy::cot_sc);
  cfg.sc_samples = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(HttpChatClient(HttpClientOptions{}), ConfigError);
  CHECK_THROWS_AS(MockChatClient::from_json("{\"rules\":[{\"match\":\"(\",\"replies\":[\"x\"]}]}"), ConfigError);
}

TEST_CASE("chat-completions wire format") {
  const auto body = nlohmann::json::parse(
      completion_body({{{Role::system, "sys"}, {Role::user, "hi"}}, 0.7, 0}, "m"));
  CHECK(body["model"] == "m");
  CHECK(body["messages"][1]["role"] == "user");
  CHECK(body["temperature"].get<double>() == doctest::Approx(0.7));
  CHECK(completion_text(R"({"choices":[{"message":{"role":"assistant","content":"ok"}}]})") == "ok");
  CHECK_THROWS_AS(completion_text("{}"), TransportError);
}

TEST_CASE("HTTP client against a local endpoint") {
  httplib::Server server;
  std::string seen_auth;
  int failures_left = 1;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    if (failures_left-- > 0) {
      res.status = 503;
      return;
    }
    seen_auth = req.get_header_value("Authorization");
    const auto body = nlohmann::json::parse(req.body);
    nlohmann::json out{{"choices", {{{"message", {{"role", "assistant"}, {"content", body["messages"][0]["content"]}}}}}}};
    res.set_content(out.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ::setenv("TAXISIM_TEST_TOKEN", "secret", 1);
  HttpClientOptions opts;
  opts.endpoint = fmt::format("http://127.0.0.1:{}", port);
  opts.model = "mock";
  opts.token_env = "TAXISIM_TEST_TOKEN";
  opts.timeout = std::chrono::seconds(5);
  opts.retries = 2;
  HttpChatClient client(opts);
  CHECK(client.complete({{{Role::user, "echo me"}}, 0.0, 0}) == "echo me");
  CHECK(seen_auth == "Bearer secret");

  server.stop();
  t.join();
  opts.retries = 0;
  HttpChatClient down(opts);
  CHECK_THROWS_AS(down.complete({{{Role::user, "x"}}, 0.0, 0}), TransportError);
}
