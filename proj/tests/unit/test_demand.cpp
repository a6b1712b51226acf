#include <doctest.h>

#include <algorithm>

#include "support/fixtures.hpp"
#include "taxi/demand.hpp"

using namespace taxi;

TEST_CASE("arrival counts average rate times horizon") {
  const auto w = fixture::sf42();
  const auto model = DemandModel::uniform(w.graph, 0.1);
  std::size_t total = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    total += sample_scenario(model, w, 60, 3, seed).requests.size();
  }
  const double mean = static_cast<double>(total) / 1000.0;
  CHECK(mean >= 5.4);
  CHECK(mean <= 6.6);
}

TEST_CASE("scenarios are deterministic and well formed") {
  const auto w = fixture::sf42();
  const auto model = DemandModel::uniform(w.graph, 0.3);
  const auto a = sample_scenario(model, w, 60, 3, 11, LoadLevel::high, "sf42");
  const auto b = sample_scenario(model, w, 60, 3, 11, LoadLevel::high, "sf42");
  CHECK(a == b);
  CHECK(a.initial_positions.size() == 3);
  CHECK_FALSE(a == sample_scenario(model, w, 60, 3, 12, LoadLevel::high, "sf42"));
  for (std::size_t i = 0; i < a.requests.size(); ++i) {
    const auto& r = a.requests[i];
    CHECK(r.pickup != r.dropoff);
    CHECK(w.paths.reachable(r.pickup, r.dropoff));
    CHECK(r.entry_time >= 0);
    CHECK(r.entry_time < 60);
    if (i > 0) CHECK(a.requests[i - 1].entry_time <= r.entry_time);
  }
}

TEST_CASE("certainty-equivalent futures freeze count and locations") {
  const auto w = fixture::sf42();
  const auto model = DemandModel::uniform(w.graph, 0.2);
  const auto sampler = ce_future_sampler(model, w, 10, 99);
  CHECK(sampler.count() == 2);
  auto sorted = [](std::vector<Vertex> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  for (std::uint64_t i = 0; i < 50; ++i) {
    const auto f = sampler.sample(i);
    REQUIRE(f.size() == 2);
    std::vector<Vertex> p, d;
    for (const auto& r : f) {
      CHECK(r.offset >= 1);
      CHECK(r.offset <= 10);
      p.push_back(r.pickup);
      d.push_back(r.dropoff);
    }
    CHECK(sorted(p) == sorted(sampler.pickups()));
    CHECK(sorted(d) == sorted(sampler.dropoffs()));
    CHECK(std::is_sorted(f.begin(), f.end(), [](auto& x, auto& y) { return x.offset < y.offset; }));
  }
  CHECK(sampler.sample(3) == ce_future_sampler(model, w, 10, 99).sample(3));
  CHECK(ce_future_sampler(DemandModel::uniform(w.graph, 0.3), w, 10, 1).count() == 3);
}

TEST_CASE("scenario files round-trip") {
  const auto w = fixture::sf42();
  const auto sc = sample_scenario(DemandModel::uniform(w.graph, 0.15), w, 60, 3, 5, LoadLevel::medium, "sf42");
  const auto text = save_scenario(sc, w.graph);
  const auto back = load_scenario(text, w);
  CHECK(back == sc);
  CHECK(save_scenario(back, w.graph) == text);
}

TEST_CASE("scenario validation") {
  const auto w = fixture::line3();
  const std::string head = R"({"map_id":"line","horizon":5,"load_level":"low","seed":0,"initial_positions":[1],"requests":[)";
  const auto doc = [&](const std::string& reqs) { return head + reqs + "]}"; };
  CHECK_NOTHROW(load_scenario(doc(R"({"req_id":0,"pickup":1,"dropoff":3,"entry_time":0})"), w));
  CHECK_THROWS_AS(load_scenario(doc(R"({"req_id":0,"pickup":1,"dropoff":3,"entry_time":5})"), w), ScenarioError);
  CHECK_THROWS_AS(load_scenario(doc(R"({"req_id":0,"pickup":3,"dropoff":1,"entry_time":0})"), w), ScenarioError);
  CHECK_THROWS_AS(load_scenario(doc(R"({"req_id":0,"pickup":1,"dropoff":1,"entry_time":0})"), w), ScenarioError);
  CHECK_THROWS_AS(load_scenario(doc(R"({"req_id":0,"pickup":9,"dropoff":1,"entry_time":0})"), w), ScenarioError);
  CHECK_THROWS_AS(load_scenario(doc(R"({"req_id":0,"pickup":1,"dropoff":2,"entry_time":2},)"
                                    R"({"req_id":1,"pickup":1,"dropoff":2,"entry_time":1})"),
                                w),
                  ScenarioError);
  CHECK_THROWS_AS(load_scenario(doc(R"({"req_id":0,"pickup":1,"dropoff":2,"entry_time":1},)"
                                    R"({"req_id":0,"pickup":1,"dropoff":2,"entry_time":2})"),
                                w),
                  ScenarioError);
}

TEST_CASE("unsatisfiable demand is reported") {
  // Pickups only at the sink of a one-way line: no reachable dropoff.
  const auto w = fixture::line3();
  DemandModel m = DemandModel::uniform(w.graph, 5.0);
  m.pickup_weights = {0.0, 0.0, 1.0};
  CHECK_THROWS_AS(sample_scenario(m, w, 10, 1, 0), DemandError);
}

TEST_CASE("load levels parse") {
  CHECK(parse_load_level("high") == LoadLevel::high);
  CHECK(to_string(LoadLevel::medium) == "medium");
  CHECK_THROWS(parse_load_level("extreme"));
}
