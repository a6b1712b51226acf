#include "taxi/demand.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "taxi/rng.hpp"

namespace taxi {

std::string_view to_string(LoadLevel level) {
  switch (level) {
    case LoadLevel::low: return "low";
    case LoadLevel::medium: return "medium";
    case LoadLevel::high: return "high";
  }
  return "low";
}

LoadLevel parse_load_level(std::string_view text) {
  if (text == "low") return LoadLevel::low;
  if (text == "medium") return LoadLevel::medium;
  if (text == "high") return LoadLevel::high;
  throw std::invalid_argument(fmt::format("unknown load level '{}'", text));
}

DemandModel DemandModel::uniform(const RoadGraph& g, double rate) {
  const auto n = g.node_count();
  return DemandModel{rate, std::vector<double>(n, 1.0 / static_cast<double>(n)),
                     std::vector<double>(n, 1.0 / static_cast<double>(n))};
}

void DemandModel::validate(const RoadGraph& g) const {
  if (!(arrival_rate > 0.0)) throw DemandError("arrival rate must be positive");
  for (const auto* w : {&pickup_weights, &dropoff_weights}) {
    if (w->size() != g.node_count()) {
      throw DemandError(fmt::format("weight vector has {} entries for {} nodes", w->size(), g.node_count()));
    }
    if (std::any_of(w->begin(), w->end(), [](double x) { return !(x >= 0.0); })) {
      throw DemandError("weights must be nonnegative");
    }
    const double total = std::accumulate(w->begin(), w->end(), 0.0);
    if (std::abs(total - 1.0) > 1e-9) throw DemandError("weights must sum to 1");
  }
}

namespace {

struct Pair {
  Vertex pickup;
  Vertex dropoff;
};

bool valid_pair(const World& world, Vertex pickup, Vertex dropoff) {
  return pickup != dropoff && world.paths.reachable(pickup, dropoff);
}

Pair draw_pair(const DemandModel& model, const World& world, Rng& rng) {
  for (int attempt = 0; attempt < kMaxPairAttempts; ++attempt) {
    const auto p = vertex(rng.categorical(model.pickup_weights, 1.0));
    const auto d = vertex(rng.categorical(model.dropoff_weights, 1.0));
    if (valid_pair(world, p, d)) return {p, d};
  }
  throw DemandError(fmt::format("no reachable pickup/dropoff pair found in {} attempts", kMaxPairAttempts));
}

}  // namespace

Scenario sample_scenario(const DemandModel& model, const World& world, Step horizon,
                         std::size_t agents, std::uint64_t seed, LoadLevel load, std::string map_id) {
  model.validate(world.graph);
  if (horizon < 1) throw DemandError("horizon must be at least 1");

  Scenario sc;
  sc.map_id = std::move(map_id);
  sc.horizon = horizon;
  sc.load = load;
  sc.seed = seed;

  Rng placement(derive_seed(seed, 0));
  for (std::size_t a = 0; a < agents; ++a) {
    sc.initial_positions.push_back(vertex(placement.below(world.graph.node_count())));
  }

  Rng arrivals(derive_seed(seed, 1));
  Rng locations(derive_seed(seed, 2));
  RequestId next_id = 0;
  for (Step k = 0; k < horizon; ++k) {
    const auto count = arrivals.poisson(model.arrival_rate);
    for (unsigned i = 0; i < count; ++i) {
      const auto [p, d] = draw_pair(model, world, locations);
      sc.requests.push_back(Request{next_id++, p, d, k, std::nullopt, std::nullopt});
    }
  }
  return sc;
}

CeFutureSampler::CeFutureSampler(const DemandModel& model, const World& world, Step t_h,
                                 std::uint64_t family_seed)
    : world_(&world), t_h_(t_h), family_seed_(family_seed) {
  if (t_h < 1) throw DemandError("t_h must be at least 1");
  model.validate(world.graph);
  const auto n = static_cast<std::size_t>(std::llround(model.arrival_rate * t_h));
  Rng rng(derive_seed(family_seed, 0));
  for (std::size_t i = 0; i < n; ++i) {
    const auto [p, d] = draw_pair(model, world, rng);
    pickups_.push_back(p);
    dropoffs_.push_back(d);
  }
}

FutureStream CeFutureSampler::sample(std::uint64_t sample_index) const {
  Rng rng(derive_seed(family_seed_, sample_index + 1));
  const auto n = pickups_.size();

  std::vector<Step> offsets(n);
  for (auto& o : offsets) o = static_cast<Step>(1 + rng.below(static_cast<std::uint64_t>(t_h_)));
  std::sort(offsets.begin(), offsets.end());

  std::vector<Vertex> p = pickups_;
  std::vector<Vertex> d = dropoffs_;
  bool paired = false;
  for (int attempt = 0; attempt < kMaxPairAttempts && !paired; ++attempt) {
    rng.shuffle(std::span<Vertex>(p));
    rng.shuffle(std::span<Vertex>(d));
    paired = true;
    for (std::size_t i = 0; i < n && paired; ++i) paired = valid_pair(*world_, p[i], d[i]);
  }
  if (!paired) {
    // The family's own pairing is valid by construction; keep its pairs and
    // only permute their order.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = pickups_[order[i]];
      d[i] = dropoffs_[order[i]];
    }
  }

  FutureStream stream(n);
  for (std::size_t i = 0; i < n; ++i) stream[i] = FutureRequest{offsets[i], p[i], d[i]};
  return stream;
}

std::vector<FutureStream> CeFutureSampler::samples(std::size_t n) const {
  std::vector<FutureStream> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample(i));
  return out;
}

std::string save_scenario(const Scenario& s, const RoadGraph& g) {
  nlohmann::ordered_json doc;
  doc["map_id"] = s.map_id;
  doc["horizon"] = s.horizon;
  doc["load_level"] = std::string(to_string(s.load));
  doc["seed"] = s.seed;
  auto& positions = doc["initial_positions"] = nlohmann::ordered_json::array();
  for (const auto v : s.initial_positions) positions.push_back(value(g.id(v)));
  auto& requests = doc["requests"] = nlohmann::ordered_json::array();
  for (const auto& r : s.requests) {
    requests.push_back({{"req_id", r.id},
                        {"pickup", value(g.id(r.pickup))},
                        {"dropoff", value(g.id(r.dropoff))},
                        {"entry_time", r.entry_time}});
  }
  return doc.dump(1) + "\n";
}

Scenario load_scenario(std::string_view document, const World& world) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    throw ScenarioError(fmt::format("malformed scenario: {}", e.what()));
  }

  Scenario s;
  try {
    s.map_id = doc.at("map_id").get<std::string>();
    s.horizon = doc.at("horizon").get<Step>();
    s.load = parse_load_level(doc.at("load_level").get<std::string>());
    s.seed = doc.at("seed").get<std::uint64_t>();
    for (const auto& p : doc.at("initial_positions")) {
      s.initial_positions.push_back(world.graph.at(NodeId{p.get<std::uint64_t>()}));
    }
    for (const auto& r : doc.at("requests")) {
      Request req;
      req.id = r.at("req_id").get<RequestId>();
      req.pickup = world.graph.at(NodeId{r.at("pickup").get<std::uint64_t>()});
      req.dropoff = world.graph.at(NodeId{r.at("dropoff").get<std::uint64_t>()});
      req.entry_time = r.at("entry_time").get<Step>();
      s.requests.push_back(req);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(fmt::format("scenario schema violation: {}", e.what()));
  } catch (const MapError& e) {
    throw ScenarioError(fmt::format("scenario references {}", e.what()));
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(e.what());
  }

  if (s.horizon < 1) throw ScenarioError("horizon must be at least 1");
  std::unordered_set<RequestId> ids;
  for (std::size_t i = 0; i < s.requests.size(); ++i) {
    const auto& r = s.requests[i];
    if (r.entry_time < 0 || r.entry_time >= s.horizon) {
      throw ScenarioError(fmt::format("request {} entry_time {} outside [0, {})", r.id, r.entry_time, s.horizon));
    }
    if (!ids.insert(r.id).second) throw ScenarioError(fmt::format("duplicate request id {}", r.id));
    if (!valid_pair(world, r.pickup, r.dropoff)) {
      throw ScenarioError(fmt::format("request {} has equal or unreachable pickup/dropoff", r.id));
    }
    if (i > 0) {
      const auto& prev = s.requests[i - 1];
      if (std::tie(prev.entry_time, prev.id) >= std::tie(r.entry_time, r.id)) {
        throw ScenarioError("requests must be sorted by (entry_time, req_id) without duplicates");
      }
    }
  }
  return s;
}

Scenario load_scenario_file(const std::string& path, const World& world) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(fmt::format("cannot open scenario file '{}'", path));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return load_scenario(buffer.str(), world);
}

}  // namespace taxi
