#pragma once

#include <string>
#include <vector>

#include "taxi/demand.hpp"
#include "taxi/graph.hpp"
#include "taxi/mdp.hpp"

#ifndef TAXI_DATA_DIR
#error "TAXI_DATA_DIR must be defined by the build"
#endif

namespace fixture {

inline std::string data_path(const std::string& rel) { return std::string(TAXI_DATA_DIR) + "/" + rel; }

inline taxi::RoadGraph graph_from(std::size_t n, const std::vector<std::pair<std::uint64_t, std::uint64_t>>& edges,
                                  std::uint64_t id_base = 1) {
  std::vector<std::pair<taxi::NodeId, taxi::Coordinate>> nodes;
  for (std::size_t i = 0; i < n; ++i) {
    nodes.emplace_back(taxi::NodeId{id_base + i}, taxi::Coordinate{-122.4 + 0.001 * i, 37.78});
  }
  std::vector<taxi::RoadGraph::Edge> es;
  for (const auto& [a, b] : edges) es.push_back({taxi::NodeId{a}, taxi::NodeId{b}});
  return taxi::RoadGraph(std::move(nodes), std::move(es));
}

/// 1 -> 2 -> 3.
inline taxi::World line3() { return taxi::World(graph_from(3, {{1, 2}, {2, 3}})); }

/// Bidirectional path 1 - 2 - ... - n.
inline taxi::World path(std::size_t n) {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> edges;
  for (std::uint64_t i = 1; i < n; ++i) {
    edges.emplace_back(i, i + 1);
    edges.emplace_back(i + 1, i);
  }
  return taxi::World(graph_from(n, edges));
}

inline taxi::World sf42() { return taxi::World(taxi::load_map_file(data_path("maps/sf42.json"))); }

inline taxi::Vertex v(const taxi::World& w, std::uint64_t id) { return w.graph.at(taxi::NodeId{id}); }

inline taxi::FleetState state(const taxi::World& w, std::vector<std::uint64_t> positions, taxi::Step horizon = 60) {
  taxi::FleetState s;
  s.horizon = horizon;
  for (const auto p : positions) s.agents.push_back({v(w, p), 0, std::nullopt});
  return s;
}

inline taxi::Request request(const taxi::World& w, taxi::RequestId id, std::uint64_t pickup, std::uint64_t dropoff,
                             taxi::Step entry = 0) {
  return taxi::Request{id, v(w, pickup), v(w, dropoff), entry, std::nullopt, std::nullopt};
}

}  // namespace fixture
