#include "taxi/graph.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace taxi {

RoadGraph::RoadGraph(std::vector<std::pair<NodeId, Coordinate>> nodes, std::vector<Edge> edges) {
  std::sort(nodes.begin(), nodes.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  ids_.reserve(nodes.size());
  coords_.reserve(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (i > 0 && nodes[i].first == nodes[i - 1].first) {
      throw MapError(fmt::format("duplicate node id {}", value(nodes[i].first)));
    }
    ids_.push_back(nodes[i].first);
    coords_.push_back(nodes[i].second);
    lookup_.emplace(value(nodes[i].first), vertex(i));
  }

  std::vector<std::pair<Vertex, Vertex>> resolved;
  resolved.reserve(edges.size());
  for (const auto& e : edges) {
    const auto from = find(e.from);
    const auto to = find(e.to);
    if (!from || !to) {
      throw MapError(fmt::format("unknown endpoint in edge {} -> {}", value(e.from), value(e.to)));
    }
    if (*from == *to) {
      throw MapError(fmt::format("self-loop at node {}", value(e.from)));
    }
    resolved.emplace_back(*from, *to);
  }
  std::sort(resolved.begin(), resolved.end());
  resolved.erase(std::unique(resolved.begin(), resolved.end()), resolved.end());

  offsets_.assign(ids_.size() + 1, 0);
  for (const auto& [from, to] : resolved) ++offsets_[index(from) + 1];
  for (std::size_t i = 0; i < ids_.size(); ++i) offsets_[i + 1] += offsets_[i];
  adjacency_.reserve(resolved.size());
  for (const auto& [from, to] : resolved) adjacency_.push_back(to);
  edge_count_ = resolved.size();
}

std::optional<Vertex> RoadGraph::find(NodeId id) const {
  const auto it = lookup_.find(value(id));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

Vertex RoadGraph::at(NodeId id) const {
  if (auto v = find(id)) return *v;
  throw MapError(fmt::format("unknown node {}", value(id)));
}

bool RoadGraph::has_edge(Vertex from, Vertex to) const {
  const auto adj = out(from);
  return std::binary_search(adj.begin(), adj.end(), to);
}

RoadGraph load_map(std::string_view document) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    throw MapError(fmt::format("malformed map document: {}", e.what()));
  }
  if (!doc.is_object() || !doc.contains("nodes") || !doc.contains("edges") ||
      !doc["nodes"].is_array() || !doc["edges"].is_array()) {
    throw MapError("malformed map document: expected arrays 'nodes' and 'edges'");
  }

  std::vector<std::pair<NodeId, Coordinate>> nodes;
  std::vector<RoadGraph::Edge> edges;
  try {
    for (const auto& n : doc["nodes"]) {
      nodes.emplace_back(NodeId{n.at("id").get<std::uint64_t>()},
                         Coordinate{n.at("lon").get<double>(), n.at("lat").get<double>()});
    }
    for (const auto& e : doc["edges"]) {
      edges.push_back({NodeId{e.at("from").get<std::uint64_t>()},
                       NodeId{e.at("to").get<std::uint64_t>()}});
    }
  } catch (const nlohmann::json::exception& e) {
    throw MapError(fmt::format("malformed map document: {}", e.what()));
  }
  return RoadGraph(std::move(nodes), std::move(edges));
}

RoadGraph load_map_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MapError(fmt::format("cannot open map file '{}'", path));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return load_map(buffer.str());
}

std::string save_map(const RoadGraph& g) {
  nlohmann::ordered_json doc;
  doc["nodes"] = nlohmann::ordered_json::array();
  doc["edges"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    const auto v = vertex(i);
    const auto c = g.coordinate(v);
    doc["nodes"].push_back({{"id", value(g.id(v))}, {"lon", c.lon}, {"lat", c.lat}});
  }
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    for (const auto to : g.out(vertex(i))) {
      doc["edges"].push_back({{"from", value(g.id(vertex(i)))}, {"to", value(g.id(to))}});
    }
  }
  return doc.dump(1) + "\n";
}

std::vector<NodeId> neighbors(const RoadGraph& g, NodeId id) {
  std::vector<NodeId> result;
  for (const auto v : g.out(g.at(id))) result.push_back(g.id(v));
  return result;
}

namespace {

// Hop distances from every vertex to `target`, by BFS over reversed edges.
void distances_to(const RoadGraph& g, const std::vector<std::vector<Vertex>>& reverse, Vertex target,
                  std::vector<Hops>& dist) {
  dist.assign(g.node_count(), kUnreachable);
  std::deque<Vertex> queue{target};
  dist[index(target)] = 0;
  while (!queue.empty()) {
    const auto v = queue.front();
    queue.pop_front();
    for (const auto u : reverse[index(v)]) {
      if (dist[index(u)] == kUnreachable) {
        dist[index(u)] = static_cast<Hops>(dist[index(v)] + 1);
        queue.push_back(u);
      }
    }
  }
}

std::vector<std::vector<Vertex>> reversed(const RoadGraph& g) {
  std::vector<std::vector<Vertex>> reverse(g.node_count());
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    for (const auto to : g.out(vertex(i))) reverse[index(to)].push_back(vertex(i));
  }
  return reverse;
}

// Smallest out-neighbour one hop closer to the target.
Vertex tie_broken_hop(const RoadGraph& g, Vertex from, const std::vector<Hops>& dist_to_target) {
  const auto want = dist_to_target[index(from)] - 1;
  for (const auto next : g.out(from)) {
    if (dist_to_target[index(next)] == want) return next;
  }
  return from;
}

}  // namespace

PathTable::PathTable(const RoadGraph& g) : n_(g.node_count()) {
  dist_.assign(n_ * n_, kUnreachable);
  next_.assign(n_ * n_, Vertex{});
  const auto reverse = reversed(g);
  std::vector<Hops> column;
  for (std::size_t t = 0; t < n_; ++t) {
    distances_to(g, reverse, vertex(t), column);
    for (std::size_t s = 0; s < n_; ++s) {
      dist_[s * n_ + t] = column[s];
      if (s == t) {
        next_[s * n_ + t] = vertex(s);
      } else if (column[s] != kUnreachable) {
        next_[s * n_ + t] = tie_broken_hop(g, vertex(s), column);
      }
    }
  }
}

std::optional<unsigned> PathTable::distance(Vertex from, Vertex to) const {
  const auto d = hops(from, to);
  if (d == kUnreachable) return std::nullopt;
  return d;
}

std::optional<Route> PathTable::route(Vertex from, Vertex to) const {
  if (!reachable(from, to)) return std::nullopt;
  Route r;
  r.nodes.reserve(hops(from, to) + 1u);
  r.nodes.push_back(from);
  for (auto cur = from; cur != to;) {
    cur = next_hop(cur, to);
    r.nodes.push_back(cur);
  }
  return r;
}

std::optional<Route> shortest_path(const RoadGraph& g, Vertex from, Vertex to) {
  std::vector<Hops> dist;
  distances_to(g, reversed(g), to, dist);
  if (dist[index(from)] == kUnreachable) return std::nullopt;
  Route r;
  r.nodes.push_back(from);
  for (auto cur = from; cur != to;) {
    cur = tie_broken_hop(g, cur, dist);
    r.nodes.push_back(cur);
  }
  return r;
}

PathTable all_pairs(const RoadGraph& g) { return PathTable(g); }

}  // namespace taxi
