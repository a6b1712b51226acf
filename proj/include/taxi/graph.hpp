#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "taxi/ids.hpp"

namespace taxi {

class MapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Coordinate {
  double lon = 0.0;
  double lat = 0.0;
};

/// Directed street graph. Immutable after construction; adjacency lists are
/// sorted ascending and free of duplicates and self-loops.
class RoadGraph {
 public:
  struct Edge {
    NodeId from;
    NodeId to;
  };

  RoadGraph() = default;
  /// Validates and canonicalises. Throws MapError on duplicate node ids,
  /// unknown endpoints or self-loops. Duplicate edges are merged.
  RoadGraph(std::vector<std::pair<NodeId, Coordinate>> nodes, std::vector<Edge> edges);

  std::size_t node_count() const { return ids_.size(); }
  std::size_t edge_count() const { return edge_count_; }

  NodeId id(Vertex v) const { return ids_[index(v)]; }
  Coordinate coordinate(Vertex v) const { return coords_[index(v)]; }
  std::optional<Vertex> find(NodeId id) const;
  /// Throws MapError for ids not in the graph.
  Vertex at(NodeId id) const;
  bool contains(NodeId id) const { return find(id).has_value(); }

  std::span<const Vertex> out(Vertex v) const {
    return {adjacency_.data() + offsets_[index(v)], adjacency_.data() + offsets_[index(v) + 1]};
  }
  bool has_edge(Vertex from, Vertex to) const;

  std::span<const NodeId> ids() const { return ids_; }

 private:
  std::vector<NodeId> ids_;
  std::vector<Coordinate> coords_;
  std::unordered_map<std::uint64_t, Vertex> lookup_;
  std::vector<std::size_t> offsets_;
  std::vector<Vertex> adjacency_;
  std::size_t edge_count_ = 0;
};

/// Parses the JSON map document: {"nodes": [{id, lon, lat}], "edges": [{from, to}]}.
RoadGraph load_map(std::string_view document);
RoadGraph load_map_file(const std::string& path);
/// Canonical serialisation (nodes and edges ascending by id).
std::string save_map(const RoadGraph& g);

/// Out-neighbours of `id` as node ids, ascending. Throws MapError on unknown id.
std::vector<NodeId> neighbors(const RoadGraph& g, NodeId id);

/// Minimum-hop route between two vertices, both endpoints included.
struct Route {
  std::vector<Vertex> nodes;
  std::size_t length() const { return nodes.empty() ? 0 : nodes.size() - 1; }
};

/// All-pairs hop distances and next hops. Ties are broken toward the smaller
/// next-hop id at every step, so routes are deterministic.
class PathTable {
 public:
  PathTable() = default;
  explicit PathTable(const RoadGraph& g);

  std::size_t size() const { return n_; }
  Hops hops(Vertex from, Vertex to) const { return dist_[index(from) * n_ + index(to)]; }
  bool reachable(Vertex from, Vertex to) const { return hops(from, to) != kUnreachable; }
  std::optional<unsigned> distance(Vertex from, Vertex to) const;
  /// First vertex after `from` on the route to `to`; `from` itself when equal.
  /// Precondition: reachable(from, to).
  Vertex next_hop(Vertex from, Vertex to) const { return next_[index(from) * n_ + index(to)]; }
  std::optional<Route> route(Vertex from, Vertex to) const;

 private:
  std::size_t n_ = 0;
  std::vector<Hops> dist_;
  std::vector<Vertex> next_;
};

/// Single-pair search used as the per-pair reference for the table.
std::optional<Route> shortest_path(const RoadGraph& g, Vertex from, Vertex to);
PathTable all_pairs(const RoadGraph& g);

/// A graph together with its path table; shared read-only by every simulation.
struct World {
  RoadGraph graph;
  PathTable paths;

  explicit World(RoadGraph g) : graph(std::move(g)), paths(graph) {}
};

}  // namespace taxi
