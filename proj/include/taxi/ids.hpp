#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>

namespace taxi {

/// External intersection identifier, as it appears in map files and prompts.
enum class NodeId : std::uint64_t {};

/// Dense index of an intersection inside a RoadGraph. Vertices are numbered in
/// ascending NodeId order, so comparing vertices compares node ids.
enum class Vertex : std::uint32_t {};

using AgentIndex = std::size_t;
using RequestId = std::uint32_t;
using Step = std::int32_t;

constexpr std::uint64_t value(NodeId id) { return static_cast<std::uint64_t>(id); }
constexpr std::uint32_t index(Vertex v) { return static_cast<std::uint32_t>(v); }
constexpr Vertex vertex(std::size_t i) { return static_cast<Vertex>(static_cast<std::uint32_t>(i)); }

/// Hop-count type for the all-pairs table.
using Hops = std::uint16_t;
inline constexpr Hops kUnreachable = std::numeric_limits<Hops>::max();

}  // namespace taxi
