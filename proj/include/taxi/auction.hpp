#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace taxi {

/// Agents x requests hop-distance matrix; nullopt marks an infeasible pair.
using CostMatrix = std::vector<std::vector<std::optional<std::int64_t>>>;

struct Assignment {
  /// request index per agent (row), or nullopt when unassigned.
  std::vector<std::optional<std::size_t>> request_of;
  std::int64_t total_cost = 0;

  std::size_t matched() const;
};

/// Minimum-cost maximal matching by a forward (Gauss-Seidel) auction with a
/// fixed epsilon of 1/(n+1), n = max(rows, cols). Benefits are kept in
/// integers scaled by n+1, so the result is exactly optimal for integer costs.
/// Rectangular matrices leave the surplus side unassigned; infeasible pairs
/// are never matched (cardinality is maximised first, then cost).
Assignment auction_assign(const CostMatrix& costs);

}  // namespace taxi
