#include <doctest.h>

#include <random>
#include <set>

#include "support/oracles.hpp"
#include "taxi/auction.hpp"

using namespace taxi;

namespace {

CostMatrix lift(const std::vector<std::vector<std::int64_t>>& c) {
  CostMatrix out;
  for (const auto& row : c) out.emplace_back(row.begin(), row.end());
  return out;
}

void check_valid(const Assignment& a, const CostMatrix& c) {
  std::set<std::size_t> used;
  std::int64_t total = 0;
  for (std::size_t i = 0; i < a.request_of.size(); ++i) {
    if (!a.request_of[i]) continue;
    const auto j = *a.request_of[i];
    REQUIRE(c[i][j].has_value());
    CHECK(used.insert(j).second);
    total += *c[i][j];
  }
  CHECK(total == a.total_cost);
}

}  // namespace

TEST_CASE("auction matches exhaustive matching") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t rows = 1 + rng() % 6;
    const std::size_t cols = 1 + rng() % 6;
    std::vector<std::vector<std::int64_t>> c(rows, std::vector<std::int64_t>(cols));
    for (auto& row : c) {
      for (auto& x : row) x = static_cast<std::int64_t>(rng() % 21);
    }
    const auto costs = lift(c);
    const auto a = auction_assign(costs);
    CHECK(a.total_cost == oracle::brute_force_assignment(c));
    CHECK(a.matched() == std::min(rows, cols));
    check_valid(a, costs);
  }
}

TEST_CASE("pairings are invariant under cost scaling") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t rows = 1 + rng() % 6;
    const std::size_t cols = 1 + rng() % 6;
    std::vector<std::vector<std::int64_t>> c(rows, std::vector<std::int64_t>(cols));
    auto scaled = c;
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) {
        c[i][j] = static_cast<std::int64_t>(rng() % 21);
        scaled[i][j] = 7 * c[i][j];
      }
    }
    const auto a = auction_assign(lift(c));
    const auto b = auction_assign(lift(scaled));
    CHECK(a.request_of == b.request_of);
    CHECK(b.total_cost == 7 * a.total_cost);
  }
}

TEST_CASE("infeasible pairs are never matched and cardinality comes first") {
  // Row 0 can only take column 0; matching both rows beats the cheap pair (1,0).
  const CostMatrix c{{5, std::nullopt}, {0, 20}};
  const auto a = auction_assign(c);
  CHECK(a.matched() == 2);
  CHECK(a.request_of[0] == 0u);
  CHECK(a.request_of[1] == 1u);
  CHECK(a.total_cost == 25);

  const CostMatrix blocked{{std::nullopt, std::nullopt}, {3, std::nullopt}};
  const auto b = auction_assign(blocked);
  CHECK(b.matched() == 1);
  CHECK_FALSE(b.request_of[0].has_value());
  CHECK(b.request_of[1] == 0u);
}

TEST_CASE("degenerate shapes") {
  CHECK(auction_assign({}).matched() == 0);
  const CostMatrix no_cols{{}, {}};
  CHECK(auction_assign(no_cols).matched() == 0);
  CHECK_THROWS(auction_assign(CostMatrix{{1, 2}, {3}}));
  CHECK_THROWS(auction_assign(CostMatrix{{-1}}));
}
