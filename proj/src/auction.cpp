#include "taxi/auction.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace taxi {

std::size_t Assignment::matched() const {
  return static_cast<std::size_t>(
      std::count_if(request_of.begin(), request_of.end(), [](const auto& r) { return r.has_value(); }));
}

Assignment auction_assign(const CostMatrix& costs) {
  const std::size_t rows = costs.size();
  const std::size_t cols = rows == 0 ? 0 : costs.front().size();
  Assignment result;
  result.request_of.assign(rows, std::nullopt);
  if (rows == 0 || cols == 0) return result;

  std::int64_t divisor = 0;
  std::int64_t max_cost = 0;
  for (const auto& row : costs) {
    if (row.size() != cols) throw std::invalid_argument("cost matrix rows differ in length");
    for (const auto& c : row) {
      if (!c) continue;
      if (*c < 0) throw std::invalid_argument("costs must be nonnegative");
      divisor = std::gcd(divisor, *c);
      max_cost = std::max(max_cost, *c);
    }
  }
  // Dividing by the gcd makes positively scaled inputs identical, so the
  // pairing is invariant under scaling.
  if (divisor > 1) max_cost /= divisor;
  const auto norm = [&](std::int64_t c) { return divisor > 1 ? c / divisor : c; };

  // Square benefit matrix. Feasible real pairs earn `bonus - cost`, where the
  // bonus outweighs any cost difference so cardinality is maximised first;
  // padding and infeasible pairs earn 0.
  const std::size_t n = std::max(rows, cols);
  const std::int64_t scale = static_cast<std::int64_t>(n) + 1;
  const std::int64_t bonus = static_cast<std::int64_t>(n) * max_cost + 1;
  std::vector<std::int64_t> benefit(n * n, 0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      if (costs[i][j]) benefit[i * n + j] = scale * (bonus - norm(*costs[i][j]));
    }
  }

  std::vector<std::int64_t> price(n, 0);
  std::vector<std::ptrdiff_t> owner(n, -1);
  std::vector<std::ptrdiff_t> item_of(n, -1);
  std::deque<std::size_t> unassigned;
  for (std::size_t i = 0; i < n; ++i) unassigned.push_back(i);

  constexpr std::int64_t kEpsilon = 1;  // 1/(n+1) before scaling
  while (!unassigned.empty()) {
    const auto person = unassigned.front();
    unassigned.pop_front();

    std::size_t best = 0;
    std::int64_t best_value = std::numeric_limits<std::int64_t>::min();
    std::int64_t second_value = std::numeric_limits<std::int64_t>::min();
    for (std::size_t j = 0; j < n; ++j) {
      const auto v = benefit[person * n + j] - price[j];
      if (v > best_value) {
        second_value = best_value;
        best_value = v;
        best = j;
      } else if (v > second_value) {
        second_value = v;
      }
    }
    const auto increment = n == 1 ? kEpsilon : best_value - second_value + kEpsilon;
    price[best] += increment;
    if (owner[best] >= 0) {
      item_of[static_cast<std::size_t>(owner[best])] = -1;
      unassigned.push_back(static_cast<std::size_t>(owner[best]));
    }
    owner[best] = static_cast<std::ptrdiff_t>(person);
    item_of[person] = static_cast<std::ptrdiff_t>(best);
  }

  for (std::size_t i = 0; i < rows; ++i) {
    const auto j = static_cast<std::size_t>(item_of[i]);
    if (j < cols && costs[i][j]) {
      result.request_of[i] = j;
      result.total_cost += *costs[i][j];
    }
  }
  return result;
}

}  // namespace taxi
