#include <limits>
#include <stdexcept>
#include <string>

#include "hybridflow/metrics.hpp"

namespace hf::metrics {

std::vector<std::size_t> min_cost_assignment(std::span<const double> cost, std::size_t n) {
  if (cost.size() != n * n) {
    throw std::invalid_argument("min_cost_assignment: expected " + std::to_string(n * n) +
                                " costs, got " + std::to_string(cost.size()));
  }
  if (n == 0) return {};
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // 1-based rows/columns; column 0 is a virtual source.
  std::vector<double> row_pot(n + 1, 0.0);
  std::vector<double> col_pot(n + 1, 0.0);
  std::vector<std::size_t> col_owner(n + 1, 0);
  std::vector<std::size_t> way(n + 1, 0);
  std::vector<double> min_slack(n + 1);
  std::vector<char> used(n + 1);

  for (std::size_t row = 1; row <= n; ++row) {
    col_owner[0] = row;
    std::size_t col = 0;
    std::fill(min_slack.begin(), min_slack.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[col] = 1;
      const std::size_t r = col_owner[col];
      double delta = kInf;
      std::size_t next = 0;
      const double *cost_row = cost.data() + (r - 1) * n;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double slack = cost_row[j - 1] - row_pot[r] - col_pot[j];
        if (slack < min_slack[j]) {
          min_slack[j] = slack;
          way[j] = col;
        }
        if (min_slack[j] < delta) {
          delta = min_slack[j];
          next = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          row_pot[col_owner[j]] += delta;
          col_pot[j] -= delta;
        } else {
          min_slack[j] -= delta;
        }
      }
      col = next;
    } while (col_owner[col] != 0);
    do {
      const std::size_t prev = way[col];
      col_owner[col] = col_owner[prev];
      col = prev;
    } while (col != 0);
  }

  std::vector<std::size_t> assignment(n);
  for (std::size_t j = 1; j <= n; ++j) {
    assignment[col_owner[j] - 1] = j - 1;
  }
  return assignment;
}

} // namespace hf::metrics
