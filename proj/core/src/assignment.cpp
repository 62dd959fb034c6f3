#include "owlkit/assignment.hpp"

#include <limits>

#include "owlkit/error.hpp"

namespace owlkit {

Assignment hungarian(const Matrix& cost) {
  require(cost.rows() == cost.cols(), ErrorKind::Argument,
          "hungarian needs a square matrix, got " + std::to_string(cost.rows()) + "x" +
              std::to_string(cost.cols()));
  require(cost.allFinite(), ErrorKind::Argument, "hungarian costs must be finite");

  const auto n = static_cast<std::size_t>(cost.rows());
  Assignment result;
  if (n == 0) return result;

  // Shortest augmenting paths with row/column potentials. Index 0 is a
  // virtual column that seeds each augmentation; real rows/cols are 1-based.
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);

  for (std::size_t row = 1; row <= n; ++row) {
    match[0] = row;
    std::size_t col0 = 0;
    std::vector<double> min_slack(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[col0] = true;
      const std::size_t r = match[col0];
      double delta = kInf;
      std::size_t col1 = 0;
      for (std::size_t c = 1; c <= n; ++c) {
        if (used[c]) continue;
        const double slack = cost(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(c - 1)) -
                             u[r] - v[c];
        if (slack < min_slack[c]) {
          min_slack[c] = slack;
          way[c] = col0;
        }
        if (min_slack[c] < delta) {
          delta = min_slack[c];
          col1 = c;
        }
      }
      for (std::size_t c = 0; c <= n; ++c) {
        if (used[c]) {
          u[match[c]] += delta;
          v[c] -= delta;
        } else {
          min_slack[c] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const std::size_t prev = way[col0];
      match[col0] = match[prev];
      col0 = prev;
    } while (col0 != 0);
  }

  result.row_to_col.assign(n, 0);
  for (std::size_t c = 1; c <= n; ++c) result.row_to_col[match[c] - 1] = c - 1;
  for (std::size_t r = 0; r < n; ++r) {
    result.total_cost += cost(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(result.row_to_col[r]));
  }
  return result;
}

} // namespace owlkit
