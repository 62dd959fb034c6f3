#pragma once

#include <vector>

#include "owlkit/types.hpp"

namespace owlkit {

struct Assignment {
  /// row_to_col[i] is the column matched to row i.
  std::vector<std::size_t> row_to_col;
  /// Sum of cost(i, row_to_col[i]) accumulated in row order.
  double total_cost = 0.0;
};

/// Minimum-cost perfect matching on a square cost matrix (Kuhn-Munkres with
/// potentials, O(n^3)). Non-square input is an argument error; pad with zeros.
Assignment hungarian(const Matrix& cost);

} // namespace owlkit
