#pragma once

// Minimum-cost one-to-one assignment (Kuhn-Munkres, O(n^3) with potentials).
// Rectangular inputs are padded with zero-cost slots on the smaller side, so
// the matching always has size min(rows, cols). Among equal-cost optima the
// lexicographically smallest pair list is returned, which keeps reports
// bit-reproducible.

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "drivelang/types.hpp"

namespace drivelang {

// Rows are predictions, columns are ground truths. Entries must be finite.
class CostMatrix {
 public:
  CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static CostMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows[0].size();
    CostMatrix m(r, c);
    for (std::size_t i = 0; i < r; ++i) {
      if (rows[i].size() != c) {
        throw ValidationError("cost matrix rows must have equal length");
      }
      for (std::size_t j = 0; j < c; ++j) m.at(i, j) = rows[i][j];
    }
    return m;
  }

  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  void validate() const {
    for (double v : data_) {
      if (!std::isfinite(v)) {
        throw ValidationError("cost matrix entries must be finite");
      }
    }
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

struct Assignment {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // sorted by row
  double total_cost{0.0};
};

namespace detail {

// Shortest-augmenting-path Kuhn-Munkres on an n x n matrix. Fills
// `col_owner` (row matched to each column) and the dual potentials, which
// satisfy u[i] + v[j] <= cost(i, j) with equality on matching edges.
template <typename CostFn>
inline void solve_square_assignment(std::size_t n, CostFn cost,
                                    std::vector<int>& col_owner,
                                    std::vector<double>& u,
                                    std::vector<double>& v) {
  const double inf = std::numeric_limits<double>::infinity();
  u.assign(n + 1, 0.0);
  v.assign(n + 1, 0.0);
  std::vector<int> p(n + 1, 0);
  std::vector<int> way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = static_cast<int>(i);
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = static_cast<std::size_t>(p[j0]);
      std::size_t j1 = 0;
      double delta = inf;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = static_cast<int>(j0);
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[static_cast<std::size_t>(p[j])] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = static_cast<std::size_t>(way[j0]);
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  col_owner.assign(n, -1);
  for (std::size_t j = 1; j <= n; ++j) {
    col_owner[j - 1] = p[j] - 1;
  }
}

// Refines an optimal matching to the lexicographically smallest pair list
// over the subgraph of tight (zero reduced cost) edges. Every perfect
// matching on tight edges is cost-optimal, so the refinement never changes
// the total cost.
class LexTieBreaker {
 public:
  LexTieBreaker(std::size_t n, std::size_t real_rows, std::size_t real_cols,
                std::vector<std::vector<char>> tight, std::vector<int> row_to_col)
      : n_(n),
        real_rows_(real_rows),
        real_cols_(real_cols),
        tight_(std::move(tight)),
        row_to_col_(std::move(row_to_col)),
        col_owner_(n, -1),
        fixed_row_(n, 0),
        fixed_col_(n, 0),
        pad_only_(n, 0) {
    for (std::size_t r = 0; r < n_; ++r) {
      col_owner_[static_cast<std::size_t>(row_to_col_[r])] = static_cast<int>(r);
    }
  }

  std::vector<int> run() {
    for (std::size_t r = 0; r < real_rows_; ++r) {
      bool matched_real = false;
      for (std::size_t c = 0; c < real_cols_; ++c) {
        if (fixed_col_[c] || !tight_[r][c]) continue;
        if (row_to_col_[r] == static_cast<int>(c) || try_force(r, c)) {
          fixed_row_[r] = 1;
          fixed_col_[c] = 1;
          matched_real = true;
          break;
        }
      }
      if (!matched_real) {
        // Row stays on a padding column; later augmentations may shuffle it
        // between padding columns only.
        pad_only_[r] = 1;
      }
    }
    return row_to_col_;
  }

 private:
  bool edge_ok(std::size_t r, std::size_t c) const {
    if (!tight_[r][c] || fixed_col_[c]) return false;
    if (pad_only_[r] && c < real_cols_) return false;
    return true;
  }

  bool augment(std::size_t row, std::vector<char>& visited) {
    for (std::size_t c = 0; c < n_; ++c) {
      if (visited[c] || !edge_ok(row, c)) continue;
      visited[c] = 1;
      const int owner = col_owner_[c];
      if (owner < 0 || augment(static_cast<std::size_t>(owner), visited)) {
        row_to_col_[row] = static_cast<int>(c);
        col_owner_[c] = static_cast<int>(row);
        return true;
      }
    }
    return false;
  }

  // Attempts to rewire the matching so that row r takes column c while the
  // displaced row re-augments elsewhere. Reverts on failure.
  bool try_force(std::size_t r, std::size_t c) {
    if (!tight_[r][c]) return false;
    const auto saved_match = row_to_col_;
    const auto saved_owner = col_owner_;
    const std::size_t old_col = static_cast<std::size_t>(row_to_col_[r]);
    const std::size_t displaced = static_cast<std::size_t>(col_owner_[c]);
    col_owner_[old_col] = -1;
    row_to_col_[displaced] = -1;
    row_to_col_[r] = static_cast<int>(c);
    col_owner_[c] = static_cast<int>(r);
    std::vector<char> visited(n_, 0);
    visited[c] = 1;
    if (augment(displaced, visited)) {
      return true;
    }
    row_to_col_ = saved_match;
    col_owner_ = saved_owner;
    return false;
  }

  std::size_t n_;
  std::size_t real_rows_;
  std::size_t real_cols_;
  std::vector<std::vector<char>> tight_;
  std::vector<int> row_to_col_;
  std::vector<int> col_owner_;
  std::vector<char> fixed_row_;
  std::vector<char> fixed_col_;
  std::vector<char> pad_only_;
};

}  // namespace detail

inline Assignment hungarian(const CostMatrix& costs) {
  costs.validate();
  Assignment result;
  const std::size_t rows = costs.rows();
  const std::size_t cols = costs.cols();
  if (rows == 0 || cols == 0) return result;

  const std::size_t n = std::max(rows, cols);
  auto padded = [&](std::size_t i, std::size_t j) {
    return (i < rows && j < cols) ? costs.at(i, j) : 0.0;
  };

  std::vector<int> col_owner;
  std::vector<double> u, v;
  detail::solve_square_assignment(n, padded, col_owner, u, v);

  std::vector<int> row_to_col(n, -1);
  for (std::size_t j = 0; j < n; ++j) {
    row_to_col[static_cast<std::size_t>(col_owner[j])] = static_cast<int>(j);
  }

  const double tol = 1e-9 * (1.0 + costs.max_abs());
  std::vector<std::vector<char>> tight(n, std::vector<char>(n, 0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      tight[i][j] = std::abs(padded(i, j) - u[i + 1] - v[j + 1]) <= tol;
    }
    // Matched edges are tight by complementary slackness; pin them in case
    // of rounding noise.
    tight[i][static_cast<std::size_t>(row_to_col[i])] = 1;
  }

  detail::LexTieBreaker breaker(n, rows, cols, std::move(tight),
                                std::move(row_to_col));
  const std::vector<int> final_match = breaker.run();

  for (std::size_t r = 0; r < rows; ++r) {
    const int c = final_match[r];
    if (c >= 0 && static_cast<std::size_t>(c) < cols) {
      result.pairs.emplace_back(r, static_cast<std::size_t>(c));
      result.total_cost += costs.at(r, static_cast<std::size_t>(c));
    }
  }
  return result;
}

inline Assignment hungarian(const std::vector<std::vector<double>>& costs) {
  return hungarian(CostMatrix::from_rows(costs));
}

}  // namespace drivelang
