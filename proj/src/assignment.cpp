#include "scriptalign/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "scriptalign/error.hpp"

namespace scriptalign {

namespace {

// Reduced costs within this bound count as tight (costs lie in [0,1]).
constexpr double kTightEps = 1e-10;

void check_score(double value) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw InvalidAssignment("similarity score " + std::to_string(value) + " outside [0,1]");
  }
}

struct Dual {
  std::vector<double> u;        // row potentials, 1-based
  std::vector<double> v;        // column potentials, 1-based
  std::vector<std::size_t> p;   // p[col] = row, 1-based, 0 = none
};

// Shortest augmenting path Hungarian method on an n x n cost matrix.
Dual hungarian(const std::vector<double>& cost, std::size_t n) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  Dual d{std::vector<double>(n + 1, 0.0), std::vector<double>(n + 1, 0.0),
         std::vector<std::size_t>(n + 1, 0)};
  std::vector<std::size_t> way(n + 1, 0);
  std::vector<double> minv(n + 1);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    d.p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = d.p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - d.u[i0] - d.v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          d.u[d.p[j]] += delta;
          d.v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (d.p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      d.p[j0] = d.p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  return d;
}

// Rewrites a perfect matching on the tight subgraph into the
// lexicographically smallest one (row by row, smallest column first).
void lexicographic_minimum(const std::vector<std::vector<char>>& tight, std::vector<std::size_t>& row_to_col) {
  const std::size_t n = row_to_col.size();
  std::vector<std::size_t> col_to_row(n);
  for (std::size_t r = 0; r < n; ++r) col_to_row[row_to_col[r]] = r;

  std::vector<std::size_t> parent_col(n);
  std::vector<char> seen(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < row_to_col[i]; ++j) {
      if (!tight[i][j]) continue;
      // Force i -> j: row r loses its column, column c = row_to_col[i] frees
      // up. Look for an alternating path r -> ... -> c over unfixed rows.
      const std::size_t r = col_to_row[j];
      if (r < i) continue;  // column owned by a fixed row
      const std::size_t c = row_to_col[i];
      std::fill(seen.begin(), seen.end(), 0);
      std::vector<std::size_t> queue{r};
      std::vector<std::size_t> came_from(n, n);  // for rows: the column that led here
      bool found = false;
      std::size_t end_col = 0;
      for (std::size_t q = 0; q < queue.size() && !found; ++q) {
        const std::size_t row = queue[q];
        for (std::size_t col = 0; col < n; ++col) {
          if (!tight[row][col] || seen[col] || col == j) continue;
          seen[col] = 1;
          parent_col[col] = row;
          if (col == c) {
            found = true;
            end_col = col;
            break;
          }
          const std::size_t next = col_to_row[col];
          if (next <= i) continue;
          came_from[next] = col;
          queue.push_back(next);
        }
      }
      if (!found) continue;
      // Flip the path: each row on it takes the column discovered from it.
      std::size_t col = end_col;
      while (true) {
        const std::size_t row = parent_col[col];
        const std::size_t prev_col = came_from[row];
        row_to_col[row] = col;
        col_to_row[col] = row;
        if (row == r) break;
        col = prev_col;
      }
      row_to_col[i] = j;
      col_to_row[j] = i;
      break;
    }
  }
}

}  // namespace

SimilarityMatrix::SimilarityMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), scores_(rows * cols, fill) {
  if (rows == 0 || cols == 0) throw InvalidAssignment("similarity matrix must be at least 1x1");
  check_score(fill);
}

SimilarityMatrix::SimilarityMatrix(std::size_t rows, std::size_t cols, std::vector<double> scores)
    : rows_(rows), cols_(cols), scores_(std::move(scores)) {
  if (rows == 0 || cols == 0) throw InvalidAssignment("similarity matrix must be at least 1x1");
  if (scores_.size() != rows * cols) throw InvalidAssignment("score count does not match dimensions");
  for (double v : scores_) check_score(v);
}

void SimilarityMatrix::set(std::size_t r, std::size_t c, double value) {
  check_score(value);
  scores_[r * cols_ + c] = value;
}

SimilarityMatrix SimilarityMatrix::transposed() const {
  std::vector<double> t(scores_.size());
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) t[c * rows_ + r] = scores_[r * cols_ + c];
  }
  return SimilarityMatrix(cols_, rows_, std::move(t));
}

Assignment solve_assignment(const SimilarityMatrix& matrix) {
  const std::size_t rows = matrix.rows();
  const std::size_t cols = matrix.cols();
  const std::size_t n = std::max(rows, cols);
  std::vector<double> cost(n * n, 1.0);  // dummy cells score 0
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) cost[r * n + c] = 1.0 - matrix.at(r, c);
  }

  const Dual dual = hungarian(cost, n);
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[dual.p[j] - 1] = j - 1;

  std::vector<std::vector<char>> tight(n, std::vector<char>(n));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      tight[r][c] = std::abs(cost[r * n + c] - dual.u[r + 1] - dual.v[c + 1]) <= kTightEps;
    }
    tight[r][row_to_col[r]] = 1;
  }
  lexicographic_minimum(tight, row_to_col);

  Assignment result;
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t c = row_to_col[r];
    if (c >= cols) continue;
    result.matches.push_back({r, c});
    result.total_score += matrix.at(r, c);
  }
  result.inversions = count_inversions(result.matches);
  return result;
}

std::size_t count_inversions(std::span<const Match> matches) {
  for (std::size_t a = 0; a < matches.size(); ++a) {
    for (std::size_t b = a + 1; b < matches.size(); ++b) {
      if (matches[a].left == matches[b].left) {
        throw InvalidAssignment("left index " + std::to_string(matches[a].left) + " used twice");
      }
      if (matches[a].right == matches[b].right) {
        throw InvalidAssignment("right index " + std::to_string(matches[a].right) + " used twice");
      }
    }
  }
  std::size_t inversions = 0;
  for (std::size_t a = 0; a < matches.size(); ++a) {
    for (std::size_t b = 0; b < matches.size(); ++b) {
      if (matches[a].left < matches[b].left && matches[a].right > matches[b].right) ++inversions;
    }
  }
  return inversions;
}

}  // namespace scriptalign
