#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace scriptalign {

// Window-vs-window similarity scores, row-major, entries in [0,1].
class SimilarityMatrix {
 public:
  SimilarityMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  SimilarityMatrix(std::size_t rows, std::size_t cols, std::vector<double> scores);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double at(std::size_t r, std::size_t c) const { return scores_[r * cols_ + c]; }
  // Throws InvalidAssignment for values outside [0,1].
  void set(std::size_t r, std::size_t c, double value);

  SimilarityMatrix transposed() const;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> scores_;
};

struct Match {
  std::size_t left = 0;
  std::size_t right = 0;

  auto operator<=>(const Match&) const = default;
};

struct Assignment {
  std::vector<Match> matches;  // sorted by left index
  double total_score = 0.0;    // matched entries summed in left order
  std::size_t inversions = 0;
};

// Maximum-score one-to-one matching of size min(rows, cols), solved with the
// Hungarian method on cost = 1 - score. Rectangular inputs are padded with
// zero-score dummies that are dropped from the result. Among optimal
// matchings the one whose row-to-column sequence over the padded square
// problem is lexicographically smallest is returned (dummy columns sort after
// real ones).
Assignment solve_assignment(const SimilarityMatrix& matrix);

// Number of crossing pairs: i1 < i2 and j1 > j2. Throws InvalidAssignment if
// a left or right index is used twice.
std::size_t count_inversions(std::span<const Match> matches);

}  // namespace scriptalign
