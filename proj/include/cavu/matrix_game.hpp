#pragma once

#include <stdexcept>
#include <vector>

namespace cavu {

// Dense row-major matrix for stage games; the row player maximizes.
struct Matrix {
  int rows = 0, cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(r * c, 0.0) {}

  double& at(int i, int j) { return a[i * cols + j]; }
  double at(int i, int j) const { return a[i * cols + j]; }
};

struct MatrixGameSolution {
  double value = 0.0;
  std::vector<double> row_strategy;  // optimal mixed strategy over I
  std::vector<double> col_strategy;  // optimal mixed strategy over J
};

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Exact value and one optimal strategy pair of the zero-sum matrix game,
// solved as the standard primal/dual linear program by a dense tableau
// simplex. Entering variable by Bland's rule, leaving variable by minimum
// ratio with smallest-basis-index tie-breaking, so the selected vertex is
// deterministic. Duality gap of the returned pair is <= 1e-9 for the
// matrix sizes used here.
MatrixGameSolution solve_matrix_game(const Matrix& a);

// max_i (A q)_i - min_j (x^T A)_j for the returned strategies; nonnegative,
// zero at an exact saddle point.
double duality_gap(const Matrix& a, const MatrixGameSolution& s);

}  // namespace cavu
