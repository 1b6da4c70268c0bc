#include "cavu/matrix_game.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cavu {

namespace {

constexpr double kPivotTol = 1e-11;

// Tableau simplex for: maximize sum(w) s.t. A' w <= 1, w >= 0, where A' is
// the payoff matrix shifted so every entry is >= 1. The optimal w recovers
// the column player's strategy, the dual multipliers (read off the slack
// reduced costs) recover the row player's strategy, and 1/sum(w) is the
// value of the shifted game.
struct Tableau {
  int m, n;                    // constraints, structural variables
  std::vector<double> t;       // m rows x (n + m + 1) columns
  std::vector<double> reduced; // n + m entries
  std::vector<int> basis;      // basis variable per row
  double objective = 0.0;

  Tableau(const Matrix& ap) : m(ap.rows), n(ap.cols) {
    const int w = n + m + 1;
    t.assign(m * w, 0.0);
    reduced.assign(n + m, 0.0);
    basis.resize(m);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) t[i * w + j] = ap.at(i, j);
      t[i * w + n + i] = 1.0;
      t[i * w + n + m] = 1.0;
      basis[i] = n + i;
    }
    for (int j = 0; j < n; ++j) reduced[j] = 1.0;
  }

  int width() const { return n + m + 1; }

  void pivot(int row, int col) {
    const int w = width();
    const double piv = t[row * w + col];
    for (int j = 0; j < w; ++j) t[row * w + j] /= piv;
    for (int i = 0; i < m; ++i) {
      if (i == row) continue;
      const double factor = t[i * w + col];
      if (factor == 0.0) continue;
      for (int j = 0; j < w; ++j) t[i * w + j] -= factor * t[row * w + j];
    }
    const double rfactor = reduced[col];
    if (rfactor != 0.0) {
      for (int j = 0; j < n + m; ++j) reduced[j] -= rfactor * t[row * w + j];
      objective += rfactor * t[row * w + n + m];
    }
    basis[row] = col;
  }

  void solve() {
    const int w = width();
    const int max_pivots = 2000 + 64 * (m + n);
    for (int iter = 0; iter < max_pivots; ++iter) {
      // Bland: smallest index with positive reduced cost.
      int col = -1;
      for (int j = 0; j < n + m; ++j) {
        if (reduced[j] > kPivotTol) {
          col = j;
          break;
        }
      }
      if (col < 0) return;  // optimal

      int row = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m; ++i) {
        const double coef = t[i * w + col];
        if (coef <= kPivotTol) continue;
        const double ratio = t[i * w + n + m] / coef;
        if (ratio < best_ratio - 1e-14 ||
            (ratio < best_ratio + 1e-14 &&
             (row < 0 || basis[i] < basis[row]))) {
          best_ratio = ratio;
          row = i;
        }
      }
      if (row < 0) throw SolverError("matrix game LP unbounded");
      pivot(row, col);
    }
    throw SolverError("matrix game LP failed to terminate");
  }
};

void clip_normalize(std::vector<double>& x) {
  double total = 0.0;
  for (double& v : x) {
    if (v < 0.0) v = 0.0;
    total += v;
  }
  if (total <= 0.0) {
    const double uniform = 1.0 / static_cast<double>(x.size());
    for (double& v : x) v = uniform;
    return;
  }
  for (double& v : x) v /= total;
}

}  // namespace

MatrixGameSolution solve_matrix_game(const Matrix& a) {
  if (a.rows < 1 || a.cols < 1)
    throw SolverError("matrix game needs at least one action per player");
  for (double v : a.a)
    if (!std::isfinite(v)) throw SolverError("matrix game entry not finite");

  double lo = a.a[0];
  for (double v : a.a) lo = std::fmin(lo, v);
  const double shift = 1.0 - lo;

  Matrix shifted(a.rows, a.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) shifted.at(i, j) = a.at(i, j) + shift;

  Tableau tab(shifted);
  tab.solve();

  const double z = tab.objective;
  if (!(z > 0.0)) throw SolverError("matrix game LP degenerate objective");
  const double shifted_value = 1.0 / z;

  MatrixGameSolution sol;
  sol.value = shifted_value - shift;
  sol.col_strategy.assign(a.cols, 0.0);
  const int w = tab.width();
  for (int i = 0; i < tab.m; ++i)
    if (tab.basis[i] < tab.n)
      sol.col_strategy[tab.basis[i]] = tab.t[i * w + tab.n + tab.m];
  for (double& v : sol.col_strategy) v *= shifted_value;

  sol.row_strategy.assign(a.rows, 0.0);
  for (int i = 0; i < a.rows; ++i)
    sol.row_strategy[i] = -tab.reduced[tab.n + i] * shifted_value;

  clip_normalize(sol.row_strategy);
  clip_normalize(sol.col_strategy);
  return sol;
}

double duality_gap(const Matrix& a, const MatrixGameSolution& s) {
  double best_row = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < a.rows; ++i) {
    double v = 0.0;
    for (int j = 0; j < a.cols; ++j) v += a.at(i, j) * s.col_strategy[j];
    best_row = std::fmax(best_row, v);
  }
  double worst_col = std::numeric_limits<double>::infinity();
  for (int j = 0; j < a.cols; ++j) {
    double v = 0.0;
    for (int i = 0; i < a.rows; ++i) v += a.at(i, j) * s.row_strategy[i];
    worst_col = std::fmin(worst_col, v);
  }
  return best_row - worst_col;
}

}  // namespace cavu
