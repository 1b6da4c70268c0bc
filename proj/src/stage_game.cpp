#include "cavu/stage_game.hpp"

#include <cmath>
#include <limits>

#include "cavu/numerics.hpp"

namespace cavu {

void clip_renormalize(BeliefVector& p) {
  double total = 0.0;
  for (double& v : p) {
    if (v < 0.0) {
      if (v < -1e-9) throw ModelError("belief entry below -1e-9");
      v = 0.0;
    }
    total += v;
  }
  if (total <= 0.0) throw ModelError("belief has no mass");
  for (double& v : p) v /= total;
}

bool is_valid_belief(const BeliefVector& p, double tol) {
  double total = 0.0;
  for (double v : p) {
    if (v < -1e-12) return false;
    total += v;
  }
  return std::abs(total - 1.0) <= tol;
}

BeliefVector belief2(double p0) { return BeliefVector{p0, 1.0 - p0}; }

Matrix stage_matrix(const GameModel& m, const BeliefVector& p, double y) {
  Matrix a(m.num_actions_p1, m.num_actions_p2);
  for (int k = 0; k < m.num_states; ++k) {
    const double w = p[k];
    if (w == 0.0) continue;
    for (int i = 0; i < m.num_actions_p1; ++i)
      for (int j = 0; j < m.num_actions_p2; ++j)
        a.at(i, j) += w * m.payoff_at(k, y, i, j);
  }
  return a;
}

double u_value(const GameModel& m, const BeliefVector& p, double y) {
  return solve_matrix_game(stage_matrix(m, p, y)).value;
}

MatrixGameSolution stage_solution(const GameModel& m, const BeliefVector& p,
                                  double y) {
  return solve_matrix_game(stage_matrix(m, p, y));
}

std::vector<double> concave_envelope_1d(const std::vector<double>& values) {
  const int n = static_cast<int>(values.size());
  if (n < 2) throw std::invalid_argument("envelope needs >= 2 grid points");

  // Upper hull of the points (i, values[i]); integer abscissas keep the
  // cross products exact in the index coordinate.
  std::vector<int> hull;
  hull.reserve(n);
  for (int i = 0; i < n; ++i) {
    while (hull.size() >= 2) {
      const int a = hull[hull.size() - 2];
      const int b = hull[hull.size() - 1];
      // Pop b when it is at or below the chord a -> i.
      const double cross = (b - a) * (values[i] - values[a]) -
                           (values[b] - values[a]) * (i - a);
      if (cross >= 0.0)
        hull.pop_back();
      else
        break;
    }
    hull.push_back(i);
  }

  std::vector<double> env(n);
  std::size_t seg = 0;
  for (int i = 0; i < n; ++i) {
    while (seg + 1 < hull.size() && hull[seg + 1] < i) ++seg;
    const int a = hull[seg];
    if (a == i) {
      env[i] = values[i];
      continue;
    }
    const int b = hull[seg + 1];
    const double t = static_cast<double>(i - a) / static_cast<double>(b - a);
    env[i] = values[a] + t * (values[b] - values[a]);
  }
  return env;
}

double lambda_max(const BeliefVector& p, const std::vector<double>& s) {
  const int k = static_cast<int>(p.size());
  if (static_cast<int>(s.size()) != k * k)
    throw std::invalid_argument("lambda_max: S must be K x K");
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j)
      if (std::abs(s[i * k + j] - s[j * k + i]) > 1e-10)
        throw std::invalid_argument("lambda_max: S not symmetric");

  std::vector<int> support;
  for (int i = 0; i < k; ++i)
    if (p[i] > 1e-12) support.push_back(i);
  const int dim = static_cast<int>(support.size()) - 1;
  if (dim < 1) return -std::numeric_limits<double>::infinity();

  // Helmert-style orthonormal basis of { x : sum over support = 0 },
  // embedded with zeros off the support. Column j (j = 1..dim):
  // (1,...,1,-j,0,...)/sqrt(j(j+1)) over the support coordinates.
  std::vector<double> basis(k * dim, 0.0);
  for (int j = 1; j <= dim; ++j) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(j) * (j + 1));
    for (int t = 0; t < j; ++t) basis[support[t] * dim + (j - 1)] = scale;
    basis[support[j] * dim + (j - 1)] = -scale * j;
  }

  // Projected matrix M = B^T S B, symmetric dim x dim.
  std::vector<double> sb(k * dim, 0.0);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < dim; ++j) {
      double acc = 0.0;
      for (int l = 0; l < k; ++l) acc += s[i * k + l] * basis[l * dim + j];
      sb[i * dim + j] = acc;
    }
  std::vector<double> proj(dim * dim, 0.0);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) {
      double acc = 0.0;
      for (int l = 0; l < k; ++l) acc += basis[l * dim + i] * sb[l * dim + j];
      proj[i * dim + j] = acc;
    }
  // Symmetrize away roundoff before the eigensolve.
  for (int i = 0; i < dim; ++i)
    for (int j = i + 1; j < dim; ++j) {
      const double avg = 0.5 * (proj[i * dim + j] + proj[j * dim + i]);
      proj[i * dim + j] = proj[j * dim + i] = avg;
    }

  return jacobi_max_eigenvalue(std::move(proj), dim);
}

}  // namespace cavu
