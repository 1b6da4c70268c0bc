#pragma once

#include <string>
#include <vector>

#include "cavu/grid.hpp"
#include "cavu/model.hpp"
#include "cavu/stage_game.hpp"

namespace cavu {

// H(z, grad, hess) = -<grad, c(z)> - (1/2) kappa(z)^T hess kappa(z) - r u(z)
// for z = (p, y); grad has length K+1 and hess is (K+1) x (K+1) row-major.
double hamiltonian(const GameModel& m, const BeliefVector& p, double y,
                   const std::vector<double>& grad,
                   const std::vector<double>& hess);

struct SolveOptions {
  double tol = 1e-6;      // stop when the sup-norm change <= tol * dt
  int max_iter = 400000;
  double dt = 0.0;        // 0 selects the default grid-linked step
  int jobs = 0;           // 0 = hardware concurrency
};

struct ResidualStats {
  int interior_nodes = 0;
  int masked_kink_nodes = 0;
  double active_fraction = 0.0;            // envelope-supported chord nodes
  double curvature_active_fraction = 0.0;  // nodes with -lambda_max <= tol
  double max_abs_residual_smooth = 0.0;    // away from envelope kinks
  double mean_abs_residual = 0.0;
  double residual_min = 0.0;
  double residual_max = 0.0;
  double residual_median = 0.0;
  double boundary_delta = 0.0;  // y-truncation sensitivity diagnostic

  std::string to_json() const;
};

// Fixed-point solver for the limit value on a two-state belief grid. One
// iteration applies the dynamic-programming splitting step
//   V <- Cav_p[(1 - r dt) E[V(psi_dt)] + r dt u]
// where the one-step expectation is discretized by the monotone two-point
// Gaussian rule along the diffusion direction (queries at
// z + c dt +- kappa sqrt(dt), bilinearly interpolated and clamped, which is
// a zero-normal-derivative boundary treatment in y), and the constraint
// half-step concavifies every y-slice exactly.
class HjbSolver {
 public:
  HjbSolver(const GameModel& m, const Grid& g, int jobs = 0);

  const Grid& grid() const { return grid_; }
  const GameModel& model() const { return model_; }

  // Non-revealing value surface u(p, y); the solver's initial iterate.
  ValueField u_field() const;

  // One full splitting step. Monotone for any dt with r dt <= 1; throws
  // SolverError past that stability bound.
  ValueField step(const ValueField& field, double dt) const;

  // Iterates `step` from the u-surface until the sup-norm change is below
  // tol * dt or max_iter is hit; non-convergence is flagged, not thrown.
  // Records the change history on this instance, so concurrent solve()
  // calls need separate solver objects.
  ValueField solve(const SolveOptions& opt = SolveOptions()) const;

  // Grid-linked default step size.
  double default_dt() const;

  // Recorded sup-norm changes of the last solve.
  const std::vector<double>& change_history() const { return history_; }

  double u_at(int ip, int iy) const { return u_[grid_.idx(ip, iy)]; }

 private:
  GameModel model_;
  Grid grid_;
  int jobs_ = 0;
  std::vector<double> u_, cp_, cy_, kp_, ky_;
  mutable std::vector<double> history_;
};

// Constrained-equation residuals of a solved field: at interior nodes the
// report evaluates min(rV + H, -lambda_max) from central difference
// quotients; nodes adjacent to envelope kinks are masked for the headline
// maximum because the solution is not twice differentiable there.
ResidualStats residual_report(const GameModel& m, const Grid& g,
                              const ValueField& field);

// Free-function faces over HjbSolver (convenient for tests).
ValueField scheme_step(const GameModel& m, const Grid& g,
                       const ValueField& field, double dt);
ValueField solve_value(const GameModel& m, const Grid& g,
                       const SolveOptions& opt = SolveOptions());

}  // namespace cavu
