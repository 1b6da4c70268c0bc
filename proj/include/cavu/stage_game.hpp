#pragma once

#include <vector>

#include "cavu/matrix_game.hpp"
#include "cavu/model.hpp"

namespace cavu {

// A point of the belief simplex over the K hidden states. Entries may carry
// roundoff dust of order 1e-12 from Bayes updates; clip_renormalize restores
// exact membership.
using BeliefVector = std::vector<double>;

// Clips entries below zero (tolerating dust down to -1e-12) and rescales so
// the total is exactly 1. Throws ModelError for genuinely negative entries
// or a vanishing total.
void clip_renormalize(BeliefVector& p);

bool is_valid_belief(const BeliefVector& p, double tol = 1e-10);

// Two-state convenience: (p, 1-p) with p the weight of state 0.
BeliefVector belief2(double p0);

// Averaged payoff matrix of the non-revealing one-stage game:
// A[i][j] = sum_k p(k) g(k,y,i,j). Linear in p.
Matrix stage_matrix(const GameModel& m, const BeliefVector& p, double y);

// Value of the non-revealing one-stage game at (p, y).
double u_value(const GameModel& m, const BeliefVector& p, double y);

// Value and one optimal strategy pair.
MatrixGameSolution stage_solution(const GameModel& m, const BeliefVector& p,
                                  double y);

// Pointwise-smallest concave function on a uniform grid over [0,1] that
// dominates `values`: the upper convex hull, computed by a monotone-chain
// pass in O(N). Equals `values` at both endpoints.
std::vector<double> concave_envelope_1d(const std::vector<double>& values);

// Largest Rayleigh quotient of the symmetric K x K matrix S over the tangent
// space of the simplex at p (zero-sum directions supported where p is
// positive). Returns -infinity at vertices, where the tangent space is {0}.
// S must be symmetric within 1e-10.
double lambda_max(const BeliefVector& p, const std::vector<double>& s);

}  // namespace cavu
