#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cavu/grid.hpp"
#include "cavu/model.hpp"
#include "cavu/stage_game.hpp"

namespace cavu {

// Gauss-Hermite rule normalized against the standard normal: weights sum to
// 1 and polynomials up to degree 2*mq - 1 integrate exactly. Supported sizes
// are 3, 5, 7 and 9; nodes come from the Jacobi matrix of the probabilists'
// Hermite recurrence, so no tabulated constants are involved.
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;
};
GaussHermite gauss_hermite_nodes(int mq);

// Non-revealing value surface u(p, y) on a grid.
ValueField u_surface_field(const GameModel& m, const Grid& g, int jobs = 0);

// Belief after one full stage, given that action `i` was observed and the
// observation moved by dy over a stage of length dt: Bayes reweight by the
// behavior rule sigma_rule[k*nI + i] = sigma(i | k), exact chain transition
// over dt, then Bayes reweight by the Gaussian likelihood of dy (mean
// b(k,y) dt, variance sigma(y)^2 dt per state). Throws ModelError when the
// observed action has zero probability under (p, sigma_rule).
BeliefVector posterior_after_stage(const GameModel& m, const BeliefVector& p,
                                   double y, int i, double dy, double dt,
                                   const std::vector<double>& sigma_rule);

// One application of the discounted one-stage operator for the n-th
// discretization: at every node the informed player's behavior rule is
// optimized over a per-state simplex grid with ns points per free coordinate
// (plus one local refinement pass), the uninformed reply is exact over pure
// actions, and the Y-increment integrates by Gauss-Hermite quadrature around
// the posterior-mean drift. Requires K = 2 and action counts <= 3.
ValueField shapley_operator(const GameModel& m, int n, const Grid& g,
                            const ValueField& w, int mq, int ns, int jobs = 0);

struct VnOptions {
  int mq = 5;
  int ns = 21;
  double tol = 1e-4;  // stop when the sup change <= tol * lambda_n
  int max_iter = 0;   // 0 = derive from the contraction factor
  int jobs = 0;
};

// Fixed point of shapley_operator from the u-surface; the (1 - lambda_n)
// contraction guarantees termination within the derived iteration bound.
ValueField value_iteration_vn(const GameModel& m, int n, const Grid& g,
                              const VnOptions& opt = VnOptions());

// The informed player's stationary rule built from a solved value surface:
// play the non-revealing optimal strategy wherever the concavity constraint
// is slack; inside an active envelope chord, split the public belief to the
// chord endpoints by the martingale lottery and play the non-revealing
// optimum at the drawn posterior.
struct SplittingPolicy {
  Grid grid;
  bool splitting_enabled = true;
  // Chord intervals (p_lo, p_hi) of the active envelope region, per y-slice.
  std::vector<std::vector<std::pair<double, double>>> chords;

  struct Decision {
    bool split = false;
    double p_lo = 0.0, p_hi = 0.0;
    double w_hi = 0.0;  // martingale weight of the upper endpoint
  };
  Decision decide(double p, double y) const;
};

// Requires a converged field with envelope metadata.
SplittingPolicy build_informed_strategy(const GameModel& m,
                                        const ValueField& v);

// Same interface, never splits (the non-revealing baseline).
SplittingPolicy make_nonrevealing_policy(const GameModel& m, const Grid& g);

// The uninformed side: a Bayes-consistent belief updated from observables
// only (both action histories and the public observation path), replying
// with the non-revealing optimal mixed action at the current belief.
struct BayesOpponent {
  BeliefVector belief;
  std::vector<double> reply(const GameModel& m, double y) const;
};

struct MatchOptions {
  int num_paths = 1000;
  double horizon = 0.0;  // must satisfy e^{-r T} <= 1e-3
  std::uint64_t seed = 1;
  double p0 = 0.5;
  double y0 = 0.0;
  int jobs = 0;
  bool record_transcripts = false;
};

struct MatchResult {
  double estimate = 0.0;     // discount-mass normalized discounted payoff
  double std_error = 0.0;    // sample std / sqrt(num_paths)
  double truncation_budget = 0.0;
  int num_paths = 0;
  int num_stages = 0;
  double lambda_n = 0.0;
  // Measured discounted l1 gap between the pre- and post-action public
  // beliefs (the split magnitude term of the uninformed player's bound).
  double split_l1_discounted = 0.0;
  std::string transcript_csv;  // filled when record_transcripts is set
};

// Plays pol against the Bayes opponent over num_paths independent paths of
// the n-th discretization. Deterministic for a fixed seed: path index =
// stream index, reduction in fixed path order.
MatchResult simulate_match(const GameModel& m, const SplittingPolicy& pol,
                           int n, const MatchOptions& opt);

}  // namespace cavu
