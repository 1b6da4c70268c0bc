#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cavu/model.hpp"
#include "cavu/rng.hpp"
#include "cavu/stage_game.hpp"

namespace cavu {

// Drift and diffusion of the joint belief/observation process (chi, Y)
// against the single driving Brownian motion. Both live in R^{K+1}; the
// first K drift entries sum to zero (mass conservation) and so do the first
// K diffusion entries (the filter never leaves the simplex hyperplane).
struct FilterCoefficients {
  std::vector<double> c;      // drift, length K+1
  std::vector<double> kappa;  // diffusion, length K+1
};

// First K entries: transpose(R) * p. Last entry: <p, b(y)>.
std::vector<double> drift_c(const GameModel& m, const BeliefVector& p,
                            double y);

// Entry k: (p_k / sigma(y)) * (b(k,y) - <b(y), p>). Last entry: sigma(y).
// Throws ModelError when sigma(y) is below the model's volatility floor.
std::vector<double> diff_kappa(const GameModel& m, const BeliefVector& p,
                               double y);

FilterCoefficients filter_coefficients(const GameModel& m,
                                       const BeliefVector& p, double y);

// exp(t * transpose(R)) * p by uniformization: Poisson-weighted powers of
// the stochastic matrix I + R/Lambda, truncated once the accumulated Poisson
// mass exceeds 1 - 1e-13. Large t is handled by recursive halving of the
// interval, so no scaling limits apply. The result is a valid belief.
BeliefVector markov_marginal(const std::vector<double>& generator, int k,
                             const BeliefVector& p, double t);

// Aligned trajectories from one simulated path: hidden chain states, the
// observation, and optionally the filtered beliefs.
struct PathBundle {
  double dt = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> times;
  std::vector<int> x_path;
  std::vector<double> y_path;
  std::vector<BeliefVector> chi_path;  // empty until a filter pass fills it
};

// Advances the chain exactly over an interval of length dt by sampling the
// exponential holding times of the embedded jump chain.
int advance_chain_state(const GameModel& m, int state, double dt, Rng& rng);

// Simulates (X, Y) on the uniform time grid of step dt up to horizon T.
// The chain moves by exact exponential holding times inside each step
// (embedded-chain jumps), so its per-step transition law is exact; Y moves
// by one Euler-Maruyama step per dt using the state at the step start.
// Deterministic for fixed (seed, stream).
PathBundle simulate_joint_path(const GameModel& m, int k0, double y0,
                               double horizon, double dt, std::uint64_t seed,
                               std::uint64_t stream = 0);

// One filter step: reweight chi by the Gaussian likelihood of the increment
// dy (mean b(k,y)dt, variance sigma(y)^2 dt per state), renormalize, then
// apply the exact chain transition over dt. Likelihood first, transition
// second, matching the information timing of the discrete game. Throws
// ModelError when every posterior weight underflows (dt too large or the
// model misconfigured).
BeliefVector filter_update(const GameModel& m, const BeliefVector& chi,
                           double y, double dy, double dt);

// Folds filter_update along a uniformly spaced observation path;
// result[0] = p0.
std::vector<BeliefVector> run_filter(const GameModel& m,
                                     const std::vector<double>& y_path,
                                     double dt, const BeliefVector& p0);

// Long-format CSV: `path_id,t,x,y,chi_0,...,chi_{K-1}` after a metadata
// comment line recording the seed and step.
void write_paths_csv(const std::string& path,
                     const std::vector<PathBundle>& paths);

}  // namespace cavu
