#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "cavu/expr.hpp"

namespace cavu {

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A full game instance: hidden chain generator, observation coefficients,
// stage payoffs, discount rate and the truncated y-domain the numerical
// methods operate on. Immutable after parsing and safe to share across
// worker threads.
struct GameModel {
  int num_states = 0;             // K
  std::vector<double> generator;  // K*K row-major, rate(k -> k') = R[k][k']
  std::vector<Expr> drift;        // b(k, .), one expression per state
  Expr vol;                       // sigma(.)
  std::vector<Expr> payoff;       // g(k,.,i,j), index (k*nI + i)*nJ + j
  double discount = 0.0;          // r > 0
  int num_actions_p1 = 0;         // |I|
  int num_actions_p2 = 0;         // |J|
  double vol_floor = 0.0;         // eps > 0
  double y_min = 0.0, y_max = 0.0;

  double rate(int k, int k2) const { return generator[k * num_states + k2]; }

  const Expr& payoff_expr(int k, int i, int j) const {
    return payoff[(k * num_actions_p1 + i) * num_actions_p2 + j];
  }

  double payoff_at(int k, double y, int i, int j) const {
    return payoff_expr(k, i, j).eval(y);
  }
  double drift_at(int k, double y) const { return drift[k].eval(y); }
  double vol_at(double y) const { return vol.eval(y); }

  // Uniform sample of max |g| over the y-domain, used for payoff bounds
  // and discount-truncation budgets.
  double payoff_bound(int samples = 64) const;
};

// Parses the JSON model document. Throws ModelError on schema violations,
// generator-property violations (row sums, negative off-diagonal rates) and
// missing payoff entries. Payoff keys are "k,i,j" with 0-based indices.
GameModel parse_model(const std::string& json_text);

// Reads and parses a model file.
GameModel load_model(const std::string& path);

struct ValidationReport {
  bool pass = false;
  double min_sigma = 0.0;
  double min_sigma_y = 0.0;   // where the minimum was attained
  double max_abs_drift = 0.0;
  double max_abs_payoff = 0.0;
  // Finite-difference Lipschitz estimates in y over the sampled grid.
  double lip_drift = 0.0;
  double lip_sigma = 0.0;
  double lip_payoff = 0.0;
  std::vector<std::string> failures;

  std::string to_text() const;
};

// Samples sigma, b and g on `samples` uniform y-grid points, estimates
// Lipschitz constants by first differences, and checks the volatility floor
// and finiteness. Failures are carried in the report, not thrown.
ValidationReport validate_model(const GameModel& m, int samples);

}  // namespace cavu
