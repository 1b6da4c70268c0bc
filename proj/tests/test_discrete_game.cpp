#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "cavu/discrete_game.hpp"
#include "cavu/hjb_solver.hpp"
#include "cavu/model.hpp"
#include "cavu/rng.hpp"
#include "cavu/stage_game.hpp"

using cavu::belief2;
using cavu::BeliefVector;
using cavu::GameModel;
using cavu::gauss_hermite_nodes;
using cavu::Grid;
using cavu::load_model;
using cavu::MatchOptions;
using cavu::MatchResult;
using cavu::parse_model;
using cavu::posterior_after_stage;
using cavu::shapley_operator;
using cavu::SplittingPolicy;
using cavu::u_surface_field;
using cavu::ValueField;
using cavu::VnOptions;

namespace {

std::string preset(const std::string& name) {
  return std::string(PRESETS_DIR) + "/" + name;
}

double gh_moment(const cavu::GaussHermite& rule, int power) {
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i)
    acc += rule.weights[i] * std::pow(rule.nodes[i], power);
  return acc;
}

}  // namespace

TEST_CASE("gauss hermite rules integrate normal moments exactly") {
  for (int mq : {3, 5, 7, 9}) {
    const auto rule = gauss_hermite_nodes(mq);
    CHECK(gh_moment(rule, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(gh_moment(rule, 1) == doctest::Approx(0.0).scale(1).epsilon(1e-12));
    CHECK(gh_moment(rule, 2) == doctest::Approx(1.0).epsilon(1e-12));
    if (mq >= 5) {
      CHECK(gh_moment(rule, 3) == doctest::Approx(0.0).scale(1).epsilon(1e-12));
      CHECK(gh_moment(rule, 4) == doctest::Approx(3.0).epsilon(1e-11));
    }
    if (mq >= 7) CHECK(gh_moment(rule, 6) == doctest::Approx(15.0).epsilon(1e-11));
    if (mq >= 9) CHECK(gh_moment(rule, 8) == doctest::Approx(105.0).epsilon(1e-10));
  }
  CHECK_THROWS_AS(gauss_hermite_nodes(4), std::invalid_argument);
}

TEST_CASE("posterior after stage: non-revealing and revealing actions") {
  const GameModel m = load_model(preset("aumann_maschler.json"));
  // sigma(i|k) independent of k: the action stage is a no-op; with R = 0 and
  // state-blind b the whole update is a no-op.
  const std::vector<double> blind{0.7, 0.3, 0.7, 0.3};
  const BeliefVector same =
      posterior_after_stage(m, belief2(0.4), 0.0, 0, 0.1, 0.1, blind);
  CHECK(same[0] == doctest::Approx(0.4).epsilon(1e-12));

  // Fully revealing action.
  const std::vector<double> reveal{1.0, 0.0, 0.0, 1.0};
  const BeliefVector sure =
      posterior_after_stage(m, belief2(0.5), 0.0, 0, 0.0, 0.1, reveal);
  CHECK(sure[0] == doctest::Approx(1.0).epsilon(1e-12));

  // Zero-probability action.
  CHECK_THROWS_AS(
      posterior_after_stage(m, belief2(0.0), 0.0, 0, 0.0, 0.1, reveal),
      cavu::ModelError);
}

TEST_CASE("posterior after stage against an independent Bayes computation") {
  // K = 2, R = 0, b = (1, -1), sigma = 1, dt = 0.1, dy = 0.2, i = 0 with
  // sigma(0|state0) = 0.8, sigma(0|state1) = 0.4 from p = (1/2, 1/2).
  const GameModel m = parse_model(R"({
    "K": 2, "R": [[0,0],[0,0]], "b": ["1","-1"], "sigma": "1",
    "g": {"0,0,0": "0", "0,0,1": "0", "0,1,0": "0", "0,1,1": "0",
          "1,0,0": "0", "1,0,1": "0", "1,1,0": "0", "1,1,1": "0"},
    "r": 1, "nI": 2, "nJ": 2, "eps": 0.5, "y_min": -2, "y_max": 2
  })");
  const std::vector<double> rule{0.8, 0.2, 0.4, 0.6};
  const double dt = 0.1, dy = 0.2;
  const BeliefVector post =
      posterior_after_stage(m, belief2(0.5), 0.0, 0, dy, dt, rule);

  // Oracle: multiply the action and Gaussian likelihood factors by hand.
  const double a0 = 0.5 * 0.8, a1 = 0.5 * 0.4;  // action stage
  const double l0 = std::exp(-(dy - 1.0 * dt) * (dy - 1.0 * dt) / (2 * dt));
  const double l1 = std::exp(-(dy + 1.0 * dt) * (dy + 1.0 * dt) / (2 * dt));
  const double oracle = a0 * l0 / (a0 * l0 + a1 * l1);
  CHECK(post[0] == doctest::Approx(oracle).epsilon(1e-12));
  // Frozen oracle output.
  CHECK(post[0] == doctest::Approx(0.7489738928370039).epsilon(1e-9));
  CHECK(post[0] + post[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("constant game is a fixed point of the stage operator") {
  const GameModel m = load_model(preset("constant.json"));
  const Grid g(15, 9, m.y_min, m.y_max);
  ValueField w(g);
  for (auto& v : w.v) v = 2.5;
  const ValueField out = shapley_operator(m, 4, g, w, 3, 7);
  for (double v : out.v) CHECK(v == doctest::Approx(2.5).epsilon(1e-10));
}

TEST_CASE("stage operator contracts with factor (1 - lambda_n)") {
  const GameModel m = load_model(preset("full.json"));
  const Grid g(13, 9, m.y_min, m.y_max);
  const double lambda = -std::expm1(-m.discount / 4);
  cavu::Rng rng(31);
  for (int trial = 0; trial < 8; ++trial) {
    ValueField w1(g), w2(g);
    double gap = 0.0;
    for (int id = 0; id < g.size(); ++id) {
      w1.v[id] = rng.next_uniform() - 0.5;
      w2.v[id] = rng.next_uniform() - 0.5;
      gap = std::fmax(gap, std::abs(w1.v[id] - w2.v[id]));
    }
    const ValueField t1 = shapley_operator(m, 4, g, w1, 3, 7);
    const ValueField t2 = shapley_operator(m, 4, g, w2, 3, 7);
    double tgap = 0.0;
    for (int id = 0; id < g.size(); ++id)
      tgap = std::fmax(tgap, std::abs(t1.v[id] - t2.v[id]));
    CHECK(tgap <= (1.0 - lambda) * gap + 1e-10);
  }
}

TEST_CASE("one-shot operator value against brute-force enumeration") {
  const GameModel m = load_model(preset("aumann_maschler.json"));
  const Grid g(5, 3, m.y_min, m.y_max);
  ValueField zero(g);  // no continuation
  const int ns = 11;
  const ValueField out = shapley_operator(m, 1, g, zero, 3, ns);
  const double lambda = -std::expm1(-m.discount);

  // Independent enumeration of sup_{sigma-grid} min_j of the stage payoff
  // at the same five belief nodes; continuation vanishes, so only the
  // lambda-weighted stage term remains.
  for (int ip = 0; ip < g.np; ++ip) {
    const double p = g.p(ip);
    double best = -1e300;
    for (int ai = 0; ai <= ns - 1; ++ai)
      for (int bi = 0; bi <= ns - 1; ++bi) {
        const double a = ai / double(ns - 1);  // sigma(action 0 | state 0)
        const double b = bi / double(ns - 1);  // sigma(action 0 | state 1)
        double worst = 1e300;
        for (int j = 0; j < 2; ++j) {
          double s = 0.0;
          for (int k = 0; k < 2; ++k) {
            const double w = k == 0 ? p : 1 - p;
            const double s0 = k == 0 ? a : b;
            s += w * (s0 * m.payoff_at(k, 0.0, 0, j) +
                      (1 - s0) * m.payoff_at(k, 0.0, 1, j));
          }
          worst = std::fmin(worst, s);
        }
        best = std::fmax(best, worst);
      }
    const double got = out.at(ip, 1);
    CHECK(got >= lambda * best - 1e-10);  // refinement can only improve
    // Sandwich: u <= one-shot value <= Cav u + one-stage revelation bonus.
    // Here u(p) = -(0.5 + 0.25 p - 0.25 p^2)/1.5, Cav u = -1/3, and the
    // best one-shot map earns at most 1/12 above the envelope.
    const double u = -(0.5 + 0.25 * p - 0.25 * p * p) / 1.5;
    CHECK(got / lambda >= u - 0.01);  // sigma-grid slack
    CHECK(got / lambda <= -1.0 / 3.0 + 1.0 / 12.0 + 0.02);
  }
}

TEST_CASE("value iteration: constant game and convergence flags") {
  const GameModel m = load_model(preset("constant.json"));
  const Grid g(11, 7, m.y_min, m.y_max);
  VnOptions opt;
  opt.mq = 3;
  opt.ns = 5;
  const ValueField vn = cavu::value_iteration_vn(m, 2, g, opt);
  CHECK(vn.converged);
  for (double v : vn.v) CHECK(v == doctest::Approx(2.5).epsilon(1e-6));
}

TEST_CASE("V_n in the Aumann-Maschler regime approaches Cav u from above") {
  const GameModel m = load_model(preset("aumann_maschler.json"));
  const Grid g(21, 5, m.y_min, m.y_max);
  VnOptions opt;
  opt.mq = 3;
  opt.ns = 11;
  double prev_gap = 1e300;
  for (int n : {1, 2, 4}) {
    const ValueField vn = cavu::value_iteration_vn(m, n, g, opt);
    CHECK(vn.converged);
    double gap = 0.0;
    for (double v : vn.v) {
      gap = std::fmax(gap, std::abs(v - (-1.0 / 3.0)));
      CHECK(v >= -1.0 / 3.0 - 0.01);  // above Cav u modulo grid slack
    }
    CHECK(gap <= prev_gap * 1.10 + 1e-12);
    prev_gap = gap;
  }
  CHECK(prev_gap <= 0.10);  // n = 4 already sits near the limit value
}

TEST_CASE("splitting policy from the solved AM field") {
  const GameModel m = load_model(preset("aumann_maschler.json"));
  const Grid g(101, 5, m.y_min, m.y_max);
  const ValueField v = cavu::solve_value(m, g);
  REQUIRE(v.converged);
  const SplittingPolicy pol = cavu::build_informed_strategy(m, v);

  const auto d = pol.decide(0.5, 0.0);
  REQUIRE(d.split);
  CHECK(d.p_lo == doctest::Approx(0.0));
  CHECK(d.p_hi == doctest::Approx(1.0));
  CHECK(d.w_hi == doctest::Approx(0.5).epsilon(1e-12));

  // Martingale identity: the split posteriors average back to the prior.
  for (double p : {0.2, 0.35, 0.6, 0.9}) {
    const auto dd = pol.decide(p, 0.0);
    REQUIRE(dd.split);
    CHECK(dd.w_hi * dd.p_hi + (1 - dd.w_hi) * dd.p_lo ==
          doctest::Approx(p).epsilon(1e-10));
  }

  // Vertices never split.
  CHECK(!pol.decide(0.0, 0.0).split);
  CHECK(!pol.decide(1.0, 0.0).split);

  // An unconverged field is rejected.
  ValueField raw = u_surface_field(m, g);
  CHECK_THROWS_AS(cavu::build_informed_strategy(m, raw), cavu::ModelError);
}

TEST_CASE("match on the constant game pays the constant exactly") {
  const GameModel m = load_model(preset("constant.json"));
  const Grid g(11, 5, m.y_min, m.y_max);
  const SplittingPolicy pol = cavu::make_nonrevealing_policy(m, g);
  MatchOptions opt;
  opt.num_paths = 50;
  opt.horizon = 8.0;
  opt.seed = 3;
  const MatchResult res = cavu::simulate_match(m, pol, 4, opt);
  CHECK(res.estimate == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(res.std_error == doctest::Approx(0.0).scale(1).epsilon(1e-12));
  CHECK(res.truncation_budget <= 2.5 * 1e-3 + 1e-12);
}

TEST_CASE("match is deterministic per seed") {
  const GameModel m = load_model(preset("aumann_maschler.json"));
  const Grid g(41, 5, m.y_min, m.y_max);
  const ValueField v = cavu::solve_value(m, g);
  const SplittingPolicy pol = cavu::build_informed_strategy(m, v);
  MatchOptions opt;
  opt.num_paths = 200;
  opt.horizon = 7.0;
  opt.seed = 77;
  opt.record_transcripts = true;
  const MatchResult a = cavu::simulate_match(m, pol, 8, opt);
  const MatchResult b = cavu::simulate_match(m, pol, 8, opt);
  CHECK(a.estimate == b.estimate);
  CHECK(a.std_error == b.std_error);
  CHECK(a.transcript_csv == b.transcript_csv);
  opt.seed = 78;
  const MatchResult c = cavu::simulate_match(m, pol, 8, opt);
  CHECK(a.transcript_csv != c.transcript_csv);
}

TEST_CASE("splitting beats non-revealing play where u is non-concave") {
  const GameModel m = load_model(preset("aumann_maschler.json"));
  const Grid g(101, 5, m.y_min, m.y_max);
  const ValueField v = cavu::solve_value(m, g);
  const SplittingPolicy split_pol = cavu::build_informed_strategy(m, v);
  const SplittingPolicy nr_pol = cavu::make_nonrevealing_policy(m, g);

  MatchOptions opt;
  opt.num_paths = 3000;
  opt.horizon = 7.0;
  opt.seed = 11;
  opt.p0 = 0.5;
  const MatchResult split = cavu::simulate_match(m, split_pol, 32, opt);
  const MatchResult nr = cavu::simulate_match(m, nr_pol, 32, opt);

  // Cav u(1/2) = -1/3 for this game; u(1/2) = -0.375.
  CHECK(std::abs(split.estimate - (-1.0 / 3.0)) <=
        std::fmax(3.0 * split.std_error, 5e-2));
  CHECK(nr.estimate <= split.estimate + 3.0 * nr.std_error);
  CHECK(std::abs(nr.estimate - (-0.375)) <= 3.0 * nr.std_error + 5e-3);

  // Discrete analogue of the uninformed player's martingale estimate.
  const double lambda = split.lambda_n;
  double big_lambda = 0.0;
  for (int k = 0; k < 2; ++k)
    big_lambda = std::fmax(big_lambda, -m.rate(k, k));
  const double c_bound = 2.0 * big_lambda;
  CHECK(split.split_l1_discounted <=
        2.0 * std::sqrt(lambda + 2.0 * c_bound / 32.0) + 1e-12);
}

TEST_CASE("simulated play approaches the solved limit value as n grows") {
  const GameModel m = load_model(preset("full.json"));
  const Grid g(51, 31, m.y_min, m.y_max);
  cavu::SolveOptions sopt;
  sopt.dt = g.dy() * g.dy();
  const ValueField v = cavu::solve_value(m, g, sopt);
  const SplittingPolicy pol = cavu::build_informed_strategy(m, v);
  const double v_start = v.bilinear(0.5, -0.5);

  MatchOptions opt;
  opt.num_paths = 10000;
  opt.horizon = 7.0;
  opt.seed = 42;
  opt.p0 = 0.5;
  opt.y0 = -0.5;
  const MatchResult coarse = cavu::simulate_match(m, pol, 4, opt);
  const MatchResult fine = cavu::simulate_match(m, pol, 32, opt);
  const double gap_coarse = coarse.estimate - v_start;
  const double gap_fine = fine.estimate - v_start;
  // Faster play closes in on V from above.
  CHECK(gap_coarse >= 0.002);
  CHECK(gap_coarse <= 0.02);
  CHECK(std::abs(gap_fine) <= 0.004);
  CHECK(std::abs(gap_fine) < std::abs(gap_coarse));
}

TEST_CASE("payoff estimates stay within the payoff bounds") {
  const GameModel m = load_model(preset("full.json"));
  const Grid g(41, 21, m.y_min, m.y_max);
  const ValueField v = cavu::solve_value(m, g);
  const SplittingPolicy pol = cavu::build_informed_strategy(m, v);
  MatchOptions opt;
  opt.num_paths = 500;
  opt.horizon = 7.0;
  opt.seed = 5;
  opt.p0 = 0.4;
  opt.y0 = -0.5;
  const MatchResult res = cavu::simulate_match(m, pol, 8, opt);
  const double bound = m.payoff_bound();
  CHECK(res.estimate >= -bound - res.truncation_budget);
  CHECK(res.estimate <= bound + res.truncation_budget);
}
