#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "cavu/chain_filter.hpp"
#include "cavu/hjb_solver.hpp"
#include "cavu/model.hpp"
#include "cavu/rng.hpp"
#include "cavu/stage_game.hpp"

using cavu::belief2;
using cavu::GameModel;
using cavu::Grid;
using cavu::HjbSolver;
using cavu::load_model;
using cavu::parse_model;
using cavu::SolveOptions;
using cavu::ValueField;

namespace {

std::string preset(const std::string& name) {
  return std::string(PRESETS_DIR) + "/" + name;
}

GameModel constant_game() { return load_model(preset("constant.json")); }
GameModel am_game() { return load_model(preset("aumann_maschler.json")); }
GameModel full_game() { return load_model(preset("full.json")); }

bool grid_concave_in_p(const ValueField& f, double tol) {
  for (int iy = 0; iy < f.grid.ny; ++iy)
    for (int ip = 1; ip + 1 < f.grid.np; ++ip) {
      const double second =
          f.at(ip + 1, iy) - 2.0 * f.at(ip, iy) + f.at(ip - 1, iy);
      if (second > tol) return false;
    }
  return true;
}

}  // namespace

TEST_CASE("hamiltonian building blocks") {
  const GameModel m = full_game();
  const cavu::BeliefVector p = belief2(0.4);
  const double y = 0.3;
  const int n = 3;

  // Zero derivatives leave only the running payoff.
  const std::vector<double> zero_grad(n, 0.0), zero_hess(n * n, 0.0);
  CHECK(cavu::hamiltonian(m, p, y, zero_grad, zero_hess) ==
        doctest::Approx(-m.discount * cavu::u_value(m, p, y)).epsilon(1e-12));

  // grad = c and zero payoff isolates -|c|^2.
  const auto fc = cavu::filter_coefficients(m, p, y);
  GameModel zero_pay = m;
  for (auto& e : zero_pay.payoff) e = cavu::Expr::parse("0");
  double c_sq = 0.0;
  for (double v : fc.c) c_sq += v * v;
  CHECK(cavu::hamiltonian(zero_pay, p, y, fc.c, zero_hess) ==
        doctest::Approx(-c_sq).epsilon(1e-12));

  // State-blind drift: kappa has no belief components, so a p-supported
  // gradient only feels the chain drift.
  const GameModel blind = parse_model(R"({
    "K": 2, "R": [[-1,1],[1,-1]], "b": ["0.3","0.3"], "sigma": "1",
    "g": {"0,0,0": "0", "0,0,1": "0", "0,1,0": "0", "0,1,1": "0",
          "1,0,0": "0", "1,0,1": "0", "1,1,0": "0", "1,1,1": "0"},
    "r": 1, "nI": 2, "nJ": 2, "eps": 0.5, "y_min": -1, "y_max": 1
  })");
  const std::vector<double> grad_p{1.0, -2.0, 0.0};
  const auto cb = cavu::drift_c(blind, p, y);
  CHECK(cavu::hamiltonian(blind, p, y, grad_p, zero_hess) ==
        doctest::Approx(-(grad_p[0] * cb[0] + grad_p[1] * cb[1]))
            .epsilon(1e-12));
}

TEST_CASE("constant game is a fixed point of the scheme step") {
  const GameModel m = constant_game();
  const Grid g(41, 11, m.y_min, m.y_max);
  HjbSolver solver(m, g);
  const ValueField u = solver.u_field();
  const ValueField stepped = solver.step(u, 0.02);
  for (int id = 0; id < g.size(); ++id)
    CHECK(std::abs(stepped.v[id] - 2.5) <= 1e-12);
}

TEST_CASE("adding a constant shifts the step output by (1 - r dt) a") {
  const GameModel m = full_game();
  const Grid g(31, 15, m.y_min, m.y_max);
  HjbSolver solver(m, g);
  const double dt = 0.01;
  ValueField base = solver.u_field();
  ValueField shifted = base;
  const double a = 0.37;
  for (auto& v : shifted.v) v += a;
  const ValueField s1 = solver.step(base, dt);
  const ValueField s2 = solver.step(shifted, dt);
  for (int id = 0; id < g.size(); ++id)
    CHECK(s2.v[id] - s1.v[id] ==
          doctest::Approx((1.0 - m.discount * dt) * a).epsilon(1e-12));
}

TEST_CASE("scheme step is monotone on random ordered pairs") {
  const GameModel m = full_game();
  const Grid g(31, 15, m.y_min, m.y_max);
  HjbSolver solver(m, g);
  cavu::Rng rng(12345);
  const double dt = solver.default_dt();
  for (int trial = 0; trial < 100; ++trial) {
    ValueField lo(g), hi(g);
    for (int id = 0; id < g.size(); ++id) {
      lo.v[id] = rng.next_uniform() * 2.0 - 1.0;
      hi.v[id] = lo.v[id] + rng.next_uniform();
    }
    const ValueField slo = solver.step(lo, dt);
    const ValueField shi = solver.step(hi, dt);
    for (int id = 0; id < g.size(); ++id)
      CHECK(slo.v[id] <= shi.v[id] + 1e-12);
  }
}

TEST_CASE("solve on the constant game converges immediately") {
  const GameModel m = constant_game();
  const Grid g(41, 11, m.y_min, m.y_max);
  const ValueField v = cavu::solve_value(m, g);
  CHECK(v.converged);
  CHECK(v.iterations <= 3);
  for (double val : v.v) CHECK(val == doctest::Approx(2.5).epsilon(1e-10));
}

TEST_CASE("solver refuses K != 2") {
  const GameModel m1 = parse_model(R"({
    "K": 1, "R": [[0]], "b": ["0"], "sigma": "1", "g": {"0,0,0": "1"},
    "r": 1, "nI": 1, "nJ": 1, "eps": 0.5, "y_min": -1, "y_max": 1
  })");
  CHECK_THROWS_AS(HjbSolver(m1, Grid(11, 11, -1, 1)), cavu::ModelError);
}

TEST_CASE("Aumann-Maschler regime recovers Cav u") {
  const GameModel m = am_game();
  const Grid g(101, 21, m.y_min, m.y_max);
  const ValueField v = cavu::solve_value(m, g);
  CHECK(v.converged);
  // u(p) = -(0.5 + 0.25 p - 0.25 p^2)/1.5 is convex with both endpoints at
  // -1/3, so its envelope is the flat chord Cav u = -1/3.
  for (int ip = 0; ip < g.np; ++ip)
    for (int iy = 0; iy < g.ny; ++iy)
      CHECK(std::abs(v.at(ip, iy) - (-1.0 / 3.0)) <= 2e-2);
  CHECK(grid_concave_in_p(v, 1e-9));
  // The envelope chord spans the whole interior.
  CHECK(v.env_active[g.idx(g.np / 2, g.ny / 2)] == 1);
}

TEST_CASE("iterates contract at least geometrically") {
  const GameModel m = full_game();
  const Grid g(41, 21, m.y_min, m.y_max);
  HjbSolver solver(m, g);
  SolveOptions opt;
  const ValueField v = solver.solve(opt);
  CHECK(v.converged);
  const auto& hist = solver.change_history();
  REQUIRE(hist.size() >= 10);
  const double dt = v.dt;
  // Geometric mean rate over the mid range of the run.
  const std::size_t a = hist.size() / 4, b = 3 * hist.size() / 4;
  const double rate = std::pow(hist[b] / hist[a], 1.0 / double(b - a));
  CHECK(rate <= 1.0 - m.discount * dt / 2.0);
}

TEST_CASE("solved fields respect the payoff bounds and concavity") {
  const GameModel m = full_game();
  const Grid g(61, 31, m.y_min, m.y_max);
  HjbSolver solver(m, g);
  const ValueField u = solver.u_field();
  const ValueField v = solver.solve();
  CHECK(v.converged);
  CHECK(v.min_value() >= u.min_value() - 1e-10);
  CHECK(v.max_value() <= u.max_value() + 1e-10);
  CHECK(grid_concave_in_p(v, 1e-9));
}

TEST_CASE("residual report on the constant game") {
  const GameModel m = constant_game();
  const Grid g(41, 11, m.y_min, m.y_max);
  const ValueField v = cavu::solve_value(m, g);
  const auto stats = cavu::residual_report(m, g, v);
  CHECK(stats.interior_nodes == (g.np - 2) * (g.ny - 2));
  CHECK(stats.max_abs_residual_smooth <= 1e-8);
  CHECK(stats.active_fraction == 0.0);
}

TEST_CASE("residual report flags the active chord on the AM game") {
  const GameModel m = am_game();
  const Grid g(101, 11, m.y_min, m.y_max);
  const ValueField v = cavu::solve_value(m, g);
  const auto stats = cavu::residual_report(m, g, v);
  // Constraint active across the interior (u is convex, the chord covers
  // the whole simplex) and the equation residual stays near zero there.
  CHECK(stats.active_fraction >= 0.95);
  CHECK(stats.max_abs_residual_smooth <= 1e-6);
}

TEST_CASE("no-information regime matches a Feynman-Kac estimate") {
  const GameModel m = load_model(preset("noinfo.json"));
  const Grid g(15, 161, m.y_min, m.y_max);
  SolveOptions opt;
  opt.dt = g.dy() * g.dy();  // unit volatility: two-point queries hit nodes
  const ValueField v = cavu::solve_value(m, g, opt);
  CHECK(v.converged);

  // p-independence to near machine precision.
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ip = 1; ip < g.np; ++ip)
      CHECK(std::abs(v.at(ip, iy) - v.at(0, iy)) <= 1e-6);

  // Monte Carlo for E[int r e^{-rt} u(Y_t) dt] with Y a unit Brownian
  // motion from y0 = 0.5; u(y) = max(0, tanh(y)/(1+tanh(y))).
  auto u_of_y = [](double y) {
    const double t = std::tanh(y);
    return t > 0.0 ? t / (1.0 + t) : 0.0;
  };
  const double y0 = 0.5, horizon = 7.0, dt = 0.002;
  const int steps = static_cast<int>(horizon / dt);
  const int paths = 20000;
  double sum = 0.0, sum_sq = 0.0;
  for (int path = 0; path < paths; ++path) {
    cavu::Rng rng(555, path);
    double y = y0, acc = 0.0, prev = u_of_y(y0);
    for (int q = 0; q < steps; ++q) {
      y += std::sqrt(dt) * rng.next_normal();
      const double cur = u_of_y(y);
      const double w = std::exp(-q * dt) - std::exp(-(q + 1) * dt);
      acc += 0.5 * (prev + cur) * w;
      prev = cur;
    }
    sum += acc;
    sum_sq += acc * acc;
  }
  const double mc = sum / paths;
  const double se =
      std::sqrt((sum_sq / paths - mc * mc) / paths);
  const double budget = 3.0 * se + m.payoff_bound() * std::exp(-horizon);
  CHECK(std::abs(v.bilinear(0.5, y0) - mc) <= budget + 5e-3);
}

TEST_CASE("hamiltonian on a three-state model") {
  // The PDE solve is two-state only, but the Hamiltonian, coefficients and
  // stage values support general K.
  const GameModel m = parse_model(R"({
    "K": 3,
    "R": [[-1, 0.5, 0.5], [0.2, -0.4, 0.2], [0.3, 0.3, -0.6]],
    "b": ["1", "0", "-1"], "sigma": "1",
    "g": {"0,0,0": "2", "0,0,1": "0", "0,1,0": "0", "0,1,1": "1",
          "1,0,0": "1", "1,0,1": "1", "1,1,0": "1", "1,1,1": "1",
          "2,0,0": "0", "2,0,1": "2", "2,1,0": "2", "2,1,1": "0"},
    "r": 0.5, "nI": 2, "nJ": 2, "eps": 0.5, "y_min": -2, "y_max": 2
  })");
  const cavu::BeliefVector p{0.5, 0.3, 0.2};
  const double y = 0.4;
  const int n = 4;
  const std::vector<double> zero_grad(n, 0.0), zero_hess(n * n, 0.0);
  CHECK(cavu::hamiltonian(m, p, y, zero_grad, zero_hess) ==
        doctest::Approx(-m.discount * cavu::u_value(m, p, y)).epsilon(1e-12));

  // Pure diffusion contraction: hess = I gives -|kappa|^2 / 2 - r u.
  std::vector<double> identity(n * n, 0.0);
  for (int i = 0; i < n; ++i) identity[i * n + i] = 1.0;
  const auto fc = cavu::filter_coefficients(m, p, y);
  double kap_sq = 0.0, mass = 0.0;
  for (int i = 0; i < n; ++i) kap_sq += fc.kappa[i] * fc.kappa[i];
  for (int i = 0; i < n - 1; ++i) mass += fc.kappa[i];
  CHECK(std::abs(mass) <= 1e-10);  // tangency holds for K = 3 as well
  CHECK(cavu::hamiltonian(m, p, y, zero_grad, identity) ==
        doctest::Approx(-0.5 * kap_sq - m.discount * cavu::u_value(m, p, y))
            .epsilon(1e-12));
}

TEST_CASE("step sizes beyond the stability bound are rejected") {
  const GameModel m = full_game();
  const Grid g(11, 7, m.y_min, m.y_max);
  HjbSolver solver(m, g);
  const ValueField u = solver.u_field();
  CHECK_THROWS_AS(solver.step(u, 1.5 / m.discount), cavu::SolverError);
  CHECK_THROWS_AS(solver.step(u, 0.0), cavu::SolverError);
}

TEST_CASE("solve honors max_iter and flags non-convergence") {
  const GameModel m = full_game();
  const Grid g(31, 15, m.y_min, m.y_max);
  SolveOptions opt;
  opt.max_iter = 3;
  const ValueField v = cavu::solve_value(m, g, opt);
  CHECK(!v.converged);
  CHECK(v.iterations == 3);
  CHECK(v.final_change > 0.0);
}

TEST_CASE("hamiltonian validates derivative dimensions") {
  const GameModel m = full_game();
  CHECK_THROWS_AS(
      cavu::hamiltonian(m, belief2(0.5), 0.0, {1.0, 2.0}, {1.0}),
      std::invalid_argument);
}

TEST_CASE("field self-convergence on common nodes") {
  const GameModel m = full_game();
  const Grid coarse(51, 31, m.y_min, m.y_max);
  const Grid fine(101, 61, m.y_min, m.y_max);
  const ValueField vc = cavu::solve_value(m, coarse);
  const ValueField vf = cavu::solve_value(m, fine);
  double sup = 0.0;
  for (int ip = 0; ip < coarse.np; ++ip)
    for (int iy = 0; iy < coarse.ny; ++iy)
      sup = std::fmax(sup, std::abs(vc.at(ip, iy) - vf.at(2 * ip, 2 * iy)));
  // First-order scheme: the coarse/fine difference is of the order of the
  // coarse spacing.
  CHECK(sup <= 1.0 * (coarse.dp() + coarse.dy()));
}

TEST_CASE("residual self-convergence under grid refinement") {
  const GameModel m = full_game();
  const Grid coarse(51, 31, m.y_min, m.y_max);
  const Grid fine(101, 61, m.y_min, m.y_max);
  // Unit volatility: dt = dy^2 aligns the two-point queries with grid rows,
  // removing the interpolation floor from the measured residual.
  SolveOptions oc, of;
  oc.dt = coarse.dy() * coarse.dy();
  of.dt = fine.dy() * fine.dy();
  const ValueField vc = cavu::solve_value(m, coarse, oc);
  const ValueField vf = cavu::solve_value(m, fine, of);
  const auto rc = cavu::residual_report(m, coarse, vc);
  const auto rf = cavu::residual_report(m, fine, vf);
  CHECK(rf.max_abs_residual_smooth <= 0.65 * rc.max_abs_residual_smooth);
}
