// Command-line surface: model validation, value surfaces, the limit-value
// solve, discrete-value convergence tables and strategy simulation. Every
// command is deterministic given (model file, flags, seed); outputs carry no
// timestamps so reruns are byte-identical.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cavu/chain_filter.hpp"
#include "cavu/discrete_game.hpp"
#include "cavu/hjb_solver.hpp"
#include "cavu/model.hpp"
#include "cavu/stage_game.hpp"

namespace {

using namespace cavu;

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ModelError("cannot create output directory: " + dir);
}

std::ofstream open_out(const std::string& dir, const std::string& name) {
  ensure_dir(dir);
  const std::string path = dir + "/" + name;
  std::ofstream out(path);
  if (!out) throw ModelError("cannot open output file: " + path);
  return out;
}

void write_field_csv(std::ofstream& out, const ValueField& f,
                     const std::string& column,
                     const std::vector<std::string>& metadata) {
  for (const auto& line : metadata) out << "# " << line << "\n";
  out << "p,y," << column << "\n";
  for (int ip = 0; ip < f.grid.np; ++ip)
    for (int iy = 0; iy < f.grid.ny; ++iy)
      out << fmt(f.grid.p(ip)) << "," << fmt(f.grid.y(iy)) << ","
          << fmt(f.at(ip, iy)) << "\n";
}

std::vector<std::string> grid_metadata(const ValueField& f) {
  std::ostringstream g;
  g << "np=" << f.grid.np << " ny=" << f.grid.ny
    << " y_min=" << fmt(f.grid.y_min) << " y_max=" << fmt(f.grid.y_max);
  std::ostringstream s;
  s << "dt=" << fmt(f.dt) << " iterations=" << f.iterations
    << " final_change=" << fmt(f.final_change)
    << " converged=" << (f.converged ? 1 : 0);
  return {g.str(), s.str()};
}

// Reads a solution written by `solve`: the grid comes from the metadata
// line, values from the rows.
ValueField read_field_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw ModelError("missing solve output '" + path +
                     "': run the solve command first");
  std::string line;
  int np = 0, ny = 0;
  double y_min = 0, y_max = 0;
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::sscanf(line.c_str(), "# np=%d ny=%d y_min=%lf y_max=%lf", &np, &ny,
                  &y_min, &y_max);
      continue;
    }
    if (line[0] == 'p') continue;  // header
    const std::size_t c1 = line.find(',');
    const std::size_t c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) continue;
    values.push_back(std::strtod(line.c_str() + c2 + 1, nullptr));
  }
  if (np < 3 || ny < 3 || static_cast<int>(values.size()) != np * ny)
    throw ModelError("solve output '" + path + "' is malformed");
  ValueField f(Grid(np, ny, y_min, y_max));
  f.v = std::move(values);
  f.converged = true;
  return f;
}

int cmd_validate(const std::string& model_path, int samples) {
  const GameModel m = load_model(model_path);
  const ValidationReport rep = validate_model(m, samples);
  std::cout << rep.to_text();
  return rep.pass ? 0 : 2;
}

int cmd_u_surface(const std::string& model_path, int np, int ny,
                  const std::string& out_dir, int jobs) {
  const GameModel m = load_model(model_path);
  const Grid g(np, ny, m.y_min, m.y_max);
  const ValueField u = u_surface_field(m, g, jobs);
  auto out = open_out(out_dir, "u_surface.csv");
  write_field_csv(out, u, "u", grid_metadata(u));
  std::cout << "wrote " << out_dir << "/u_surface.csv\n";
  return 0;
}

int cmd_solve(const std::string& model_path, int np, int ny, double tol,
              int max_iter, double dt, const std::string& out_dir, int jobs) {
  const GameModel m = load_model(model_path);
  const Grid g(np, ny, m.y_min, m.y_max);
  HjbSolver solver(m, g, jobs);
  SolveOptions opt;
  opt.tol = tol;
  opt.max_iter = max_iter;
  opt.dt = dt;
  opt.jobs = jobs;
  const ValueField v = solver.solve(opt);
  const ResidualStats stats = residual_report(m, g, v);

  auto meta = grid_metadata(v);
  std::ostringstream rs;
  rs << "residual: max_abs_smooth=" << fmt(stats.max_abs_residual_smooth)
     << " mean_abs=" << fmt(stats.mean_abs_residual)
     << " active_fraction=" << fmt(stats.active_fraction)
     << " boundary_delta=" << fmt(stats.boundary_delta);
  meta.push_back(rs.str());

  auto out = open_out(out_dir, "solution.csv");
  write_field_csv(out, v, "V", meta);
  auto rep = open_out(out_dir, "residual_report.json");
  rep << stats.to_json();

  std::cout << "solve: " << (v.converged ? "converged" : "NOT converged")
            << " after " << v.iterations << " iterations, final change "
            << fmt(v.final_change) << "\n"
            << "residual max (smooth nodes) "
            << fmt(stats.max_abs_residual_smooth) << ", boundary delta "
            << fmt(stats.boundary_delta) << "\n";
  return v.converged ? 0 : 1;
}

int cmd_vn(const std::string& model_path, const std::vector<int>& n_list,
           int np, int ny, int mq, int ns, double tol,
           const std::string& out_dir, int jobs) {
  const GameModel m = load_model(model_path);
  const ValueField v = read_field_csv(out_dir + "/solution.csv");
  if (v.grid.np != np || v.grid.ny != ny)
    throw ModelError(
        "solve output grid does not match --np/--ny: rerun the solve command "
        "on the same grid");
  const Grid g(np, ny, m.y_min, m.y_max);

  auto gaps = open_out(out_dir, "vn_gaps.csv");
  gaps << "n,sup_gap_to_V,mean_gap\n";
  bool all_converged = true;
  for (int n : n_list) {
    VnOptions opt;
    opt.mq = mq;
    opt.ns = ns;
    opt.tol = tol;
    opt.jobs = jobs;
    const ValueField vn = value_iteration_vn(m, n, g, opt);
    all_converged = all_converged && vn.converged;

    double sup_gap = 0.0, mean_gap = 0.0;
    for (int id = 0; id < g.size(); ++id) {
      const double gap = std::abs(vn.v[id] - v.v[id]);
      sup_gap = std::fmax(sup_gap, gap);
      mean_gap += gap;
    }
    mean_gap /= g.size();
    gaps << n << "," << fmt(sup_gap) << "," << fmt(mean_gap) << "\n";

    auto surf = open_out(out_dir, "vn_surface_" + std::to_string(n) + ".csv");
    auto meta = grid_metadata(vn);
    meta.insert(meta.begin(), "n=" + std::to_string(n));
    write_field_csv(surf, vn, "Vn", meta);
    std::cout << "n=" << n << " sup_gap=" << fmt(sup_gap)
              << " mean_gap=" << fmt(mean_gap) << "\n";
  }
  return all_converged ? 0 : 1;
}

int cmd_play(const std::string& model_path, int n, int paths, double horizon,
             std::uint64_t seed, double p0, double y0, int np, int ny,
             double tol, const std::string& out_dir, int jobs,
             bool transcripts, bool nonrevealing) {
  const GameModel m = load_model(model_path);
  const Grid g(np, ny, m.y_min, m.y_max);
  HjbSolver solver(m, g, jobs);
  SolveOptions sopt;
  sopt.tol = tol;
  sopt.jobs = jobs;
  const ValueField v = solver.solve(sopt);
  if (!v.converged) {
    std::cerr << "value solve did not converge; refusing to build a policy\n";
    return 1;
  }
  const SplittingPolicy pol = nonrevealing
                                  ? make_nonrevealing_policy(m, g)
                                  : build_informed_strategy(m, v);

  MatchOptions opt;
  opt.num_paths = paths;
  opt.horizon = horizon > 0.0 ? horizon : 7.0 / m.discount;
  opt.seed = seed;
  opt.p0 = p0;
  opt.y0 = y0;
  opt.jobs = jobs;
  opt.record_transcripts = transcripts;
  const MatchResult res = simulate_match(m, pol, n, opt);

  const double v_start = v.bilinear(p0, y0);
  auto out = open_out(out_dir, "play_summary.csv");
  out << "estimate,std_error,num_paths,num_stages,lambda_n,truncation_budget,"
         "value_at_start,gap_to_value,split_l1_discounted\n";
  out << fmt(res.estimate) << "," << fmt(res.std_error) << "," << res.num_paths
      << "," << res.num_stages << "," << fmt(res.lambda_n) << ","
      << fmt(res.truncation_budget) << "," << fmt(v_start) << ","
      << fmt(res.estimate - v_start) << ","
      << fmt(res.split_l1_discounted) << "\n";
  if (transcripts) {
    auto tr = open_out(out_dir, "transcripts.csv");
    tr << res.transcript_csv;
  }

  std::cout << "payoff estimate " << fmt(res.estimate) << " +- "
            << fmt(res.std_error) << " (" << res.num_paths << " paths, "
            << res.num_stages << " stages)\n"
            << "value at start " << fmt(v_start) << ", gap "
            << fmt(res.estimate - v_start) << ", truncation budget "
            << fmt(res.truncation_budget) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical solver for zero-sum games with a hidden Markov "
               "chain observed through a diffusion"};
  app.require_subcommand(1);

  std::string model_path, out_dir = ".";
  int np = 101, ny = 41, max_iter = 400000, jobs = 0, samples = 201;
  double tol = 1e-6, dt = 0.0;
  std::uint64_t seed = 1;

  auto add_common = [&](CLI::App* cmd, bool needs_grid) {
    cmd->add_option("model", model_path, "model file (JSON)")->required();
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--jobs", jobs, "worker threads (0 = hardware)");
    if (needs_grid) {
      cmd->add_option("--np", np, "belief-grid points");
      cmd->add_option("--ny", ny, "observation-grid points");
    }
  };

  auto* validate = app.add_subcommand("validate", "check model assumptions");
  add_common(validate, false);
  validate->add_option("--samples", samples, "y-grid sample count");

  auto* usurf = app.add_subcommand("u-surface",
                                   "non-revealing stage value on a grid");
  add_common(usurf, true);

  auto* solve = app.add_subcommand("solve", "limit value V");
  add_common(solve, true);
  solve->add_option("--tol", tol, "fixed-point tolerance");
  solve->add_option("--max-iter", max_iter, "iteration cap");
  solve->add_option("--dt", dt, "scheme step (0 = auto)");

  std::vector<int> n_list{1, 2, 4, 8};
  int mq = 5, ns = 21;
  auto* vn = app.add_subcommand("vn", "discrete values V_n and gaps to V");
  add_common(vn, true);
  vn->add_option("--n", n_list, "discretization indices")->delimiter(',');
  vn->add_option("--mq", mq, "Gauss-Hermite nodes (3,5,7,9)");
  vn->add_option("--ns", ns, "behavior-rule grid points per coordinate");
  vn->add_option("--tol", tol, "value-iteration tolerance");

  int n_play = 8, paths = 10000;
  double horizon = 0.0, p0 = 0.5, y0 = 0.0;
  bool transcripts = false, nonrevealing = false;
  auto* play = app.add_subcommand("play",
                                  "simulate the constructed strategies");
  add_common(play, true);
  play->add_option("--n", n_play, "stage frequency");
  play->add_option("--paths", paths, "Monte Carlo paths");
  play->add_option("--horizon", horizon,
                   "time horizon (default 7/r, needs e^{-rT} <= 1e-3)");
  play->add_option("--seed", seed, "RNG seed");
  play->add_option("--p0", p0, "initial belief of state 0");
  play->add_option("--y0", y0, "initial observation level");
  play->add_option("--tol", tol, "solve tolerance for the policy field");
  play->add_flag("--transcripts", transcripts, "record per-stage transcripts");
  play->add_flag("--nonrevealing", nonrevealing,
                 "play the non-revealing baseline instead of splitting");

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) return cmd_validate(model_path, samples);
    if (usurf->parsed())
      return cmd_u_surface(model_path, np, ny, out_dir, jobs);
    if (solve->parsed())
      return cmd_solve(model_path, np, ny, tol, max_iter, dt, out_dir, jobs);
    if (vn->parsed())
      return cmd_vn(model_path, n_list, np, ny, mq, ns, tol, out_dir, jobs);
    if (play->parsed())
      return cmd_play(model_path, n_play, paths, horizon, seed, p0, y0, np,
                      ny, tol, out_dir, jobs, transcripts, nonrevealing);
  } catch (const SolverError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
