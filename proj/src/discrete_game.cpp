#include "cavu/discrete_game.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "cavu/chain_filter.hpp"
#include "cavu/numerics.hpp"
#include "cavu/parallel.hpp"
#include "cavu/rng.hpp"

namespace cavu {

GaussHermite gauss_hermite_nodes(int mq) {
  if (mq != 3 && mq != 5 && mq != 7 && mq != 9)
    throw std::invalid_argument("gauss_hermite_nodes supports mq in {3,5,7,9}");

  // Jacobi matrix of the probabilists' Hermite polynomials: zero diagonal,
  // off-diagonal sqrt(i). Eigenvalues are the nodes; squared first
  // eigenvector components are the weights (total mass 1).
  std::vector<double> jac(mq * mq, 0.0);
  for (int i = 1; i < mq; ++i) {
    const double off = std::sqrt(static_cast<double>(i));
    jac[(i - 1) * mq + i] = off;
    jac[i * mq + (i - 1)] = off;
  }
  std::vector<double> evals, evecs;
  jacobi_eigensym(std::move(jac), mq, evals, evecs);

  GaussHermite rule;
  rule.nodes = evals;
  rule.weights.resize(mq);
  double total = 0.0;
  for (int j = 0; j < mq; ++j) {
    const double first = evecs[0 * mq + j];
    rule.weights[j] = first * first;
    total += rule.weights[j];
  }
  for (double& w : rule.weights) w /= total;
  return rule;
}

ValueField u_surface_field(const GameModel& m, const Grid& g, int jobs) {
  ValueField f(g);
  parallel_for(g.np, jobs, [&](int begin, int end) {
    for (int ip = begin; ip < end; ++ip) {
      const BeliefVector p = belief2(g.p(ip));
      for (int iy = 0; iy < g.ny; ++iy)
        f.v[g.idx(ip, iy)] = u_value(m, p, g.y(iy));
    }
  });
  f.env_active.assign(g.size(), 0);
  return f;
}

BeliefVector posterior_after_stage(const GameModel& m, const BeliefVector& p,
                                   double y, int i, double dy, double dt,
                                   const std::vector<double>& sigma_rule) {
  const int k = m.num_states;
  const int ni = m.num_actions_p1;
  if (static_cast<int>(sigma_rule.size()) != k * ni)
    throw std::invalid_argument("sigma_rule must be K x nI");

  BeliefVector after_action(k, 0.0);
  double action_prob = 0.0;
  for (int s = 0; s < k; ++s) {
    after_action[s] = p[s] * sigma_rule[s * ni + i];
    action_prob += after_action[s];
  }
  if (action_prob <= 1e-14)
    throw ModelError("posterior_after_stage: observed action has zero "
                     "probability");
  for (double& w : after_action) w /= action_prob;

  BeliefVector transited = markov_marginal(m.generator, k, after_action, dt);

  const double sigma = m.vol_at(y);
  const double var = sigma * sigma * dt;
  BeliefVector out(k, 0.0);
  double max_exponent = -std::numeric_limits<double>::infinity();
  std::vector<double> exponent(k, -std::numeric_limits<double>::infinity());
  for (int s = 0; s < k; ++s) {
    if (transited[s] <= 0.0) continue;
    const double resid = dy - m.drift_at(s, y) * dt;
    exponent[s] = std::log(transited[s]) - resid * resid / (2.0 * var);
    max_exponent = std::fmax(max_exponent, exponent[s]);
  }
  for (int s = 0; s < k; ++s)
    if (std::isfinite(exponent[s]))
      out[s] = std::exp(exponent[s] - max_exponent);
  clip_renormalize(out);
  return out;
}

namespace {

// All points of the simplex over `actions` coordinates whose free
// coordinates lie on a uniform grid with ns points.
std::vector<std::vector<double>> simplex_grid(int actions, int ns) {
  std::vector<std::vector<double>> points;
  if (actions == 1) {
    points.push_back({1.0});
    return points;
  }
  const double step = 1.0 / (ns - 1);
  std::vector<double> current(actions, 0.0);
  // Recursive enumeration over the actions-1 free coordinates.
  std::vector<int> ticks(actions - 1, 0);
  for (;;) {
    double total = 0.0;
    for (int d = 0; d < actions - 1; ++d) {
      current[d] = ticks[d] * step;
      total += current[d];
    }
    if (total <= 1.0 + 1e-12) {
      current[actions - 1] = std::max(0.0, 1.0 - total);
      points.push_back(current);
    }
    int d = 0;
    for (; d < actions - 1; ++d) {
      if (++ticks[d] < ns) break;
      ticks[d] = 0;
    }
    if (d == actions - 1) break;
  }
  return points;
}

// Points near `center` with spacing refined by 1/(ns-1), clipped to the
// simplex; the local pass of the behavior-rule search.
std::vector<std::vector<double>> simplex_refine(const std::vector<double>& center,
                                                double step, int ns) {
  const int actions = static_cast<int>(center.size());
  std::vector<std::vector<double>> points;
  if (actions == 1) {
    points.push_back({1.0});
    return points;
  }
  const double fine = 2.0 * step / (ns - 1);
  std::vector<int> ticks(actions - 1, 0);
  std::vector<double> current(actions, 0.0);
  for (;;) {
    double total = 0.0;
    bool ok = true;
    for (int d = 0; d < actions - 1; ++d) {
      current[d] = center[d] - step + ticks[d] * fine;
      if (current[d] < -1e-12) ok = false;
      current[d] = std::max(0.0, current[d]);
      total += current[d];
    }
    if (ok && total <= 1.0 + 1e-12) {
      current[actions - 1] = std::max(0.0, 1.0 - total);
      points.push_back(current);
    }
    int d = 0;
    for (; d < actions - 1; ++d) {
      if (++ticks[d] < ns) break;
      ticks[d] = 0;
    }
    if (d == actions - 1) break;
  }
  return points;
}

struct StageContext {
  const GameModel* model;
  int n;
  double lambda, dt, sqrt_dt;
  const ValueField* w;
  const GaussHermite* gh;
  std::vector<double> trans;  // K x K matrix of exp(dt R^T), column action
};

// Value of one behavior-rule profile at a node; sigma_k[s] is the rule of
// state s over actions.
double profile_value(const StageContext& ctx, const BeliefVector& p, double y,
                     const std::vector<double>& gtab,
                     const std::vector<double>& btab, double sigma_y,
                     const std::vector<const std::vector<double>*>& sigma_k) {
  const GameModel& m = *ctx.model;
  const int k = m.num_states;
  const int ni = m.num_actions_p1;
  const int nj = m.num_actions_p2;

  // Exact inner minimum over pure replies.
  double stage_val = std::numeric_limits<double>::infinity();
  for (int j = 0; j < nj; ++j) {
    double s = 0.0;
    for (int state = 0; state < k; ++state)
      for (int i = 0; i < ni; ++i)
        s += p[state] * (*sigma_k[state])[i] * gtab[(state * ni + i) * nj + j];
    stage_val = std::fmin(stage_val, s);
  }

  double continuation = 0.0;
  BeliefVector after_action(k), transited(k), post(k);
  const double var = sigma_y * sigma_y * ctx.dt;
  for (int i = 0; i < ni; ++i) {
    double prob_i = 0.0;
    for (int state = 0; state < k; ++state) {
      after_action[state] = p[state] * (*sigma_k[state])[i];
      prob_i += after_action[state];
    }
    if (prob_i <= 1e-14) continue;
    double mean_drift = 0.0;
    for (int state = 0; state < k; ++state) {
      after_action[state] /= prob_i;
      mean_drift += after_action[state] * btab[state];
    }
    for (int to = 0; to < k; ++to) {
      double acc = 0.0;
      for (int from = 0; from < k; ++from)
        acc += ctx.trans[from * k + to] * after_action[from];
      transited[to] = acc;
    }
    for (std::size_t node = 0; node < ctx.gh->nodes.size(); ++node) {
      const double dy = mean_drift * ctx.dt +
                        sigma_y * ctx.sqrt_dt * ctx.gh->nodes[node];
      double max_exponent = -std::numeric_limits<double>::infinity();
      for (int state = 0; state < k; ++state) {
        post[state] = -std::numeric_limits<double>::infinity();
        if (transited[state] <= 0.0) continue;
        const double resid = dy - btab[state] * ctx.dt;
        post[state] = std::log(transited[state]) - resid * resid / (2.0 * var);
        max_exponent = std::fmax(max_exponent, post[state]);
      }
      double total = 0.0;
      for (int state = 0; state < k; ++state) {
        post[state] = std::isfinite(post[state])
                          ? std::exp(post[state] - max_exponent)
                          : 0.0;
        total += post[state];
      }
      const double p_next = post[0] / total;
      continuation += prob_i * ctx.gh->weights[node] *
                      ctx.w->bilinear(p_next, y + dy);
    }
  }
  return ctx.lambda * stage_val + (1.0 - ctx.lambda) * continuation;
}

}  // namespace

namespace {

// `refine` switches the local refinement pass around the coarse optimum.
// Refinement around the running argmax makes the operator discontinuous in
// W at argmax ties, so the fixed-point loop first iterates the pure-grid
// operator (continuous, monotone, (1 - lambda)-contractive), freezes the
// refinement centers at its fixed point, and then iterates the operator
// over that fixed enlarged candidate set, which is contractive again.
// `centers_in` supplies frozen per-node coarse argmax indices;
// `centers_out` records the coarse argmax of this application.
ValueField shapley_apply(const GameModel& m, int n, const Grid& g,
                         const ValueField& w, int mq, int ns, int jobs,
                         bool refine,
                         const std::vector<std::pair<int, int>>* centers_in,
                         std::vector<std::pair<int, int>>* centers_out) {
  if (m.num_states != 2)
    throw ModelError("shapley_operator requires K = 2");
  if (m.num_actions_p1 > 3 || m.num_actions_p2 > 3)
    throw ModelError("shapley_operator supports action counts <= 3");
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  if (ns < 2) throw std::invalid_argument("ns must be >= 2");

  StageContext ctx;
  ctx.model = &m;
  ctx.n = n;
  ctx.dt = 1.0 / n;
  ctx.sqrt_dt = std::sqrt(ctx.dt);
  ctx.lambda = -std::expm1(-m.discount / n);
  ctx.w = &w;
  const GaussHermite gh = gauss_hermite_nodes(mq);
  ctx.gh = &gh;

  // Columns of exp(dt R^T) from the exact marginal of each vertex belief.
  const int k = m.num_states;
  ctx.trans.assign(k * k, 0.0);
  for (int from = 0; from < k; ++from) {
    BeliefVector e(k, 0.0);
    e[from] = 1.0;
    const BeliefVector col = markov_marginal(m.generator, k, e, ctx.dt);
    for (int to = 0; to < k; ++to) ctx.trans[from * k + to] = col[to];
  }

  const std::vector<std::vector<double>> coarse =
      simplex_grid(m.num_actions_p1, ns);
  const double coarse_step = 1.0 / (ns - 1);

  ValueField out(g);
  out.env_active.assign(g.size(), 0);
  if (centers_out) centers_out->assign(g.size(), {0, 0});
  parallel_for(g.np, jobs, [&](int begin, int end) {
    std::vector<double> gtab(k * m.num_actions_p1 * m.num_actions_p2);
    std::vector<double> btab(k);
    std::vector<const std::vector<double>*> profile(k);
    for (int ip = begin; ip < end; ++ip) {
      const BeliefVector p = belief2(g.p(ip));
      for (int iy = 0; iy < g.ny; ++iy) {
        const double y = g.y(iy);
        for (int state = 0; state < k; ++state) {
          btab[state] = m.drift_at(state, y);
          for (int i = 0; i < m.num_actions_p1; ++i)
            for (int j = 0; j < m.num_actions_p2; ++j)
              gtab[(state * m.num_actions_p1 + i) * m.num_actions_p2 + j] =
                  m.payoff_at(state, y, i, j);
        }
        const double sigma_y = m.vol_at(y);

        // Coarse pass over the product of per-state simplex grids (K = 2).
        double best = -std::numeric_limits<double>::infinity();
        int best_a = 0, best_b = 0;
        for (std::size_t a = 0; a < coarse.size(); ++a) {
          profile[0] = &coarse[a];
          for (std::size_t b = 0; b < coarse.size(); ++b) {
            profile[1] = &coarse[b];
            const double val =
                profile_value(ctx, p, y, gtab, btab, sigma_y, profile);
            if (val > best) {
              best = val;
              best_a = static_cast<int>(a);
              best_b = static_cast<int>(b);
            }
          }
        }
        // One local refinement pass around the coarse optimum (or around
        // frozen centers when iterating to a fixed point).
        if (refine) {
          int ca = best_a, cb = best_b;
          if (centers_in) {
            ca = (*centers_in)[g.idx(ip, iy)].first;
            cb = (*centers_in)[g.idx(ip, iy)].second;
          }
          const std::vector<std::vector<double>> fine_a =
              simplex_refine(coarse[ca], coarse_step, ns);
          const std::vector<std::vector<double>> fine_b =
              simplex_refine(coarse[cb], coarse_step, ns);
          for (const auto& pa : fine_a) {
            profile[0] = &pa;
            for (const auto& pb : fine_b) {
              profile[1] = &pb;
              best = std::fmax(best, profile_value(ctx, p, y, gtab, btab,
                                                   sigma_y, profile));
            }
          }
        }
        if (centers_out) (*centers_out)[g.idx(ip, iy)] = {best_a, best_b};
        out.v[g.idx(ip, iy)] = best;
      }
    }
  });
  return out;
}

}  // namespace

ValueField shapley_operator(const GameModel& m, int n, const Grid& g,
                            const ValueField& w, int mq, int ns, int jobs) {
  return shapley_apply(m, n, g, w, mq, ns, jobs, /*refine=*/true, nullptr,
                       nullptr);
}

ValueField value_iteration_vn(const GameModel& m, int n, const Grid& g,
                              const VnOptions& opt) {
  const double lambda = -std::expm1(-m.discount / n);
  int max_iter = opt.max_iter;
  if (max_iter <= 0) {
    const double range = 2.0 * m.payoff_bound() + 1.0;
    max_iter = static_cast<int>(
                   std::ceil(std::log(opt.tol * lambda / range) /
                             std::log1p(-lambda))) +
               10;
  }

  // Phase 1: fixed point of the pure-grid operator.
  ValueField current = u_surface_field(m, g, opt.jobs);
  int iters = 0;
  bool coarse_ok = false;
  for (int iter = 1; iter <= max_iter; ++iter) {
    ValueField next = shapley_apply(m, n, g, current, opt.mq, opt.ns,
                                    opt.jobs, /*refine=*/false, nullptr,
                                    nullptr);
    double change = 0.0;
    for (int id = 0; id < g.size(); ++id)
      change = std::fmax(change, std::abs(next.v[id] - current.v[id]));
    iters = iter;
    next.final_change = change;
    current = std::move(next);
    if (change <= opt.tol * lambda) {
      coarse_ok = true;
      break;
    }
  }

  // Phase 2: freeze the refinement centers at the coarse optimum and iterate
  // the enlarged-candidate operator to its own fixed point.
  std::vector<std::pair<int, int>> centers;
  shapley_apply(m, n, g, current, opt.mq, opt.ns, opt.jobs, /*refine=*/false,
                nullptr, &centers);
  bool refined_ok = false;
  for (int iter = 1; iter <= max_iter; ++iter) {
    ValueField next = shapley_apply(m, n, g, current, opt.mq, opt.ns,
                                    opt.jobs, /*refine=*/true, &centers,
                                    nullptr);
    double change = 0.0;
    for (int id = 0; id < g.size(); ++id)
      change = std::fmax(change, std::abs(next.v[id] - current.v[id]));
    ++iters;
    next.final_change = change;
    current = std::move(next);
    if (change <= opt.tol * lambda) {
      refined_ok = true;
      break;
    }
  }
  current.iterations = iters;
  current.dt = 1.0 / n;
  current.converged = coarse_ok && refined_ok;
  return current;
}

SplittingPolicy::Decision SplittingPolicy::decide(double p, double y) const {
  Decision d;
  if (!splitting_enabled || chords.empty()) return d;
  int iy = static_cast<int>(
      std::lround((y - grid.y_min) / grid.dy()));
  iy = std::clamp(iy, 0, grid.ny - 1);
  for (const auto& [lo, hi] : chords[iy]) {
    if (p > lo + 1e-12 && p < hi - 1e-12) {
      d.split = true;
      d.p_lo = lo;
      d.p_hi = hi;
      d.w_hi = (p - lo) / (hi - lo);
      return d;
    }
  }
  return d;
}

SplittingPolicy build_informed_strategy(const GameModel& m,
                                        const ValueField& v) {
  if (m.num_states != 2)
    throw ModelError("build_informed_strategy requires K = 2");
  if (!v.converged)
    throw ModelError("build_informed_strategy needs a converged value field");
  if (v.env_active.empty())
    throw ModelError("value field lacks envelope metadata");

  SplittingPolicy pol;
  pol.grid = v.grid;
  pol.chords.resize(v.grid.ny);
  for (int iy = 0; iy < v.grid.ny; ++iy) {
    int ip = 1;
    while (ip < v.grid.np - 1) {
      if (v.env_active[v.grid.idx(ip, iy)]) {
        int end = ip;
        while (end < v.grid.np - 1 && v.env_active[v.grid.idx(end, iy)]) ++end;
        const int lo = std::max(ip - 1, 0);
        const int hi = std::min(end, v.grid.np - 1);
        pol.chords[iy].emplace_back(v.grid.p(lo), v.grid.p(hi));
        ip = end + 1;
      } else {
        ++ip;
      }
    }
  }
  return pol;
}

SplittingPolicy make_nonrevealing_policy(const GameModel& m, const Grid& g) {
  if (m.num_states != 2)
    throw ModelError("make_nonrevealing_policy requires K = 2");
  SplittingPolicy pol;
  pol.grid = g;
  pol.splitting_enabled = false;
  pol.chords.resize(g.ny);
  return pol;
}

std::vector<double> BayesOpponent::reply(const GameModel& m, double y) const {
  return stage_solution(m, belief, y).col_strategy;
}

MatchResult simulate_match(const GameModel& m, const SplittingPolicy& pol,
                           int n, const MatchOptions& opt) {
  if (m.num_states != 2)
    throw ModelError("simulate_match requires K = 2");
  const double lambda = -std::expm1(-m.discount / n);
  if (std::exp(-m.discount * opt.horizon) > 1e-3)
    throw ModelError(
        "simulate_match horizon too short: need e^{-rT} <= 1e-3");

  const double dt = 1.0 / n;
  const int stages = static_cast<int>(std::ceil(opt.horizon * n));
  const double g_bound = m.payoff_bound();
  const int k = m.num_states;
  const int ni = m.num_actions_p1;

  std::vector<double> values(opt.num_paths, 0.0);
  std::vector<double> split_l1(opt.num_paths, 0.0);
  std::vector<std::string> transcripts(
      opt.record_transcripts ? opt.num_paths : 0);

  // Total discount mass of the truncated sum; normalizing by it makes a
  // constant game report its constant exactly.
  const double mass = -std::expm1(static_cast<double>(stages) *
                                  std::log1p(-lambda));

  parallel_for(opt.num_paths, opt.jobs, [&](int begin, int end) {
    std::vector<double> sigma_eff(k * ni, 0.0);
    BeliefVector phat(k), reveal_probs(k);
    for (int path = begin; path < end; ++path) {
      Rng rng(opt.seed, static_cast<std::uint64_t>(path));
      phat = belief2(opt.p0);
      int x = rng.next_uniform() < opt.p0 ? 0 : 1;
      double y = opt.y0;
      double payoff = 0.0;
      double weight = lambda;
      std::string* log = opt.record_transcripts ? &transcripts[path] : nullptr;
      char line[256];

      for (int q = 0; q < stages; ++q) {
        const SplittingPolicy::Decision d = pol.decide(phat[0], y);
        BeliefVector pi = phat;  // the informed player's target posterior
        int action;
        if (d.split) {
          const BeliefVector hi = belief2(d.p_hi);
          const BeliefVector lo = belief2(d.p_lo);
          const std::vector<double> s_hi = stage_solution(m, hi, y).row_strategy;
          const std::vector<double> s_lo = stage_solution(m, lo, y).row_strategy;
          for (int s = 0; s < k; ++s)
            reveal_probs[s] =
                phat[s] > 0.0
                    ? std::clamp(d.w_hi * hi[s] / phat[s], 0.0, 1.0)
                    : d.w_hi;
          const bool take_hi = rng.next_uniform() < reveal_probs[x];
          pi = take_hi ? hi : lo;
          action = rng.next_index(take_hi ? s_hi : s_lo);
          for (int s = 0; s < k; ++s)
            for (int i = 0; i < ni; ++i)
              sigma_eff[s * ni + i] = reveal_probs[s] * s_hi[i] +
                                      (1.0 - reveal_probs[s]) * s_lo[i];
        } else {
          const std::vector<double> mix =
              stage_solution(m, phat, y).row_strategy;
          action = rng.next_index(mix);
          for (int s = 0; s < k; ++s)
            for (int i = 0; i < ni; ++i) sigma_eff[s * ni + i] = mix[i];
        }

        BayesOpponent opp{phat};
        const std::vector<double> tau = opp.reply(m, y);
        const int jaction = rng.next_index(tau);

        payoff += weight * m.payoff_at(x, y, action, jaction);

        // Post-action belief (the action-stage Bayes update only): its l1
        // distance to phat is the stage's revelation magnitude.
        double prob_i = 0.0;
        for (int s = 0; s < k; ++s) prob_i += phat[s] * sigma_eff[s * ni + action];
        double l1 = 0.0;
        for (int s = 0; s < k; ++s)
          l1 += std::abs(phat[s] * sigma_eff[s * ni + action] / prob_i - phat[s]);
        split_l1[path] += weight * l1;

        if (log) {
          std::snprintf(line, sizeof(line),
                        "%d,%d,%.17g,%d,%.17g,%d,%d,%.17g,%.17g,%.17g,%.17g\n",
                        path, q, q * dt, x, y, action, jaction, phat[0],
                        phat[1], pi[0], pi[1]);
          *log += line;
        }

        // Advance the world one stage and fold the observables into the
        // public belief.
        const double b = m.drift_at(x, y);
        const double sigma = m.vol_at(y);
        const double y_next = y + b * dt + sigma * std::sqrt(dt) * rng.next_normal();
        const int x_next = advance_chain_state(m, x, dt, rng);
        phat = posterior_after_stage(m, phat, y, action, y_next - y, dt,
                                     sigma_eff);
        x = x_next;
        y = y_next;
        weight *= 1.0 - lambda;
      }
      values[path] = payoff / mass;
    }
  });

  MatchResult res;
  res.num_paths = opt.num_paths;
  res.num_stages = stages;
  res.lambda_n = lambda;
  res.truncation_budget =
      g_bound * std::exp(static_cast<double>(stages) * std::log1p(-lambda));
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= opt.num_paths;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  res.estimate = mean;
  res.std_error = opt.num_paths > 1
                      ? std::sqrt(ss / (opt.num_paths - 1.0) / opt.num_paths)
                      : 0.0;
  double l1_mean = 0.0;
  for (double v : split_l1) l1_mean += v;
  res.split_l1_discounted = l1_mean / opt.num_paths;

  if (opt.record_transcripts) {
    std::string all = "path_id,q,t,x,y,i,j,phat_0,phat_1,pi_0,pi_1\n";
    for (const auto& t : transcripts) all += t;
    res.transcript_csv = std::move(all);
  }
  return res;
}

}  // namespace cavu
