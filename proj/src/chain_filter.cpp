#include "cavu/chain_filter.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace cavu {

std::vector<double> drift_c(const GameModel& m, const BeliefVector& p,
                            double y) {
  const int k = m.num_states;
  std::vector<double> c(k + 1, 0.0);
  for (int to = 0; to < k; ++to) {
    double acc = 0.0;
    for (int from = 0; from < k; ++from) acc += m.rate(from, to) * p[from];
    c[to] = acc;
  }
  double mean_drift = 0.0;
  for (int s = 0; s < k; ++s) mean_drift += p[s] * m.drift_at(s, y);
  c[k] = mean_drift;
  return c;
}

std::vector<double> diff_kappa(const GameModel& m, const BeliefVector& p,
                               double y) {
  const int k = m.num_states;
  const double sigma = m.vol_at(y);
  if (sigma < m.vol_floor)
    throw ModelError("sigma(y) below the volatility floor at y = " +
                     std::to_string(y));
  std::vector<double> kap(k + 1, 0.0);
  double mean_drift = 0.0;
  std::vector<double> b(k);
  for (int s = 0; s < k; ++s) {
    b[s] = m.drift_at(s, y);
    mean_drift += p[s] * b[s];
  }
  for (int s = 0; s < k; ++s) kap[s] = p[s] / sigma * (b[s] - mean_drift);
  kap[k] = sigma;
  return kap;
}

FilterCoefficients filter_coefficients(const GameModel& m,
                                       const BeliefVector& p, double y) {
  return FilterCoefficients{drift_c(m, p, y), diff_kappa(m, p, y)};
}

BeliefVector markov_marginal(const std::vector<double>& generator, int k,
                             const BeliefVector& p, double t) {
  if (t < 0.0) throw ModelError("markov_marginal needs t >= 0");
  double lambda = 0.0;
  for (int s = 0; s < k; ++s)
    lambda = std::fmax(lambda, -generator[s * k + s]);
  if (lambda * t == 0.0) return p;

  // Keep the Poisson mean moderate so e^{-lambda t} stays representable;
  // the interval split is exact by the semigroup property.
  if (lambda * t > 30.0) {
    BeliefVector half = markov_marginal(generator, k, p, 0.5 * t);
    return markov_marginal(generator, k, half, 0.5 * t);
  }

  // term_m = (Lambda t)^m / m! e^{-Lambda t} * (P^T)^m p with
  // P = I + R / Lambda stochastic.
  BeliefVector power = p;
  BeliefVector result(k, 0.0);
  double weight = std::exp(-lambda * t);
  double accumulated = weight;
  for (int s = 0; s < k; ++s) result[s] += weight * power[s];

  const int max_terms = static_cast<int>(lambda * t + 40.0 * std::sqrt(lambda * t) + 64.0);
  for (int mterm = 1; mterm <= max_terms; ++mterm) {
    BeliefVector next(k, 0.0);
    for (int to = 0; to < k; ++to) {
      double acc = power[to];
      for (int from = 0; from < k; ++from)
        acc += generator[from * k + to] * power[from] / lambda;
      next[to] = acc;
    }
    power.swap(next);
    weight *= lambda * t / mterm;
    for (int s = 0; s < k; ++s) result[s] += weight * power[s];
    accumulated += weight;
    if (1.0 - accumulated <= 1e-13) break;
  }
  clip_renormalize(result);
  return result;
}

int advance_chain_state(const GameModel& m, int state, double dt, Rng& rng) {
  double remaining = dt;
  for (;;) {
    const double exit_rate = -m.rate(state, state);
    if (exit_rate <= 0.0) return state;
    const double hold = rng.next_exponential(exit_rate);
    if (hold >= remaining) return state;
    remaining -= hold;
    // Jump distribution over the other states.
    double u = rng.next_uniform() * exit_rate;
    int next = state;
    for (int s = 0; s < m.num_states; ++s) {
      if (s == state) continue;
      u -= m.rate(state, s);
      if (u < 0.0) {
        next = s;
        break;
      }
      next = s;  // roundoff fallback: last candidate
    }
    state = next;
  }
}

PathBundle simulate_joint_path(const GameModel& m, int k0, double y0,
                               double horizon, double dt, std::uint64_t seed,
                               std::uint64_t stream) {
  if (!(dt > 0.0) || horizon < dt)
    throw ModelError("simulate_joint_path needs dt > 0 and horizon >= dt");
  if (k0 < 0 || k0 >= m.num_states)
    throw ModelError("initial state out of range");

  const int steps = static_cast<int>(std::llround(horizon / dt));
  PathBundle out;
  out.dt = dt;
  out.seed = seed;
  out.times.resize(steps + 1);
  out.x_path.resize(steps + 1);
  out.y_path.resize(steps + 1);

  Rng rng(seed, stream);
  int state = k0;
  double y = y0;
  const double sqrt_dt = std::sqrt(dt);
  for (int q = 0; q <= steps; ++q) {
    out.times[q] = q * dt;
    out.x_path[q] = state;
    out.y_path[q] = y;
    if (q == steps) break;
    const double b = m.drift_at(state, y);
    const double sigma = m.vol_at(y);
    y += b * dt + sigma * sqrt_dt * rng.next_normal();
    state = advance_chain_state(m, state, dt, rng);
  }
  return out;
}

BeliefVector filter_update(const GameModel& m, const BeliefVector& chi,
                           double y, double dy, double dt) {
  if (!(dt > 0.0)) throw ModelError("filter_update needs dt > 0");
  const int k = m.num_states;
  const double sigma = m.vol_at(y);
  const double var = sigma * sigma * dt;
  const double log_norm = -0.5 * std::log(6.28318530717958647692 * var);

  std::vector<double> logw(k, -std::numeric_limits<double>::infinity());
  double max_logw = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < k; ++s) {
    if (chi[s] <= 0.0) continue;
    const double mean = m.drift_at(s, y) * dt;
    const double resid = dy - mean;
    logw[s] = std::log(chi[s]) + log_norm - resid * resid / (2.0 * var);
    max_logw = std::fmax(max_logw, logw[s]);
  }
  // All raw posterior weights below 1e-300: the Gaussian model cannot
  // explain the observed increment at this step size.
  if (max_logw < -690.7755278982137) {
    throw ModelError(
        "filter_update: total likelihood underflow (dt too large or model "
        "misconfigured)");
  }

  BeliefVector reweighted(k, 0.0);
  for (int s = 0; s < k; ++s)
    if (std::isfinite(logw[s])) reweighted[s] = std::exp(logw[s] - max_logw);
  clip_renormalize(reweighted);

  return markov_marginal(m.generator, k, reweighted, dt);
}

std::vector<BeliefVector> run_filter(const GameModel& m,
                                     const std::vector<double>& y_path,
                                     double dt, const BeliefVector& p0) {
  std::vector<BeliefVector> chi;
  chi.reserve(y_path.size());
  BeliefVector current = p0;
  clip_renormalize(current);
  chi.push_back(current);
  for (std::size_t q = 0; q + 1 < y_path.size(); ++q) {
    current = filter_update(m, current, y_path[q], y_path[q + 1] - y_path[q],
                            dt);
    chi.push_back(current);
  }
  return chi;
}

void write_paths_csv(const std::string& path,
                     const std::vector<PathBundle>& paths) {
  std::ofstream out(path);
  if (!out) throw ModelError("cannot open output file: " + path);
  char buf[64];
  if (!paths.empty()) {
    std::snprintf(buf, sizeof(buf), "# seed=%llu dt=%.17g",
                  static_cast<unsigned long long>(paths[0].seed),
                  paths[0].dt);
    out << buf << "\n";
  }
  const int k = paths.empty() || paths[0].chi_path.empty()
                    ? 0
                    : static_cast<int>(paths[0].chi_path[0].size());
  out << "path_id,t,x,y";
  for (int s = 0; s < k; ++s) out << ",chi_" << s;
  out << "\n";
  for (std::size_t pid = 0; pid < paths.size(); ++pid) {
    const PathBundle& pb = paths[pid];
    for (std::size_t q = 0; q < pb.times.size(); ++q) {
      std::snprintf(buf, sizeof(buf), "%zu,%.17g,%d,%.17g", pid, pb.times[q],
                    pb.x_path[q], pb.y_path[q]);
      out << buf;
      if (!pb.chi_path.empty())
        for (int s = 0; s < k; ++s) {
          std::snprintf(buf, sizeof(buf), ",%.17g", pb.chi_path[q][s]);
          out << buf;
        }
      out << "\n";
    }
  }
}

}  // namespace cavu
