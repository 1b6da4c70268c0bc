#include "cavu/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace cavu {

namespace {

using nlohmann::json;

double require_number(const json& j, const char* field) {
  if (!j.contains(field) || !j[field].is_number())
    throw ModelError(std::string("model field '") + field +
                     "' missing or not a number");
  return j[field].get<double>();
}

int require_int(const json& j, const char* field) {
  if (!j.contains(field) || !j[field].is_number_integer())
    throw ModelError(std::string("model field '") + field +
                     "' missing or not an integer");
  return j[field].get<int>();
}

Expr parse_field_expr(const json& j, const std::string& what) {
  if (!j.is_string())
    throw ModelError("expression for " + what + " must be a string");
  try {
    return Expr::parse(j.get<std::string>());
  } catch (const ExprError& e) {
    throw ModelError("bad expression for " + what + ": " + e.what());
  }
}

}  // namespace

double GameModel::payoff_bound(int samples) const {
  double bound = 0.0;
  for (int s = 0; s < samples; ++s) {
    const double y =
        y_min + (y_max - y_min) * s / static_cast<double>(samples - 1);
    for (int k = 0; k < num_states; ++k)
      for (int i = 0; i < num_actions_p1; ++i)
        for (int j = 0; j < num_actions_p2; ++j)
          bound = std::fmax(bound, std::abs(payoff_at(k, y, i, j)));
  }
  return bound;
}

GameModel parse_model(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ModelError(std::string("model is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ModelError("model document must be an object");

  GameModel m;
  m.num_states = require_int(doc, "K");
  if (m.num_states < 1) throw ModelError("K must be >= 1");
  m.num_actions_p1 = require_int(doc, "nI");
  m.num_actions_p2 = require_int(doc, "nJ");
  if (m.num_actions_p1 < 1 || m.num_actions_p2 < 1)
    throw ModelError("nI and nJ must be >= 1");
  m.discount = require_number(doc, "r");
  if (m.discount <= 0.0) throw ModelError("discount r must be > 0");
  m.vol_floor = require_number(doc, "eps");
  if (m.vol_floor <= 0.0) throw ModelError("eps must be > 0");
  m.y_min = require_number(doc, "y_min");
  m.y_max = require_number(doc, "y_max");
  if (!(m.y_min < m.y_max)) throw ModelError("need y_min < y_max");

  const int K = m.num_states;
  if (!doc.contains("R") || !doc["R"].is_array() ||
      static_cast<int>(doc["R"].size()) != K)
    throw ModelError("R must be a K x K array");
  m.generator.assign(K * K, 0.0);
  for (int k = 0; k < K; ++k) {
    const json& row = doc["R"][k];
    if (!row.is_array() || static_cast<int>(row.size()) != K)
      throw ModelError("R row " + std::to_string(k) + " must have K entries");
    for (int k2 = 0; k2 < K; ++k2) {
      if (!row[k2].is_number())
        throw ModelError("R[" + std::to_string(k) + "][" +
                         std::to_string(k2) + "] is not a number");
      m.generator[k * K + k2] = row[k2].get<double>();
    }
  }
  // Generator property: rows sum to zero, off-diagonal rates nonnegative.
  for (int k = 0; k < K; ++k) {
    double row_sum = 0.0;
    for (int k2 = 0; k2 < K; ++k2) {
      row_sum += m.generator[k * K + k2];
      if (k2 != k && m.generator[k * K + k2] < 0.0)
        throw ModelError("negative off-diagonal rate in R row " +
                         std::to_string(k));
    }
    if (std::abs(row_sum) > 1e-12)
      throw ModelError("row sum nonzero in R row " + std::to_string(k) +
                       " (sum = " + std::to_string(row_sum) + ")");
  }

  if (!doc.contains("b") || !doc["b"].is_array() ||
      static_cast<int>(doc["b"].size()) != K)
    throw ModelError("b must be an array of K expressions");
  m.drift.reserve(K);
  for (int k = 0; k < K; ++k)
    m.drift.push_back(parse_field_expr(doc["b"][k], "b[" + std::to_string(k) + "]"));

  if (!doc.contains("sigma"))
    throw ModelError("model field 'sigma' missing");
  m.vol = parse_field_expr(doc["sigma"], "sigma");

  if (!doc.contains("g") || !doc["g"].is_object())
    throw ModelError("g must be an object keyed by \"k,i,j\"");
  m.payoff.assign(K * m.num_actions_p1 * m.num_actions_p2, Expr());
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < m.num_actions_p1; ++i)
      for (int j = 0; j < m.num_actions_p2; ++j) {
        const std::string key = std::to_string(k) + "," + std::to_string(i) +
                                "," + std::to_string(j);
        if (!doc["g"].contains(key))
          throw ModelError("missing payoff entry g[\"" + key + "\"]");
        m.payoff[(k * m.num_actions_p1 + i) * m.num_actions_p2 + j] =
            parse_field_expr(doc["g"][key], "g[\"" + key + "\"]");
      }

  return m;
}

GameModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open model file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

ValidationReport validate_model(const GameModel& m, int samples) {
  ValidationReport rep;
  if (samples < 2) samples = 2;
  const double step = (m.y_max - m.y_min) / (samples - 1);

  rep.min_sigma = std::numeric_limits<double>::infinity();
  double prev_sigma = 0.0;
  std::vector<double> prev_b(m.num_states, 0.0);
  std::vector<double> prev_g(m.payoff.size(), 0.0);

  bool finite_ok = true;
  for (int s = 0; s < samples; ++s) {
    const double y = m.y_min + step * s;
    double sigma = 0.0;
    try {
      sigma = m.vol_at(y);
    } catch (const EvalError&) {
      finite_ok = false;
      rep.failures.push_back("sigma not finite at y = " + std::to_string(y));
      continue;
    }
    if (sigma < rep.min_sigma) {
      rep.min_sigma = sigma;
      rep.min_sigma_y = y;
    }
    if (s > 0)
      rep.lip_sigma = std::fmax(rep.lip_sigma,
                                std::abs(sigma - prev_sigma) / step);
    prev_sigma = sigma;

    for (int k = 0; k < m.num_states; ++k) {
      double b = 0.0;
      try {
        b = m.drift_at(k, y);
      } catch (const EvalError&) {
        finite_ok = false;
        rep.failures.push_back("b[" + std::to_string(k) +
                               "] not finite at y = " + std::to_string(y));
        continue;
      }
      rep.max_abs_drift = std::fmax(rep.max_abs_drift, std::abs(b));
      if (s > 0)
        rep.lip_drift =
            std::fmax(rep.lip_drift, std::abs(b - prev_b[k]) / step);
      prev_b[k] = b;
    }

    for (int k = 0; k < m.num_states; ++k)
      for (int i = 0; i < m.num_actions_p1; ++i)
        for (int j = 0; j < m.num_actions_p2; ++j) {
          const int idx = (k * m.num_actions_p1 + i) * m.num_actions_p2 + j;
          double g = 0.0;
          try {
            g = m.payoff_at(k, y, i, j);
          } catch (const EvalError&) {
            finite_ok = false;
            rep.failures.push_back("g not finite at y = " + std::to_string(y));
            continue;
          }
          rep.max_abs_payoff = std::fmax(rep.max_abs_payoff, std::abs(g));
          if (s > 0)
            rep.lip_payoff =
                std::fmax(rep.lip_payoff, std::abs(g - prev_g[idx]) / step);
          prev_g[idx] = g;
        }
  }

  if (rep.min_sigma < m.vol_floor) {
    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "sigma(%.6g) = %.6g below floor eps = %.6g",
                  rep.min_sigma_y, rep.min_sigma, m.vol_floor);
    rep.failures.push_back(buf);
  }
  rep.pass = finite_ok && rep.min_sigma >= m.vol_floor;
  return rep;
}

std::string ValidationReport::to_text() const {
  std::ostringstream out;
  out << "validation: " << (pass ? "PASS" : "FAIL") << "\n";
  out << "  min sigma     " << min_sigma << " (at y = " << min_sigma_y
      << ")\n";
  out << "  max |b|       " << max_abs_drift << "\n";
  out << "  max |g|       " << max_abs_payoff << "\n";
  out << "  Lipschitz b   " << lip_drift << "\n";
  out << "  Lipschitz sig " << lip_sigma << "\n";
  out << "  Lipschitz g   " << lip_payoff << "\n";
  for (const auto& f : failures) out << "  failure: " << f << "\n";
  return out.str();
}

}  // namespace cavu
