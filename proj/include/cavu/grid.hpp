#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace cavu {

// Uniform (p, y) grid for the two-state parameterization: p in [0,1] is the
// belief weight of state 0, y spans the truncated observation domain.
struct Grid {
  int np = 0, ny = 0;
  double y_min = 0.0, y_max = 0.0;

  Grid() = default;
  Grid(int np_, int ny_, double y_min_, double y_max_)
      : np(np_), ny(ny_), y_min(y_min_), y_max(y_max_) {
    if (np < 3 || ny < 3) throw std::invalid_argument("grid needs >= 3 nodes per axis");
    if (!(y_min < y_max)) throw std::invalid_argument("grid needs y_min < y_max");
  }

  double dp() const { return 1.0 / (np - 1); }
  double dy() const { return (y_max - y_min) / (ny - 1); }
  double p(int ip) const { return static_cast<double>(ip) / (np - 1); }
  double y(int iy) const { return y_min + dy() * iy; }
  int size() const { return np * ny; }
  int idx(int ip, int iy) const { return ip * ny + iy; }
};

// Real values on a (p, y) grid together with solve metadata. The envelope
// activity mask records, per node, whether the last concavification pass
// lifted the value (the node sits strictly inside a supporting chord).
struct ValueField {
  Grid grid;
  std::vector<double> v;
  int iterations = 0;
  double final_change = 0.0;
  double dt = 0.0;
  bool converged = false;
  std::vector<std::uint8_t> env_active;

  ValueField() = default;
  explicit ValueField(const Grid& g) : grid(g), v(g.size(), 0.0) {}

  double at(int ip, int iy) const { return v[grid.idx(ip, iy)]; }
  double& at(int ip, int iy) { return v[grid.idx(ip, iy)]; }

  // Bilinear interpolation; out-of-domain queries reflect off the edges
  // (even extension, the zero-normal-derivative boundary treatment).
  static double reflect01(double t) {
    if (t < 0.0) t = -t;
    if (t > 1.0) t = 2.0 - t;
    return std::clamp(t, 0.0, 1.0);  // guards very large overshoots
  }

  double bilinear(double p, double y) const {
    const double fp = reflect01(p) * (grid.np - 1);
    const double fy =
        reflect01((y - grid.y_min) / (grid.y_max - grid.y_min)) *
        (grid.ny - 1);
    int ip = static_cast<int>(fp);
    int iy = static_cast<int>(fy);
    if (ip >= grid.np - 1) ip = grid.np - 2;
    if (iy >= grid.ny - 1) iy = grid.ny - 2;
    const double tp = fp - ip;
    const double ty = fy - iy;
    return (1.0 - tp) * ((1.0 - ty) * at(ip, iy) + ty * at(ip, iy + 1)) +
           tp * ((1.0 - ty) * at(ip + 1, iy) + ty * at(ip + 1, iy + 1));
  }

  double min_value() const {
    double m = v[0];
    for (double x : v) m = std::min(m, x);
    return m;
  }
  double max_value() const {
    double m = v[0];
    for (double x : v) m = std::max(m, x);
    return m;
  }
};

}  // namespace cavu
