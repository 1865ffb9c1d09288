#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace blab {

inline Eigen::ArrayXd log_grid(double rmin, double rmax, int n) {
  if (!(rmin > 0.0) || !(rmax > rmin) || n < 2) throw std::invalid_argument("log_grid: bad arguments");
  Eigen::ArrayXd g(n);
  const double a = std::log(rmin), b = std::log(rmax);
  for (int i = 0; i < n; ++i) g[i] = std::exp(a + (b - a) * i / (n - 1));
  g[0] = rmin;
  g[n - 1] = rmax;
  return g;
}

// Radial profile on a strictly increasing grid. Evaluation between nodes is
// cubic: Hermite on solver-filled derivatives when present, otherwise
// monotone (Fritsch-Carlson) slopes. Extrapolation is refused.
class RadialFunction {
 public:
  Eigen::ArrayXd grid, values, deriv;

  RadialFunction() = default;
  RadialFunction(Eigen::ArrayXd g, Eigen::ArrayXd v) : grid(std::move(g)), values(std::move(v)) {
    validate();
    fill_monotone_slopes();
  }
  RadialFunction(Eigen::ArrayXd g, Eigen::ArrayXd v, Eigen::ArrayXd d)
      : grid(std::move(g)), values(std::move(v)), deriv(std::move(d)) {
    validate();
    if (deriv.size() != grid.size()) throw std::invalid_argument("RadialFunction: deriv size mismatch");
    has_true_deriv_ = true;
  }

  bool empty() const { return grid.size() == 0; }
  int size() const { return static_cast<int>(grid.size()); }
  double rmin() const { return grid[0]; }
  double rmax() const { return grid[grid.size() - 1]; }
  bool has_solver_deriv() const { return has_true_deriv_; }

  double operator()(double r) const { return eval_impl(r, false); }
  double derivative(double r) const { return eval_impl(r, true); }

  static RadialFunction zero(const Eigen::ArrayXd& g) {
    return RadialFunction(g, Eigen::ArrayXd::Zero(g.size()), Eigen::ArrayXd::Zero(g.size()));
  }

 private:
  bool has_true_deriv_ = false;

  void validate() const {
    if (grid.size() < 2 || grid.size() != values.size())
      throw std::invalid_argument("RadialFunction: grid/value sizes");
    for (int i = 1; i < grid.size(); ++i)
      if (!(grid[i] > grid[i - 1])) throw std::invalid_argument("RadialFunction: grid not strictly increasing");
  }

  void fill_monotone_slopes() {
    const int n = size();
    deriv.resize(n);
    Eigen::ArrayXd d(n - 1), h(n - 1);
    for (int i = 0; i < n - 1; ++i) {
      h[i] = grid[i + 1] - grid[i];
      d[i] = (values[i + 1] - values[i]) / h[i];
    }
    deriv[0] = d[0];
    deriv[n - 1] = d[n - 2];
    for (int i = 1; i < n - 1; ++i) {
      if (d[i - 1] * d[i] <= 0.0) {
        deriv[i] = 0.0;
      } else {
        const double w1 = 2.0 * h[i] + h[i - 1], w2 = h[i] + 2.0 * h[i - 1];
        deriv[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
      }
    }
  }

  double eval_impl(double r, bool want_deriv) const {
    const int n = size();
    const double lo = grid[0], hi = grid[n - 1];
    const double slack = 1e-12 * (hi - lo);
    if (r < lo - slack || r > hi + slack)
      throw std::domain_error("RadialFunction: evaluation outside the grid (extrapolation forbidden)");
    r = std::min(std::max(r, lo), hi);
    int a = 0, b = n - 1;
    while (b - a > 1) {
      const int m = (a + b) / 2;
      (grid[m] <= r ? a : b) = m;
    }
    const double h = grid[a + 1] - grid[a];
    const double t = (r - grid[a]) / h;
    const double y0 = values[a], y1 = values[a + 1], m0 = deriv[a] * h, m1 = deriv[a + 1] * h;
    if (!want_deriv) {
      const double t2 = t * t, t3 = t2 * t;
      return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * m0 + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * m1;
    }
    const double t2 = t * t;
    const double dd = (6 * t2 - 6 * t) * y0 + (3 * t2 - 4 * t + 1) * m0 + (-6 * t2 + 6 * t) * y1 + (3 * t2 - 2 * t) * m1;
    return dd / h;
  }
};

}  // namespace blab
