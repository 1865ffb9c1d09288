#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace blab {

// Least-squares slope of log|y| against log x, over the last `take` points
// (the asymptotic end of a sweep). Points with |y| = 0 are skipped.
inline double fit_loglog_slope(const Eigen::ArrayXd& x, const Eigen::ArrayXd& y, int take = -1) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_loglog_slope: need >= 2 points");
  std::vector<double> lx, ly;
  const int n = static_cast<int>(x.size());
  const int from = (take > 0 && take < n) ? n - take : 0;
  for (int i = from; i < n; ++i) {
    if (y[i] == 0.0 || !std::isfinite(y[i])) continue;
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(std::abs(y[i])));
  }
  if (lx.size() < 2) throw std::runtime_error("fit_loglog_slope: too few usable points");
  const int m = static_cast<int>(lx.size());
  Eigen::MatrixXd A(m, 2);
  Eigen::VectorXd b(m);
  for (int i = 0; i < m; ++i) {
    A(i, 0) = lx[i];
    A(i, 1) = 1.0;
    b(i) = ly[i];
  }
  Eigen::Vector2d c = A.colPivHouseholderQr().solve(b);
  return c(0);
}

// Slope over the asymptotic half of the sweep, per the reporting convention.
inline double fit_slope_last_half(const Eigen::ArrayXd& x, const Eigen::ArrayXd& y) {
  return fit_loglog_slope(x, y, static_cast<int>((x.size() + 1) / 2));
}

// Fit y = c * x (one-parameter linear fit through the origin).
inline double fit_proportional(const Eigen::ArrayXd& x, const Eigen::ArrayXd& y) {
  const double d = (x * x).sum();
  if (d == 0.0) throw std::invalid_argument("fit_proportional: x identically zero");
  return (x * y).sum() / d;
}

struct RichardsonResult {
  double value = 0.0;            // extrapolated limit
  double est_order = 0.0;        // observed convergence order
  double last_diff = 0.0;        // |S_n - S_{n-1}| before extrapolation
  bool cauchy = true;            // differences decreasing in magnitude
  std::vector<double> raw;       // the input sequence
  std::vector<double> diffs;     // successive differences
};

// Richardson extrapolation of S(h_i), h_{i+1} = h_i / ratio, unknown order.
// The order is estimated from the last difference triple and one elimination
// step is applied; robust for the smooth sequences produced here.
inline RichardsonResult richardson_extrapolate(const std::vector<double>& s, double ratio = 2.0) {
  RichardsonResult r;
  r.raw = s;
  if (s.size() < 2) {
    r.value = s.empty() ? 0.0 : s.back();
    r.cauchy = false;
    return r;
  }
  for (size_t i = 1; i < s.size(); ++i) r.diffs.push_back(s[i] - s[i - 1]);
  r.last_diff = std::abs(r.diffs.back());
  double scale = 0.0;
  for (double v : s) scale = std::max(scale, std::abs(v));
  const double floor = 256.0 * std::numeric_limits<double>::epsilon() * scale;
  for (size_t i = 1; i < r.diffs.size(); ++i)
    if (std::abs(r.diffs[i]) > std::abs(r.diffs[i - 1]) + 1e-300 && std::abs(r.diffs[i]) > floor) r.cauchy = false;
  if (s.size() >= 3) {
    const double d1 = s[s.size() - 2] - s[s.size() - 3];
    const double d2 = s[s.size() - 1] - s[s.size() - 2];
    if (d1 != 0.0 && d2 != 0.0 && std::abs(d2) < std::abs(d1)) {
      const double p = std::log(std::abs(d1 / d2)) / std::log(ratio);
      r.est_order = p;
      const double f = std::pow(ratio, p);
      r.value = s.back() + d2 / (f - 1.0);
      return r;
    }
  }
  r.value = s.back();
  return r;
}

}  // namespace blab
