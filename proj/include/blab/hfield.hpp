#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <functional>
#include <memory>

#include "blab/expr.hpp"
#include "blab/jet.hpp"

namespace blab {

// Local Taylor data of a weight function at the blowup point: value, plus the
// derivatives of log V through order 4, pre-split into radial parts R_n and
// angular harmonics of each homogeneous degree. Optionally carries an exact
// 2-D evaluator (consistency with the Taylor data is checked in tests).
//
// log(V(x)/V(0)) = sum_{n=1..4} r^n * [ A[n][0] + sum_m (A[n][m] cos m t + B[n][m] sin m t) ] + (5th order)
class HField {
 public:
  double v0 = 1.0;                                  // V(0) > 0
  std::array<std::array<double, 5>, 5> dlog{};      // dlog[i][j] = d_x^i d_y^j log V (0), i+j<=4
  std::function<double(double, double)> exact;      // optional exact V(x1,x2)

  HField() { decompose(); }

  int taylor_order() const { return taylor_order_; }
  void declare_taylor_order(int n) { taylor_order_ = n; }

  // true when log V is exactly the stored degree-<=4 polynomial, so the
  // fifth-order Taylor remainder is identically zero (residuals then avoid
  // the noisy log(exact) - Taylor subtraction)
  bool log_is_poly4() const { return log_poly4_; }

  // attach exact = v0 exp(Taylor), turning the stored data into the definition
  void attach_exp_taylor_exact() {
    const HField* self = this;
    const double w0 = v0;
    auto d = dlog;
    exact = [self, w0, d](double x, double y) {
      (void)self;
      static constexpr double fact[5] = {1, 1, 2, 6, 24};
      double s = 0.0;
      for (int i = 0; i <= 4; ++i)
        for (int j = 0; i + j <= 4; ++j)
          if (i + j > 0 && d[i][j] != 0.0) s += d[i][j] / (fact[i] * fact[j]) * std::pow(x, i) * std::pow(y, j);
      return w0 * std::exp(s);
    };
    log_poly4_ = true;
  }

  static HField from_log_derivs(double v0, const std::array<std::array<double, 5>, 5>& d) {
    HField h;
    h.v0 = v0;
    h.dlog = d;
    h.decompose();
    return h;
  }

  // radial weight: log V = log v0 + (lap/4) |x|^2  (+ optional |x|^4 radial term q4*|x|^4)
  static HField radial(double v0, double lap, double q4 = 0.0) {
    HField h;
    h.v0 = v0;
    h.dlog[2][0] = lap / 2.0;
    h.dlog[0][2] = lap / 2.0;
    // |x|^4 = x^4 + 2 x^2 y^2 + y^4
    h.dlog[4][0] = 24.0 * q4;
    h.dlog[2][2] = 8.0 * q4;
    h.dlog[0][4] = 24.0 * q4;
    h.decompose();
    h.exact = [v0, lap, q4](double x, double y) {
      const double r2 = x * x + y * y;
      return v0 * std::exp(lap / 4.0 * r2 + q4 * r2 * r2);
    };
    h.log_poly4_ = true;
    return h;
  }

  // Taylor data extracted from a closed-form expression via jet arithmetic;
  // the expression itself becomes the exact evaluator.
  static HField from_expr(const std::shared_ptr<Expr>& e, double x0, double y0) {
    HField h;
    Jet2 j = e->jet_at(x0, y0);
    if (j.value() <= 0.0) throw std::domain_error("HField: weight not positive at the center");
    Jet2 lj = j.log();
    h.v0 = j.value();
    for (int i = 0; i <= 4; ++i)
      for (int jj = 0; i + jj <= 4; ++jj) h.dlog[i][jj] = lj.deriv(i, jj);
    h.exact = [e, x0, y0](double x, double y) { return e->eval<double>(x0 + x, y0 + y); };
    const int lpd = e->log_poly_degree();
    h.log_poly4_ = (lpd >= 0 && lpd <= 4);
    h.decompose();
    return h;
  }

  Eigen::Vector2d grad_log() const { return {dlog[1][0], dlog[0][1]}; }
  Eigen::Matrix2d hess_log() const {
    Eigen::Matrix2d m;
    m << dlog[2][0], dlog[1][1], dlog[1][1], dlog[0][2];
    return m;
  }
  double lap_log() const { return dlog[2][0] + dlog[0][2]; }
  double grad_log_sq() const { return grad_log().squaredNorm(); }
  bool grad_is_zero(double tol = 0.0) const { return grad_log().norm() <= tol; }

  // angular decomposition coefficients of the degree-n homogeneous Taylor part
  double A(int n, int m) const { return A_[n][m]; }
  double B(int n, int m) const { return B_[n][m]; }
  double R2() const { return A_[2][0]; }  // radial r^2 coefficient = lap_log/4
  double R4() const { return A_[4][0]; }

  // log(V(x)/V(0)) truncated at total order 4 (exact for log-polynomial fields)
  double log_taylor(double x1, double x2) const {
    double s = 0.0;
    for (int i = 0; i <= 4; ++i)
      for (int j = 0; i + j <= 4; ++j) {
        if (i + j == 0 || dlog[i][j] == 0.0) continue;
        s += dlog[i][j] / (fact_[i] * fact_[j]) * std::pow(x1, i) * std::pow(x2, j);
      }
    return s;
  }

  // exact log(V(x)/V(0)) if an evaluator is present, else the order-4 Taylor polynomial
  double log_exact(double x1, double x2) const {
    if (exact) return std::log(exact(x1, x2) / v0);
    return log_taylor(x1, x2);
  }

  // homogeneous degree-n part evaluated at angle t, radius 1
  double angular_part(int n, double t) const {
    double s = A_[n][0];
    for (int m = 1; m <= n; ++m) s += A_[n][m] * std::cos(m * t) + B_[n][m] * std::sin(m * t);
    return s;
  }

  // worst-case discrepancy between exact evaluator and Taylor data at the center
  double taylor_consistency(double step = 1e-3) const;

 private:
  int taylor_order_ = 4;
  bool log_poly4_ = false;
  std::array<std::array<double, 5>, 5> A_{}, B_{};
  static constexpr double fact_[5] = {1, 1, 2, 6, 24};

  void decompose() {
    // project p_n(t) = sum_{i+j=n} dlog[i][j]/(i!j!) cos^i t sin^j t onto cos/sin(m t);
    // trapezoid with 32 nodes is exact for these band-limited integrands
    const int N = 32;
    for (int n = 1; n <= 4; ++n) {
      std::array<double, N> p{};
      for (int k = 0; k < N; ++k) {
        const double t = 2.0 * M_PI * k / N;
        double s = 0.0;
        for (int i = 0; i <= n; ++i) {
          const int j = n - i;
          if (dlog[i][j] == 0.0) continue;
          s += dlog[i][j] / (fact_[i] * fact_[j]) * std::pow(std::cos(t), i) * std::pow(std::sin(t), j);
        }
        p[k] = s;
      }
      for (int m = 0; m <= n; ++m) {
        double ca = 0.0, sa = 0.0;
        for (int k = 0; k < N; ++k) {
          const double t = 2.0 * M_PI * k / N;
          ca += p[k] * std::cos(m * t);
          sa += p[k] * std::sin(m * t);
        }
        A_[n][m] = (m == 0 ? ca / N : 2.0 * ca / N);
        B_[n][m] = (m == 0 ? 0.0 : 2.0 * sa / N);
      }
    }
  }
};

inline double HField::taylor_consistency(double step) const {
  if (!exact) return 0.0;
  // centered stencils for value, gradient and laplacian of log V at 0
  auto lv = [&](double x, double y) { return std::log(exact(x, y)); };
  const double f0 = lv(0, 0);
  double worst = std::abs(std::exp(f0) - v0) / v0;
  const double gx = (lv(step, 0) - lv(-step, 0)) / (2 * step);
  const double gy = (lv(0, step) - lv(0, -step)) / (2 * step);
  worst = std::max(worst, std::abs(gx - dlog[1][0]));
  worst = std::max(worst, std::abs(gy - dlog[0][1]));
  const double lap =
      (lv(step, 0) + lv(-step, 0) + lv(0, step) + lv(0, -step) - 4 * f0) / (step * step);
  worst = std::max(worst, std::abs(lap - lap_log()));
  return worst;
}

}  // namespace blab
