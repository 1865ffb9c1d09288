#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "blab/bubble.hpp"
#include "blab/hfield.hpp"
#include "blab/mode.hpp"

namespace blab {

enum class ExpansionOrder { U, OrderTwo, Full };  // U, U+c0+c1+c2, U+all corrections

// Assembled approximation v = U + corrections on the scaled disk B_{tau/eps},
// with analytic radial derivatives (profile derivatives, no differencing) and
// the algebraic equation residual
//   E_w = Delta v + |y|^(2a) V(eps y) e^v,
// evaluated by substituting each correction's defining ODE. What remains is
// the exponential's series beyond the solved orders; the >= eps^5 surviving
// terms are grouped so no catastrophic cancellation occurs.
class ExpansionField {
 public:
  ExpansionField(const BubbleParams& p, const HField& h, double tau, ExpansionOrder order, int n_grid = 1600);

  double operator()(double r, double theta) const { return eval(r, theta); }
  double eval(double r, double theta) const;
  double eval_cart(double x1, double x2) const;
  double dr(double r, double theta) const;       // radial derivative
  double dtheta(double r, double theta) const;   // angular derivative
  Eigen::Vector2d grad_cart(double x1, double x2) const;

  double residual(double r, double theta) const;  // E_w at a point
  double corrections_sum(double r, double theta) const;
  double hlog(double r, double theta) const;  // log(V(eps y)/V0)

  const CorrectionSet& corrections() const { return cs_; }
  const BubbleParams& params() const { return p_; }
  const HField& field() const { return h_; }
  double R() const { return R_; }
  ExpansionOrder order() const { return order_; }

  // projection of v onto mode l on the circle of radius r (trapezoid)
  double mode_projection(double r, int l, bool sine, int n_theta = 256) const;

 private:
  BubbleParams p_;
  HField h_;
  double tau_, R_, eps_;
  ExpansionOrder order_;
  CorrectionSet cs_;

  struct Tilde {
    double t0, t1, t2, t3, t4bar;  // mode-combined values at (r, theta)
  };
  Tilde tilde(double r, double theta) const;
  double prof(const RadialFunction& f, double r, double pw) const;      // value with power continuation
  double dprof(const RadialFunction& f, double r, double pw) const;     // derivative likewise
};

struct ResidualReport {
  std::string label;
  std::vector<double> lambdas;
  Eigen::ArrayXd eps, sup_residual;  // weighted sup per lambda
  double fitted_slope = 0.0;
  double expected_slope = 0.0;
  double slack = 0.2;
  bool passed = false;
  bool monotone = true;
};

// weighted-sup residual over a lambda sweep; weights per the order's envelope
ResidualReport residual_scan(const BubbleParams& base, const std::vector<double>& lambdas, const HField& h,
                             double tau, ExpansionOrder order, double slack = 0.2, int n_grid = 1200);

enum class MassCase { Positive, Negative, Regular };

struct MassReport {
  std::string label;
  std::vector<double> lambdas;
  Eigen::ArrayXd eps, total, leading, eps2_term, remainder;
  double eps2_coeff_extracted = 0.0;  // (total - leading)/(lap eps^2) at the last lambda
  double eps2_coeff_predicted = 0.0;
  double slope_of_remainder = 0.0;
  bool passed = false;
};

// local mass over B_tau of the assembled field against the expansion's
// predicted decomposition. The eps^2-order term carries the mass-side sign:
// it equals minus the flux of the radial correction.
MassReport mass_compare(const BubbleParams& base, const HField& h, double tau, MassCase mcase,
                        const std::vector<double>& lambdas, int n_grid = 1400);

// single-configuration mass of the assembled field (quadrature)
double assembled_mass(const ExpansionField& f);

struct DriftReport {
  std::vector<double> lambdas;
  Eigen::ArrayXd eps, err;
  Eigen::Vector2d predicted_last, located_last;
  double slope = 0.0;
  bool passed = false;
};

// regular-case maximum drift under a harmonic tilt phi with grad phi(0) given:
// prediction q = -(2/h(0)) grad phi(0) eps^2 against the located maximum of
// (assembled field + tilt), over a lambda sweep
DriftReport qk_drift_check(const BubbleParams& base, const HField& h, double tau,
                           const Eigen::Vector2d& grad_phi, const std::vector<double>& lambdas);

// ell_k of the negative case: flux of the constructed radial eps^(4+4beta)
// correction (the c0bar analogue) at the domain edge
double negative_ellk(const BubbleParams& p, const HField& h, double tau, int n_grid = 1200);

}  // namespace blab
