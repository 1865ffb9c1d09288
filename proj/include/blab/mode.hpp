#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>

#include "blab/bubble.hpp"
#include "blab/hfield.hpp"
#include "blab/radial.hpp"

namespace blab {

// Closed-form fundamental solutions of the mode-l linearized equation
//   F'' + F'/r + (V0 r^(2a) e^U - l^2/r^2) F = 0,
// rescaled from the a = 1 normalization by r -> a^(1/(2+2a)) r. The product
// r W(r) is invariant under that rescaling. The pair degenerates at l = 1+alpha;
// alpha = 0, l = 1 uses the dedicated logarithmic pair.
class FundamentalPair {
 public:
  FundamentalPair(double alpha, int l, double a);

  double F1(double r) const;
  double F2(double r) const;
  double dF1(double r) const;
  double dF2(double r) const;
  double rW() const { return w0_; }
  int l() const { return l_; }
  bool regular_log_pair() const { return regular_; }

  // sampled forms (values + derivatives) for the public operation
  RadialFunction sample_F1(const Eigen::ArrayXd& grid) const;
  RadialFunction sample_F2(const Eigen::ArrayXd& grid) const;

 private:
  double alpha_, a_, m_, nu_, p_, w0_;
  int l_;
  bool regular_ = false;
};

inline std::pair<RadialFunction, RadialFunction> fundamental_pair(double alpha, int l, double a,
                                                                  const Eigen::ArrayXd& grid) {
  FundamentalPair fp(alpha, l, a);
  return {fp.sample_F1(grid), fp.sample_F2(grid)};
}

// Right side of a mode problem: evaluator plus declared leading power at r = 0
// (rhs(r) ~ c r^power0), which drives the singular-endpoint quadrature and the
// series start of the l = 0 march.
struct ModeRhs {
  std::function<double(double)> f;
  double power0 = 0.0;
  double operator()(double r) const { return f(r); }
  static ModeRhs zero() {
    return {[](double) { return 0.0; }, 0.0};
  }
};

struct ModeProblem {
  BubbleParams params;
  int l = 0;
  ModeRhs rhs;
  double R = 1.0;       // scaled domain radius
  int n_grid = 1600;    // log-grid resolution
  double rmin = 1e-8;
};

// Particular solution of the mode ODE with f(0) = f'(0) = 0: variation of
// parameters on the closed-form pair for l >= 1 (upper limit at R, matching
// the construction the correction terms use), RK4 march in log r for l = 0.
RadialFunction solve_mode(const ModeProblem& p);

// normalized finite-difference residual of a solved profile on its grid;
// an optional radial window restricts the sup to a signal-dominated range
// (outside it, flat-to-machine-precision stretches are skipped automatically)
double mode_residual_grid(const RadialFunction& f, const BubbleParams& p, int l, const ModeRhs& rhs,
                          double rlo = 0.0, double rhi = kInfRadius);

// 4th-order local residual for closed-form profiles
double mode_residual_callable(const std::function<double(double)>& f, const BubbleParams& p, int l,
                              const std::function<double(double)>& rhs, double r);

// One angular mode of a correction term: fc(r) cos(m t) + fs(r) sin(m t).
struct AngularProfile {
  int m = 0;
  RadialFunction cosp, sinp;
  bool empty() const { return cosp.empty() && sinp.empty(); }
};

// The correction hierarchy around one bubble. c1/c2 are the eps- and
// eps^2-order angular terms, c3 carries the full eps^3 angular content
// (modes 1 and 3), c4 the eps^4 content (modes 2 and 4), c0/c0bar the radial
// eps^2 and eps^4 terms.
struct CorrectionSet {
  Eigen::ArrayXd grid;
  RadialFunction c0;
  AngularProfile c1;  // m = 1
  AngularProfile c2;  // m = 2
  AngularProfile c3m1, c3m3;
  AngularProfile c4m2, c4m4;
  RadialFunction c0bar;
  bool has_c1 = false, has_c2 = false, has_c3 = false, has_c4 = false, has_c0bar = false;
  // the right sides each radial solve used (flux identities, residual checks)
  ModeRhs c0_rhs, c0bar_rhs;
};

// T-profiles t~c_l = c_l + (Taylor part of the same order and mode); the
// algebra of the residual and of the higher right sides runs on these.
struct TildeProfiles {
  // mode-1: Tc1(r) cos t + Ts1(r) sin t, etc.
  std::function<double(double)> t1c, t1s;        // eps order
  std::function<double(double)> t0;              // radial eps^2 (c0 + eps^2 R2 r^2)
  std::function<double(double)> t2c, t2s;        // eps^2 mode 2
  std::function<double(double)> t3m1c, t3m1s;    // eps^3 mode 1 (c3 part + Taylor)
  std::function<double(double)> t3m3c, t3m3s;    // eps^3 mode 3
};

AngularProfile build_c1(const BubbleParams& p, const HField& h, const Eigen::ArrayXd& grid);
AngularProfile build_c1_regular(const BubbleParams& p, const HField& h, double R, const Eigen::ArrayXd& grid);
RadialFunction build_c0(const BubbleParams& p, const HField& h, double R, const Eigen::ArrayXd& grid,
                        const AngularProfile* c1 = nullptr);
AngularProfile build_c2(const BubbleParams& p, const HField& h, double R, const Eigen::ArrayXd& grid,
                        const AngularProfile* c1 = nullptr);
void build_higher(const BubbleParams& p, const HField& h, CorrectionSet& base, double R);

// full hierarchy (c1, c0, c2 and optionally the eps^3/eps^4 terms)
CorrectionSet build_corrections(const BubbleParams& p, const HField& h, double R, bool with_higher,
                                int n_grid = 1600);

// explicit w1xi (alpha != 0): b0 * V0/(4 a(1+a)) * (grad log V . theta) * eps *
// r^(2a+3) / (1 + a r^(2+2a))^2, the lambda-derivative of the scaled c1.
AngularProfile build_w1xi(const BubbleParams& p, const HField& h, double b0, const Eigen::ArrayXd& grid);

// scaled weight of the linearized operator: V0 r^(2 alpha) e^U
inline double mode_weight(const BubbleParams& p, double r) { return bubble_q(p, r); }

}  // namespace blab
