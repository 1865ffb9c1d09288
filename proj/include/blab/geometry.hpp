#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <vector>

#include "blab/expr.hpp"
#include "blab/hfield.hpp"

namespace blab {

// Flat geometries carrying a Green function: a rectangular flat torus (closed,
// -Lap G = delta - 1/area, zero mean), the unit-style disk and the rectangle
// (Dirichlet). Curvature enters only as the constant K of the L(p) bracket.
class ManifoldContext {
 public:
  enum class Kind { FlatTorus, Disk, Rectangle };
  Kind kind = Kind::FlatTorus;
  double L1 = 1.0, L2 = 1.0;  // torus periods / rectangle sides
  double radius = 1.0;        // disk
  double area = 1.0;
  double curvature = 0.0;

  static ManifoldContext flat_torus(double w1, double w2, double K = 0.0);
  static ManifoldContext disk(double R);
  static ManifoldContext rectangle(double a, double b);

  bool dirichlet() const { return kind != Kind::FlatTorus; }

  // Green function and gradient in x; x = p rejected
  double green(const Eigen::Vector2d& x, const Eigen::Vector2d& p) const;
  Eigen::Vector2d green_grad(const Eigen::Vector2d& x, const Eigen::Vector2d& p) const;

  // regular part R(x, p) = G + (1/2pi) log|x-p| evaluated off-diagonal
  double regular_at(const Eigen::Vector2d& x, const Eigen::Vector2d& p) const;

  // R(p, p) in closed form (Ewald pieces / image charges); machine precision,
  // used wherever it multiplies divergent counterterms
  double regular_diagonal(const Eigen::Vector2d& p) const;

  // minimal-image displacement (torus) or plain difference
  Eigen::Vector2d displacement(const Eigen::Vector2d& x, const Eigen::Vector2d& p) const;

 private:
  // Ewald split of the torus Green function, truncations set for ~1e-13
  struct Ewald {
    double eta = 1.0, c0 = 0.0;
    std::vector<Eigen::Vector2d> shifts;
    std::vector<Eigen::Vector3d> modes;  // (k1, k2, coef)
  };
  std::shared_ptr<const Ewald> ewald_;
  void build_ewald();
  double torus_green(const Eigen::Vector2d& d) const;
  Eigen::Vector2d torus_green_grad(const Eigen::Vector2d& d) const;
  friend struct EwaldAccess;
};

struct RegularPart {
  double value = 0.0;
  Eigen::Vector2d grad = Eigen::Vector2d::Zero();
  bool converged = false;
  double err_estimate = 0.0;
};

struct GreenValue {
  double G = 0.0;
  Eigen::Vector2d grad = Eigen::Vector2d::Zero();
};

GreenValue green_eval(const ManifoldContext& M, const Eigen::Vector2d& x, const Eigen::Vector2d& p);

// R(p,p) by subtracting the log kernel and extrapolating x -> p (direction-
// averaged, Richardson in the step); the gradient by centered differences
RegularPart regular_part(const ManifoldContext& M, const Eigen::Vector2d& p);

// Blowup configuration: points, strengths, weight h (closed form).
struct SourceSet {
  std::vector<Eigen::Vector2d> points;
  std::vector<double> alphas;
  std::shared_ptr<Expr> h;  // positive weight; h = 1 when absent

  int size() const { return static_cast<int>(points.size()); }
  double h_at(const Eigen::Vector2d& x) const { return h ? h->eval<double>(x.x(), x.y()) : 1.0; }
  HField h_field_at(const Eigen::Vector2d& x) const;
  void validate() const;

  double rho_star() const;
  double n_star() const;
  double alpha_max() const;
  std::vector<int> argmax_alpha() const;  // the index set I1
};

// G_j^*(x) = 8 pi (1+a_j) R(x, p_j) + 8 pi sum_{l != j} (1+a_l) G(x, p_l)
double gstar_eval(const ManifoldContext& M, const SourceSet& S, int j, const Eigen::Vector2d& x);
double gstar_at_point(const ManifoldContext& M, const SourceSet& S, int j);  // at x = p_j

// L(p): closed case includes rho* - N* - 2K; Dirichlet drops it
double L_eval(const ManifoldContext& M, const SourceSet& S);

struct FStarResult {
  double value = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  double det = 0.0;
  double condition = 0.0;
};

// Kirchhoff-Routh type functional of the regular points x (the singular
// sources of S stay fixed); gradient/Hessian by tuned centered differences
FStarResult fstar_eval(const ManifoldContext& M, const SourceSet& S,
                       const std::vector<Eigen::Vector2d>& regular_points);
double fstar_value(const ManifoldContext& M, const SourceSet& S, const std::vector<Eigen::Vector2d>& xs);

struct DReport {
  std::vector<double> r_values;
  std::vector<double> partial;    // S(r) per r
  std::vector<double> diffs;      // successive differences
  double value = 0.0;             // Richardson limit
  double est_order = 0.0;
  bool cauchy = false;
  double partition_sensitivity = 0.0;
  bool criticality_ok = true;     // (neg-crit) checked, not enforced
  double criticality_residual = 0.0;
};

// renormalized global quantity D(p) on a torus, Voronoi partition; the
// r-sequence decreases geometrically and the limit is Richardson-extrapolated
DReport D_eval(const ManifoldContext& M, const SourceSet& S, const std::vector<double>& r_seq,
               int grid_n = 256);

// calibration of the counterterm: integrand replaced by its pure local model
// c |z|^(-4-2a) over r < |z| < R0; the bracket plus the analytic outer tail
// must extrapolate to 0
double d_eval_calibration(double alpha, const std::vector<double>& r_seq, double R0);

struct RhoRateReport {
  std::vector<double> lambdas;
  Eigen::ArrayXd eps_pow, rho_diff;  // e^{-lam/(1+aM)} and rho_k - rho_*
  double fitted_coeff = 0.0;
  double L_value = 0.0;
  bool sign_matches_L = false;
};

// assembles rho_k = sum of local masses over a shared lambda sweep and fits
// rho_k - rho_* against e^{-lambda/(1+alpha_M)}; bubble heights are locked
// through the Green matching conditions
RhoRateReport rho_residual_rate(const ManifoldContext& M, const SourceSet& S, double tau,
                                const std::vector<double>& lambdas);

}  // namespace blab
