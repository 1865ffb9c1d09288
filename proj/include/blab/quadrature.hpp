#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

#include "blab/bubble.hpp"
#include "blab/hfield.hpp"

namespace blab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct QuadratureSpec {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  int max_refinement = 18;
  // declared exponent of the full integrand's algebraic tail (used for hi = inf);
  // NaN means "estimate from samples". A tail correction needs tail_power < -1.
  double tail_power = std::numeric_limits<double>::quiet_NaN();
};

struct QuadratureError : std::runtime_error {
  double last = 0.0, previous = 0.0;
  QuadratureError(const std::string& m, double l, double p)
      : std::runtime_error(m + " (last two refinements: " + std::to_string(p) + ", " + std::to_string(l) + ")"),
        last(l),
        previous(p) {}
};

struct IdentityReport {
  std::string name;
  double computed = 0.0;
  double reference = 0.0;
  double abs_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct GaussRule {
  Eigen::ArrayXd x, w;  // nodes/weights on [-1, 1]
};

// Golub-Welsch rules (Eigen's symmetric eigensolver on the Jacobi matrix).
const GaussRule& gauss_legendre(int n);
GaussRule gauss_jacobi(int n, double beta);  // weight (1+t)^beta

using Integrand = std::function<double(double)>;

// integral of f(r) * r^(2 alpha) over (lo, hi); hi may be infinite.
// The r^(2 alpha) endpoint weight at lo = 0 is handled by Gauss-Jacobi nodes,
// never by refinement; infinite tails split at a crossover radius where the
// integrand's fitted local power stabilizes, with an analytic power-law
// remainder. Requires 2 alpha > -1 when lo = 0.
double integrate_radial(const Integrand& f, double alpha, double lo, double hi,
                        const QuadratureSpec& spec = {});

// same integral through the substitution t = a r^(2+2alpha)/(1 + a r^(2+2alpha))
// and tanh-sinh quadrature on (0,1); the second route of the invariance check.
double integrate_radial_substituted(const Integrand& f, double alpha, double a,
                                    const QuadratureSpec& spec = {});

// tanh-sinh on (0,1); f receives (t, 1-t) so endpoint distances stay accurate.
double tanh_sinh_01(const std::function<double(double, double)>& f, double tol, int max_level = 12);

IdentityReport identity1_check(double alpha, const QuadratureSpec& spec = {});
IdentityReport identity2_check(double alpha, const QuadratureSpec& spec = {});

// Flux coefficients of the radial eps^2 correction: flux(c0) =
// lap_coeff * lap_log V(0) * eps^2 + grad_coeff * eps^2. When lap_log V(0) != 0
// the theorem's combined d1k = lap_coeff + grad_coeff / lap_log is defined;
// otherwise only the decomposition is reported.
struct D1k {
  double lap_coeff = 0.0;
  double grad_coeff = 0.0;
  double combined = std::numeric_limits<double>::quiet_NaN();
  bool decomposed = false;
};
D1k d1k_eval(const BubbleParams& p, const HField& h, double tau);

// negative-source mass correction b_k(tau, beta) (two finite-range integrals)
// and ell_k(tau, beta), the flux of the constructed radial eps^(4+4beta)
// correction (built through the mode solver; see expansion.cpp).
struct BkNeg {
  double bk = 0.0;
  double bk_grad_part = 0.0;
  double bk_lap_part = 0.0;
  double ellk = 0.0;
};
BkNeg bk_neg_eval(const BubbleParams& p, const HField& h, double tau);

// regular-case radial integral b_{0,k} (alpha = 0 only)
double b0k_reg_eval(const BubbleParams& p, double tau);

namespace detail {
double bk_neg_integrals(const BubbleParams& p, const HField& h, double tau, double* grad_part, double* lap_part);
}

}  // namespace blab
