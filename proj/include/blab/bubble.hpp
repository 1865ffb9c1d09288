#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace blab {

inline constexpr double kInfRadius = std::numeric_limits<double>::infinity();

// Parameters of a standard bubble: singularity strength alpha > -1, weight
// value h0 > 0 at the center, height lambda = u(0). Derived scale
// eps = exp(-lambda / (2(1+alpha))) and profile coefficient a = h0 / (8(1+alpha)^2).
struct BubbleParams {
  double alpha = 0.0;
  double h0 = 8.0;
  double lambda = 0.0;

  BubbleParams() = default;
  BubbleParams(double alpha_, double h0_, double lambda_) : alpha(alpha_), h0(h0_), lambda(lambda_) {
    if (!(alpha > -1.0) || !std::isfinite(alpha)) throw std::invalid_argument("BubbleParams: alpha must be > -1");
    if (!(h0 > 0.0) || !std::isfinite(h0)) throw std::invalid_argument("BubbleParams: h0 must be > 0");
    if (!std::isfinite(lambda)) throw std::invalid_argument("BubbleParams: lambda must be finite");
  }

  double eps() const { return std::exp(-lambda / (2.0 * (1.0 + alpha))); }
  double a() const { return h0 / (8.0 * (1.0 + alpha) * (1.0 + alpha)); }
  BubbleParams with_lambda(double l) const { return {alpha, h0, l}; }
};

// scaled bubble: U(r) = -2 log(1 + a r^(2+2 alpha)), U(0) = 0
template <typename T>
T bubble_profile_scaled(T alpha, T a, T r) {
  using std::log1p;
  using std::pow;
  return T(-2) * log1p(a * pow(r, T(2) + T(2) * alpha));
}

inline double bubble_profile(const BubbleParams& p, double r) {
  if (!(r >= 0.0) || !std::isfinite(r)) throw std::invalid_argument("bubble_profile: r must be finite and >= 0");
  return bubble_profile_scaled<double>(p.alpha, p.a(), r);
}

inline double bubble_profile_deriv(const BubbleParams& p, double r) {
  const double q = 2.0 + 2.0 * p.alpha;
  const double t = p.a() * std::pow(r, q);
  return -2.0 * q * t / (r * (1.0 + t));
}

// weight * e^U at a point of the scaled frame: h0 r^(2 alpha) e^(U(r))
inline double bubble_q(const BubbleParams& p, double r) {
  const double u = bubble_profile(p, r);
  return p.h0 * std::pow(r, 2.0 * p.alpha) * std::exp(u);
}

// closed-form mass over B_R of the scaled frame:
//   int h0 r^(2a) e^U = 8 pi (1+a) * a R^(2+2a) / (1 + a R^(2+2a)),  -> 8 pi (1+a) as R -> inf
inline double bubble_mass(const BubbleParams& p, double R) {
  if (!(R > 0.0)) throw std::invalid_argument("bubble_mass: R must be > 0");
  const double kTotal = 8.0 * M_PI * (1.0 + p.alpha);
  if (std::isinf(R)) return kTotal;
  const double t = p.a() * std::pow(R, 2.0 + 2.0 * p.alpha);
  return kTotal * t / (1.0 + t);
}

// Kernel elements of the linearized operator L = Lap + h0 r^(2a) e^U:
// the radial element for every alpha, the two translations only for alpha = 0.
struct KernelElement {
  enum class Kind { Radial, TransX, TransY };
  Kind kind = Kind::Radial;
  double alpha = 0.0;
  double a = 1.0;

  KernelElement(Kind k, double alpha_, double a_) : kind(k), alpha(alpha_), a(a_) {
    if (!(alpha > -1.0)) throw std::invalid_argument("KernelElement: alpha must be > -1");
    if (!(a > 0.0)) throw std::invalid_argument("KernelElement: a must be > 0");
    if (kind != Kind::Radial && alpha != 0.0)
      throw std::invalid_argument("KernelElement: translation elements exist only for alpha = 0");
  }
};

inline double kernel_eval(const KernelElement& k, double r, double theta) {
  switch (k.kind) {
    case KernelElement::Kind::Radial: {
      const double t = k.a * std::pow(r, 2.0 + 2.0 * k.alpha);
      return (1.0 - t) / (1.0 + t);
    }
    case KernelElement::Kind::TransX:
      return r * std::cos(theta) / (1.0 + k.a * r * r);
    case KernelElement::Kind::TransY:
      return r * std::sin(theta) / (1.0 + k.a * r * r);
  }
  throw std::logic_error("kernel_eval: bad kind");
}

// radial profile of the kernel element (for mode-wise residual tests)
inline double kernel_radial_profile(const KernelElement& k, double r) { return kernel_eval(k, r, 0.0); }

// g(r) = -(2(1+alpha)/alpha) r / (1 + a r^(2+2alpha)); solves the l = 1 problem
// with right side -V(0) r^(2alpha+1) e^U. Singular at alpha = 0 (the regular
// case runs through the dedicated l = 1 fundamental pair instead).
inline double g_profile(const BubbleParams& p, double r) {
  if (p.alpha == 0.0)
    throw std::domain_error("g_profile: alpha = 0 must use the regular-case l=1 machinery");
  const double t = p.a() * std::pow(r, 2.0 + 2.0 * p.alpha);
  return -(2.0 * (1.0 + p.alpha) / p.alpha) * r / (1.0 + t);
}

inline double g_profile_deriv(const BubbleParams& p, double r) {
  const double q = 2.0 + 2.0 * p.alpha;
  const double t = p.a() * std::pow(r, q);
  const double c = -(2.0 * (1.0 + p.alpha) / p.alpha);
  return c * (1.0 + t - q * t) / ((1.0 + t) * (1.0 + t));
}

}  // namespace blab
