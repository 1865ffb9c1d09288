#include "blab/expansion.hpp"

#include <cmath>

#include "blab/fit.hpp"
#include "blab/quadrature.hpp"

namespace blab {

namespace {

// e^s - 1 - s without cancellation for small s
double exp_rem2(double s) {
  if (std::abs(s) > 0.7) return std::expm1(s) - s;
  double term = s * s / 2.0, acc = term;
  for (int n = 3; n < 40; ++n) {
    term *= s / n;
    acc += term;
    if (std::abs(term) < 1e-30 * std::abs(acc) + 1e-300) break;
  }
  return acc;
}

}  // namespace

ExpansionField::ExpansionField(const BubbleParams& p, const HField& h, double tau, ExpansionOrder order,
                               int n_grid)
    : p_(p), h_(h), tau_(tau), R_(tau / p.eps()), eps_(p.eps()), order_(order) {
  if (order_ == ExpansionOrder::OrderTwo && h.taylor_order() < 2)
    throw std::invalid_argument("ExpansionField: insufficient Taylor data for U+c0+c1+c2");
  if (order_ == ExpansionOrder::Full && h.taylor_order() < 4)
    throw std::invalid_argument("ExpansionField: insufficient Taylor data for the full expansion");
  if (order_ != ExpansionOrder::U) cs_ = build_corrections(p_, h_, R_, order_ == ExpansionOrder::Full, n_grid);
}

double ExpansionField::prof(const RadialFunction& f, double r, double pw) const {
  if (f.empty()) return 0.0;
  if (r < f.rmin()) return f.values[0] * std::pow(r / f.rmin(), pw);
  return f(r);
}

double ExpansionField::dprof(const RadialFunction& f, double r, double pw) const {
  if (f.empty()) return 0.0;
  if (r < f.rmin()) return f.values[0] * pw * std::pow(r / f.rmin(), pw - 1.0) / f.rmin();
  return f.derivative(r);
}

double ExpansionField::hlog(double r, double theta) const {
  const double x1 = eps_ * r * std::cos(theta), x2 = eps_ * r * std::sin(theta);
  return h_.log_exact(x1, x2);
}

double ExpansionField::corrections_sum(double r, double theta) const {
  if (order_ == ExpansionOrder::U) return 0.0;
  double s = prof(cs_.c0, r, 2.0 + 2.0 * p_.alpha);
  s += prof(cs_.c1.cosp, r, 1.0) * std::cos(theta) + prof(cs_.c1.sinp, r, 1.0) * std::sin(theta);
  s += prof(cs_.c2.cosp, r, 2.0) * std::cos(2 * theta) + prof(cs_.c2.sinp, r, 2.0) * std::sin(2 * theta);
  if (order_ == ExpansionOrder::Full) {
    s += prof(cs_.c3m1.cosp, r, 1.0) * std::cos(theta) + prof(cs_.c3m1.sinp, r, 1.0) * std::sin(theta);
    s += prof(cs_.c3m3.cosp, r, 3.0) * std::cos(3 * theta) + prof(cs_.c3m3.sinp, r, 3.0) * std::sin(3 * theta);
    s += prof(cs_.c4m2.cosp, r, 2.0) * std::cos(2 * theta) + prof(cs_.c4m2.sinp, r, 2.0) * std::sin(2 * theta);
    s += prof(cs_.c4m4.cosp, r, 4.0) * std::cos(4 * theta) + prof(cs_.c4m4.sinp, r, 4.0) * std::sin(4 * theta);
    s += prof(cs_.c0bar, r, 4.0 + 2.0 * p_.alpha);
  }
  return s;
}

double ExpansionField::eval(double r, double theta) const {
  return bubble_profile(p_, r) + corrections_sum(r, theta);
}

double ExpansionField::eval_cart(double x1, double x2) const {
  return eval(std::hypot(x1, x2), std::atan2(x2, x1));
}

double ExpansionField::dr(double r, double theta) const {
  double d = bubble_profile_deriv(p_, r);
  if (order_ == ExpansionOrder::U) return d;
  d += dprof(cs_.c0, r, 2.0 + 2.0 * p_.alpha);
  d += dprof(cs_.c1.cosp, r, 1.0) * std::cos(theta) + dprof(cs_.c1.sinp, r, 1.0) * std::sin(theta);
  d += dprof(cs_.c2.cosp, r, 2.0) * std::cos(2 * theta) + dprof(cs_.c2.sinp, r, 2.0) * std::sin(2 * theta);
  if (order_ == ExpansionOrder::Full) {
    d += dprof(cs_.c3m1.cosp, r, 1.0) * std::cos(theta) + dprof(cs_.c3m1.sinp, r, 1.0) * std::sin(theta);
    d += dprof(cs_.c3m3.cosp, r, 3.0) * std::cos(3 * theta) + dprof(cs_.c3m3.sinp, r, 3.0) * std::sin(3 * theta);
    d += dprof(cs_.c4m2.cosp, r, 2.0) * std::cos(2 * theta) + dprof(cs_.c4m2.sinp, r, 2.0) * std::sin(2 * theta);
    d += dprof(cs_.c4m4.cosp, r, 4.0) * std::cos(4 * theta) + dprof(cs_.c4m4.sinp, r, 4.0) * std::sin(4 * theta);
    d += dprof(cs_.c0bar, r, 4.0 + 2.0 * p_.alpha);
  }
  return d;
}

double ExpansionField::dtheta(double r, double theta) const {
  if (order_ == ExpansionOrder::U) return 0.0;
  double d = -prof(cs_.c1.cosp, r, 1.0) * std::sin(theta) + prof(cs_.c1.sinp, r, 1.0) * std::cos(theta);
  d += 2.0 * (-prof(cs_.c2.cosp, r, 2.0) * std::sin(2 * theta) + prof(cs_.c2.sinp, r, 2.0) * std::cos(2 * theta));
  if (order_ == ExpansionOrder::Full) {
    d += -prof(cs_.c3m1.cosp, r, 1.0) * std::sin(theta) + prof(cs_.c3m1.sinp, r, 1.0) * std::cos(theta);
    d += 3.0 * (-prof(cs_.c3m3.cosp, r, 3.0) * std::sin(3 * theta) + prof(cs_.c3m3.sinp, r, 3.0) * std::cos(3 * theta));
    d += 2.0 * (-prof(cs_.c4m2.cosp, r, 2.0) * std::sin(2 * theta) + prof(cs_.c4m2.sinp, r, 2.0) * std::cos(2 * theta));
    d += 4.0 * (-prof(cs_.c4m4.cosp, r, 4.0) * std::sin(4 * theta) + prof(cs_.c4m4.sinp, r, 4.0) * std::cos(4 * theta));
  }
  return d;
}

Eigen::Vector2d ExpansionField::grad_cart(double x1, double x2) const {
  const double r = std::hypot(x1, x2);
  if (r == 0.0) {  // the polar split degenerates; difference across the origin
    const double d = 1e-9;
    return {(eval_cart(d, 0.0) - eval_cart(-d, 0.0)) / (2.0 * d),
            (eval_cart(0.0, d) - eval_cart(0.0, -d)) / (2.0 * d)};
  }
  const double th = std::atan2(x2, x1);
  const double fr = dr(r, th), ft = dtheta(r, th) / r;
  const double c = std::cos(th), s = std::sin(th);
  return {fr * c - ft * s, fr * s + ft * c};
}

ExpansionField::Tilde ExpansionField::tilde(double r, double theta) const {
  Tilde t{};
  const double c = std::cos(theta), s = std::sin(theta);
  const double e2 = eps_ * eps_, e3 = e2 * eps_, e4 = e2 * e2;
  t.t1 = prof(cs_.c1.cosp, r, 1.0) * c + prof(cs_.c1.sinp, r, 1.0) * s + eps_ * r * h_.angular_part(1, theta);
  t.t0 = prof(cs_.c0, r, 2.0 + 2.0 * p_.alpha) + e2 * h_.R2() * r * r;
  t.t2 = prof(cs_.c2.cosp, r, 2.0) * std::cos(2 * theta) + prof(cs_.c2.sinp, r, 2.0) * std::sin(2 * theta) +
         e2 * r * r * (h_.angular_part(2, theta) - h_.R2());
  if (order_ == ExpansionOrder::Full) {
    t.t3 = prof(cs_.c3m1.cosp, r, 1.0) * c + prof(cs_.c3m1.sinp, r, 1.0) * s +
           prof(cs_.c3m3.cosp, r, 3.0) * std::cos(3 * theta) + prof(cs_.c3m3.sinp, r, 3.0) * std::sin(3 * theta) +
           e3 * r * r * r * h_.angular_part(3, theta);
    t.t4bar = prof(cs_.c4m2.cosp, r, 2.0) * std::cos(2 * theta) + prof(cs_.c4m2.sinp, r, 2.0) * std::sin(2 * theta) +
              prof(cs_.c4m4.cosp, r, 4.0) * std::cos(4 * theta) + prof(cs_.c4m4.sinp, r, 4.0) * std::sin(4 * theta) +
              prof(cs_.c0bar, r, 4.0 + 2.0 * p_.alpha) + e4 * r * r * r * r * h_.angular_part(4, theta);
  }
  return t;
}

double ExpansionField::residual(double r, double theta) const {
  const double Q0 = bubble_q(p_, r);
  const double e2 = eps_ * eps_;
  double htay = 0.0;
  double rn = eps_ * r;
  for (int n = 1; n <= 4; ++n) {
    htay += rn * h_.angular_part(n, theta);
    rn *= eps_ * r;
  }
  const double h5 = (h_.exact && !h_.log_is_poly4()) ? (hlog(r, theta) - htay) : 0.0;

  if (order_ == ExpansionOrder::U) return Q0 * std::expm1(htay + h5);

  Tilde t = tilde(r, theta);
  if (order_ == ExpansionOrder::OrderTwo) {
    // E = Q0 [ h3plus + (e^s - 1 - s) - T1^2/2 ],  s = T0 + T1 + T2 + h3plus
    const double r3 = r * r * r;
    const double h3p = e2 * eps_ * r3 * h_.angular_part(3, theta) +
                       e2 * e2 * r3 * r * h_.angular_part(4, theta) + h5;
    const double s = t.t0 + t.t1 + t.t2 + h3p;
    return Q0 * (h3p + exp_rem2(s) - 0.5 * t.t1 * t.t1);
  }
  // full: every monomial of e^s through fourth order is cancelled by a solved
  // correction; what survives is the fifth-order remainder plus cross terms
  const double s = t.t0 + t.t1 + t.t2 + t.t3 + t.t4bar + h5;
  const double d2p = 0.5 * t.t1 * t.t1 + t.t1 * (t.t0 + t.t2) + t.t1 * t.t1 * t.t1 / 6.0 + t.t0 * t.t2 +
                     0.5 * t.t1 * t.t1 * (t.t0 + t.t2) + 0.5 * t.t2 * t.t2 + t.t1 * t.t3 + 0.5 * t.t0 * t.t0 +
                     t.t1 * t.t1 * t.t1 * t.t1 / 24.0;
  return Q0 * (h5 + exp_rem2(s) - d2p);
}

double ExpansionField::mode_projection(double r, int l, bool sine, int n_theta) const {
  double acc = 0.0;
  for (int k = 0; k < n_theta; ++k) {
    const double th = 2.0 * M_PI * k / n_theta;
    acc += eval(r, th) * (sine ? std::sin(l * th) : std::cos(l * th));
  }
  return (l == 0 ? acc / n_theta : 2.0 * acc / n_theta);
}

ResidualReport residual_scan(const BubbleParams& base, const std::vector<double>& lambdas, const HField& h,
                             double tau, ExpansionOrder order, double slack, int n_grid) {
  ResidualReport rep;
  rep.lambdas = lambdas;
  rep.slack = slack;
  const int n = static_cast<int>(lambdas.size());
  if (n < 3) throw std::invalid_argument("residual_scan: sweep needs >= 3 points");
  rep.eps.resize(n);
  rep.sup_residual.resize(n);
  double q;  // envelope weight exponent: sup over the grid of |E| (1+r)^q
  switch (order) {
    case ExpansionOrder::U: q = 3.0 + 2.0 * base.alpha; rep.expected_slope = 1.0; break;
    case ExpansionOrder::OrderTwo: q = 1.0 + 2.0 * base.alpha; rep.expected_slope = 3.0; break;
    default: q = 2.0 * base.alpha - 1.0; rep.expected_slope = 5.0; break;
  }
  for (int i = 0; i < n; ++i) {
    BubbleParams p = base.with_lambda(lambdas[i]);
    rep.eps[i] = p.eps();
    ExpansionField f(p, h, tau, order, n_grid);
    const Eigen::ArrayXd rad = log_grid(1e-4, f.R(), 220);
    double sup = 0.0;
    const int nth = 48;
    for (int ir = 0; ir < rad.size(); ++ir) {
      const double w = std::pow(1.0 + rad[ir], q);
      for (int k = 0; k < nth; ++k) {
        const double th = 2.0 * M_PI * k / nth;
        sup = std::max(sup, std::abs(f.residual(rad[ir], th)) * w);
      }
    }
    rep.sup_residual[i] = sup;
  }
  for (int i = 1; i < n; ++i)
    if (rep.sup_residual[i] > rep.sup_residual[i - 1] && rep.eps[i] < rep.eps[i - 1]) rep.monotone = false;
  rep.fitted_slope = fit_slope_last_half(rep.eps, rep.sup_residual);
  rep.passed = rep.fitted_slope >= rep.expected_slope - rep.slack;
  rep.label = "residual_scan";
  return rep;
}

double assembled_mass(const ExpansionField& f) {
  const BubbleParams& p = f.params();
  const HField& h = f.field();
  const double eps = p.eps();
  const int nth = 64;
  auto ring = [&](double r) {
    double acc = 0.0;
    for (int k = 0; k < nth; ++k) {
      const double th = 2.0 * M_PI * k / nth;
      const double x1 = eps * r * std::cos(th), x2 = eps * r * std::sin(th);
      const double V = h.exact ? h.exact(x1, x2) : h.v0 * std::exp(h.log_taylor(x1, x2));
      acc += V * std::exp(f.eval(r, th));
    }
    return 2.0 * M_PI * r * acc / nth;
  };
  QuadratureSpec sp;
  sp.rel_tol = 1e-12;
  sp.abs_tol = 1e-14;
  return integrate_radial(ring, p.alpha, 0.0, f.R(), sp);
}

MassReport mass_compare(const BubbleParams& base, const HField& h, double tau, MassCase mcase,
                        const std::vector<double>& lambdas, int n_grid) {
  const double al = base.alpha;
  switch (mcase) {
    case MassCase::Positive:
      if (!(al > 0.0)) throw std::invalid_argument("mass_compare: positive case needs alpha > 0");
      break;
    case MassCase::Negative:
      if (!(al > -1.0 && al < 0.0)) throw std::invalid_argument("mass_compare: negative case needs beta in (-1,0)");
      break;
    case MassCase::Regular:
      if (al != 0.0) throw std::invalid_argument("mass_compare: regular case needs alpha = 0");
      if (h.grad_log().norm() != 0.0)
        throw std::invalid_argument("mass_compare: the regular-case expansion presumes a critical weight "
                                    "(vanishing gradient of log V at the center)");
      break;
  }
  MassReport rep;
  rep.lambdas = lambdas;
  const int n = static_cast<int>(lambdas.size());
  rep.eps.resize(n);
  rep.total.resize(n);
  rep.leading.resize(n);
  rep.eps2_term.resize(n);
  rep.remainder.resize(n);
  const double lap = h.lap_log();
  for (int i = 0; i < n; ++i) {
    BubbleParams p = base.with_lambda(lambdas[i]);
    const double eps = p.eps();
    rep.eps[i] = eps;
    ExpansionField f(p, h, tau, ExpansionOrder::Full, n_grid);
    rep.total[i] = assembled_mass(f);
    rep.leading[i] = bubble_mass(p, tau / eps);
    double term = 0.0;
    switch (mcase) {
      case MassCase::Positive: {
        D1k d = d1k_eval(p, h, tau);
        term = -(d.lap_coeff * lap + d.grad_coeff) * eps * eps;  // mass side = minus the flux
        break;
      }
      case MassCase::Regular: {
        const double b0k = b0k_reg_eval(p, tau);
        term = -(M_PI / 2.0) * lap * h.v0 * b0k * eps * eps;
        break;
      }
      case MassCase::Negative: {
        BkNeg bk = bk_neg_eval(p, h, tau);
        term = -bk.bk;
        break;
      }
    }
    rep.eps2_term[i] = term;
    rep.remainder[i] = rep.total[i] - rep.leading[i] - term;
  }
  const int last = n - 1;
  const double e2 = rep.eps[last] * rep.eps[last];
  rep.eps2_coeff_extracted = (rep.total[last] - rep.leading[last]) / e2;
  rep.eps2_coeff_predicted = rep.eps2_term[last] / e2;
  rep.slope_of_remainder =
      n >= 3 ? fit_slope_last_half(rep.eps, rep.remainder) : std::numeric_limits<double>::quiet_NaN();
  rep.label = "mass_compare";
  return rep;
}

DriftReport qk_drift_check(const BubbleParams& base, const HField& h, double tau,
                           const Eigen::Vector2d& grad_phi, const std::vector<double>& lambdas) {
  if (base.alpha != 0.0) throw std::invalid_argument("qk_drift_check: alpha must be 0");
  if (h.grad_log().norm() != 0.0)
    throw std::invalid_argument("qk_drift_check: requires a critical weight (zero gradient at the center)");
  DriftReport rep;
  rep.lambdas = lambdas;
  const int n = static_cast<int>(lambdas.size());
  rep.eps.resize(n);
  rep.err.resize(n);
  const double kappa = 0.3;  // quadratic harmonic part of the tilt keeps the probe honest
  for (int i = 0; i < n; ++i) {
    BubbleParams p = base.with_lambda(lambdas[i]);
    const double eps = p.eps();
    rep.eps[i] = eps;
    ExpansionField f(p, h, tau, ExpansionOrder::OrderTwo, 1000);
    // the assembled field models the centered solution u; the drifted maximum
    // belongs to u - phi, phi = grad_phi . x + kappa (x1^2 - x2^2)
    auto grad_u = [&](const Eigen::Vector2d& x) -> Eigen::Vector2d {
      Eigen::Vector2d gv = f.grad_cart(x.x() / eps, x.y() / eps) / eps;
      gv.x() -= grad_phi.x() + 2.0 * kappa * x.x();
      gv.y() -= grad_phi.y() - 2.0 * kappa * x.y();
      return gv;
    };
    Eigen::Vector2d x(0.05 * eps * eps, 0.03 * eps * eps);  // off-origin start
    for (int it = 0; it < 60; ++it) {
      const Eigen::Vector2d g0 = grad_u(x);
      const double hstep = 1e-3 * eps;
      Eigen::Matrix2d J;
      for (int c = 0; c < 2; ++c) {
        Eigen::Vector2d dx = Eigen::Vector2d::Zero();
        dx[c] = hstep;
        J.col(c) = (grad_u(x + dx) - grad_u(x - dx)) / (2.0 * hstep);
      }
      const Eigen::Vector2d step = J.fullPivLu().solve(g0);
      x -= step;
      if (step.norm() < 1e-18 + 1e-12 * eps * eps) break;
    }
    const Eigen::Vector2d pred = -2.0 / h.v0 * grad_phi * eps * eps;
    rep.err[i] = (x - pred).norm();
    if (i == n - 1) {
      rep.predicted_last = pred;
      rep.located_last = x;
    }
  }
  if (rep.err.abs().maxCoeff() < 1e-13) {
    rep.slope = kInfRadius;  // located maximum coincides with the prediction
    rep.passed = true;
  } else {
    rep.slope = fit_loglog_slope(rep.eps, rep.err);
    rep.passed = rep.slope >= 3.0 - 0.2;
  }
  return rep;
}

double negative_ellk(const BubbleParams& p, const HField& h, double tau, int n_grid) {
  if (!(p.alpha > -1.0 && p.alpha < 0.0)) throw std::invalid_argument("negative_ellk: beta must lie in (-1,0)");
  const double R = tau / p.eps();
  CorrectionSet cs = build_corrections(p, h, R, true, n_grid);
  return 2.0 * M_PI * R * cs.c0bar.deriv[cs.c0bar.size() - 1];
}

// declared in quadrature.hpp; assembled here so the b_k integrals and the
// ell_k flux share one entry point
BkNeg bk_neg_eval(const BubbleParams& p, const HField& h, double tau) {
  BkNeg out;
  out.bk = detail::bk_neg_integrals(p, h, tau, &out.bk_grad_part, &out.bk_lap_part);
  out.ellk = negative_ellk(p, h, tau);
  return out;
}

}  // namespace blab
