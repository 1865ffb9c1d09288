#include "blab/pohozaev.hpp"

#include <cmath>

#include "blab/fit.hpp"
#include "blab/quadrature.hpp"

namespace blab {

PolarTrace make_trace(const ExpansionField& f) {
  PolarTrace t;
  t.value = [&f](double r, double th) { return f.eval(r, th); };
  t.dr = [&f](double r, double th) { return f.dr(r, th); };
  t.dtheta = [&f](double r, double th) { return f.dtheta(r, th); };
  return t;
}

PolarTrace make_trace_fd(const std::function<double(double, double)>& value, double dr_step) {
  PolarTrace t;
  t.value = value;
  // one-sided 4th-order stencil pointing inward from the circle
  t.dr = [value, dr_step](double r, double th) {
    const double h = dr_step;
    return (25.0 * value(r, th) - 48.0 * value(r - h, th) + 36.0 * value(r - 2 * h, th) -
            16.0 * value(r - 3 * h, th) + 3.0 * value(r - 4 * h, th)) /
           (12.0 * h);
  };
  t.dtheta = [value](double r, double th) {
    const double h = 2.0 * M_PI / 2048.0;
    return (-value(r, th + 2 * h) + 8.0 * value(r, th + h) - 8.0 * value(r, th - h) + value(r, th - 2 * h)) /
           (12.0 * h);
  };
  return t;
}

namespace {

// d_xi V at the unscaled point x: exact for log-polynomial fields, else a
// centered difference of the exact evaluator
double dxi_weight(const HField& h, const Eigen::Vector2d& x, const Eigen::Vector2d& xi) {
  if (h.log_is_poly4() || !h.exact) {
    // grad log V from the stored Taylor polynomial
    Eigen::Vector2d g = Eigen::Vector2d::Zero();
    static constexpr double fact[5] = {1, 1, 2, 6, 24};
    for (int i = 0; i <= 4; ++i)
      for (int j = 0; i + j <= 4; ++j) {
        if (i + j == 0 || h.dlog[i][j] == 0.0) continue;
        const double c = h.dlog[i][j] / (fact[i] * fact[j]);
        if (i > 0) g.x() += c * i * std::pow(x.x(), i - 1) * std::pow(x.y(), j);
        if (j > 0) g.y() += c * j * std::pow(x.x(), i) * std::pow(x.y(), j - 1);
      }
    const double V = h.exact ? h.exact(x.x(), x.y()) : h.v0 * std::exp(h.log_taylor(x.x(), x.y()));
    return V * g.dot(xi);
  }
  const double step = 1e-6;
  const Eigen::Vector2d dx = step * xi;
  return (h.exact(x.x() + dx.x(), x.y() + dx.y()) - h.exact(x.x() - dx.x(), x.y() - dx.y())) / (2.0 * step);
}

}  // namespace

PohozaevReport pohozaev_residual(const PolarTrace& v, const HField& h, const BubbleParams& p, double sigma,
                                 const Eigen::Vector2d& xi, int n_theta) {
  if (p.alpha != 0.0)
    throw std::invalid_argument("pohozaev_residual: the identity is used in the regular case (alpha = 0)");
  if (std::abs(xi.norm() - 1.0) > 1e-12) throw std::invalid_argument("pohozaev_residual: xi must be a unit vector");
  const double eps = p.eps();
  const double rho = std::pow(eps, -sigma);

  PohozaevReport rep;
  rep.sigma = sigma;
  rep.xi = xi;

  // volume term: eps int d_xi h(eps y) e^v
  const int nv = 64;
  auto ring = [&](double r) {
    double acc = 0.0;
    for (int k = 0; k < nv; ++k) {
      const double th = 2.0 * M_PI * k / nv;
      const Eigen::Vector2d x = eps * r * Eigen::Vector2d(std::cos(th), std::sin(th));
      acc += dxi_weight(h, x, xi) * std::exp(v.value(r, th));
    }
    return 2.0 * M_PI * r * acc / nv;
  };
  QuadratureSpec sp;
  sp.rel_tol = 1e-12;
  sp.abs_tol = 1e-15;
  rep.lhs_volume = eps * integrate_radial(ring, 0.0, 0.0, rho, sp);

  // boundary terms on |y| = rho
  const double thxi = std::atan2(xi.y(), xi.x());
  double acc = 0.0;
  for (int k = 0; k < n_theta; ++k) {
    const double th = 2.0 * M_PI * k / n_theta;
    const double xinu = std::cos(th - thxi);
    const double xitan = -std::sin(th - thxi);
    const double vr = v.dr(rho, th);
    const double vt = v.dtheta(rho, th) / rho;
    const Eigen::Vector2d x = eps * rho * Eigen::Vector2d(std::cos(th), std::sin(th));
    const double V = h.exact ? h.exact(x.x(), x.y()) : h.v0 * std::exp(h.log_taylor(x.x(), x.y()));
    const double dxiv = xinu * vr + xitan * vt;
    acc += V * std::exp(v.value(rho, th)) * xinu + vr * dxiv - 0.5 * (vr * vr + vt * vt) * xinu;
  }
  rep.rhs_boundary = acc * 2.0 * M_PI * rho / n_theta;
  rep.residual = rep.lhs_volume - rep.rhs_boundary;
  return rep;
}

RateExtract vanishing_rate_extract(const std::vector<double>& lambdas, const Eigen::ArrayXd& lhs_sigma1,
                                   const Eigen::ArrayXd& lhs_sigma2, double sigma1, double sigma2,
                                   const BubbleParams& base, const HField& h, const Eigen::Vector2d& xi) {
  (void)xi;
  if (std::abs(sigma1 - sigma2) < 5e-3)
    throw std::invalid_argument("vanishing_rate_extract: sigma pair too close (ill-conditioned elimination)");
  RateExtract out;
  out.lambdas = lambdas;
  out.sigma1 = sigma1;
  out.sigma2 = sigma2;
  const int n = static_cast<int>(lambdas.size());
  out.eps.resize(n);
  out.grad_log_h_rate.resize(n);
  out.grad_lap_h_rate.resize(n);
  for (int i = 0; i < n; ++i) {
    const double eps = base.with_lambda(lambdas[i]).eps();
    out.eps[i] = eps;
    const double ln = std::log(1.0 / eps);
    // lhs(sigma) = 8 pi eps A + (16 pi / h0^2) eps^3 B (2 sigma ln(1/eps) + O(1))
    const double Bterm = (lhs_sigma1[i] - lhs_sigma2[i]) / (2.0 * (sigma1 - sigma2) * ln);
    out.grad_lap_h_rate[i] = Bterm * h.v0 * h.v0 / (16.0 * M_PI * eps * eps * eps);
    const double Aterm = lhs_sigma1[i] - Bterm * 2.0 * sigma1 * ln;
    out.grad_log_h_rate[i] = Aterm / (8.0 * M_PI * eps);
  }
  return out;
}

std::pair<double, double> mode1_projection(const std::function<double(double, double)>& u,
                                           const Eigen::Vector2d& q, double tau, int n_theta) {
  if (!(q.norm() < tau)) throw std::invalid_argument("mode1_projection: center must lie inside the disk");
  const double ttilde = tau - q.norm();
  double ac = 0.0, as = 0.0;
  for (int k = 0; k < n_theta; ++k) {
    const double th = 2.0 * M_PI * k / n_theta;
    const double val = u(q.x() + ttilde * std::cos(th), q.y() + ttilde * std::sin(th));
    ac += val * std::cos(th);
    as += val * std::sin(th);
  }
  return {ac / n_theta, as / n_theta};
}

}  // namespace blab
