#include "blab/geometry.hpp"

#include <cmath>

#include "blab/bubble.hpp"
#include "blab/expansion.hpp"
#include "blab/fit.hpp"
#include "blab/quadrature.hpp"

namespace blab {

namespace {

// E1(z) for z > 0: series below 4, Lentz continued fraction above
double exp_int_e1(double z) {
  if (z <= 0.0) throw std::domain_error("E1: z must be positive");
  if (z > 36.0) return 0.0;  // < 2e-18
  if (z <= 4.0) {
    double sum = 0.0, term = 1.0;
    for (int k = 1; k < 40; ++k) {
      term *= -z / k;
      sum -= term / k;  // sum_{k>=1} (-1)^(k+1) z^k / (k k!)
      if (std::abs(term / k) < 1e-18) break;
    }
    return -0.57721566490153286061 - std::log(z) + sum;
  }
  double b = z + 1.0, c = 1e300, d = 1.0 / b, h = d;
  for (int i = 1; i <= 60; ++i) {
    const double a = -static_cast<double>(i) * i;
    b += 2.0;
    d = 1.0 / (a * d + b);
    c = b + a / c;
    const double del = c * d;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return h * std::exp(-z);
}

}  // namespace

ManifoldContext ManifoldContext::flat_torus(double w1, double w2, double K) {
  if (!(w1 > 0.0 && w2 > 0.0)) throw std::invalid_argument("flat_torus: periods must be positive");
  ManifoldContext m;
  m.kind = Kind::FlatTorus;
  m.L1 = w1;
  m.L2 = w2;
  m.area = w1 * w2;
  m.curvature = K;
  m.build_ewald();
  return m;
}

ManifoldContext ManifoldContext::disk(double R) {
  if (!(R > 0.0)) throw std::invalid_argument("disk: radius must be positive");
  ManifoldContext m;
  m.kind = Kind::Disk;
  m.radius = R;
  m.area = M_PI * R * R;
  return m;
}

ManifoldContext ManifoldContext::rectangle(double a, double b) {
  if (!(a > 0.0 && b > 0.0)) throw std::invalid_argument("rectangle: sides must be positive");
  ManifoldContext m;
  m.kind = Kind::Rectangle;
  m.L1 = a;
  m.L2 = b;
  m.area = a * b;
  // Dirichlet Green function through four signed images on the doubled torus
  ManifoldContext doubled = flat_torus(2.0 * a, 2.0 * b);
  m.ewald_ = doubled.ewald_;
  return m;
}

void ManifoldContext::build_ewald() {
  auto ew = std::make_shared<Ewald>();
  // truncation bounds target 1e-13: e^(-z) dies by z = 33
  ew->eta = 5.0 / std::sqrt(area);
  const double rcut = 5.8 / ew->eta;
  const int n1 = static_cast<int>(std::ceil(rcut / L1)) + 1;
  const int n2 = static_cast<int>(std::ceil(rcut / L2)) + 1;
  for (int i = -n1; i <= n1; ++i)
    for (int j = -n2; j <= n2; ++j) ew->shifts.push_back({i * L1, j * L2});
  const double kcut = 2.0 * ew->eta * 5.8;
  const int m1 = static_cast<int>(std::ceil(kcut * L1 / (2.0 * M_PI))) + 1;
  const int m2 = static_cast<int>(std::ceil(kcut * L2 / (2.0 * M_PI))) + 1;
  for (int i = -m1; i <= m1; ++i)
    for (int j = -m2; j <= m2; ++j) {
      if (i == 0 && j == 0) continue;
      const double k1 = 2.0 * M_PI * i / L1, k2 = 2.0 * M_PI * j / L2;
      const double k2n = k1 * k1 + k2 * k2;
      if (k2n > kcut * kcut) continue;
      ew->modes.push_back({k1, k2, std::exp(-k2n / (4.0 * ew->eta * ew->eta)) / (k2n * area)});
    }
  ew->c0 = -1.0 / (4.0 * area * ew->eta * ew->eta);
  ewald_ = std::move(ew);
}

Eigen::Vector2d ManifoldContext::displacement(const Eigen::Vector2d& x, const Eigen::Vector2d& p) const {
  Eigen::Vector2d d = x - p;
  if (kind == Kind::FlatTorus) {
    d.x() -= L1 * std::round(d.x() / L1);
    d.y() -= L2 * std::round(d.y() / L2);
  }
  return d;
}

double ManifoldContext::torus_green(const Eigen::Vector2d& d) const {
  const Ewald& ew = *ewald_;
  double g = ew.c0;
  for (const auto& s : ew.shifts) {
    const double r2 = (d + s).squaredNorm();
    if (r2 == 0.0) throw std::domain_error("green: x = p (use regular_part)");
    const double z = ew.eta * ew.eta * r2;
    if (z < 36.0) g += exp_int_e1(z) / (4.0 * M_PI);
  }
  for (const auto& m : ew.modes) g += m.z() * std::cos(m.x() * d.x() + m.y() * d.y());
  return g;
}

Eigen::Vector2d ManifoldContext::torus_green_grad(const Eigen::Vector2d& d) const {
  const Ewald& ew = *ewald_;
  Eigen::Vector2d g = Eigen::Vector2d::Zero();
  for (const auto& s : ew.shifts) {
    const Eigen::Vector2d v = d + s;
    const double r2 = v.squaredNorm();
    if (r2 == 0.0) throw std::domain_error("green_grad: x = p");
    const double z = ew.eta * ew.eta * r2;
    if (z < 40.0) g -= v * (std::exp(-z) / (2.0 * M_PI * r2));
  }
  for (const auto& m : ew.modes) {
    const double s = std::sin(m.x() * d.x() + m.y() * d.y());
    g.x() -= m.z() * m.x() * s;
    g.y() -= m.z() * m.y() * s;
  }
  return g;
}

double ManifoldContext::green(const Eigen::Vector2d& x, const Eigen::Vector2d& p) const {
  switch (kind) {
    case Kind::FlatTorus:
      return torus_green(displacement(x, p));
    case Kind::Disk: {
      const double R = radius;
      const double dn = (x - p).norm();
      if (dn == 0.0) throw std::domain_error("green: x = p (use regular_part)");
      const double pn = p.norm();
      if (pn < 1e-14) return -std::log(x.norm() / R) / (2.0 * M_PI);
      const Eigen::Vector2d pstar = p * (R * R / (pn * pn));
      return (-std::log(dn) + std::log(pn * (x - pstar).norm() / R)) / (2.0 * M_PI);
    }
    case Kind::Rectangle: {
      // signed images p, (-p1,p2), (p1,-p2), -p on the (2L1, 2L2) torus
      const Eigen::Vector2d i1(-p.x(), p.y()), i2(p.x(), -p.y()), i3(-p.x(), -p.y());
      auto wrap = [&](const Eigen::Vector2d& q) {
        Eigen::Vector2d d = x - q;
        d.x() -= 2.0 * L1 * std::round(d.x() / (2.0 * L1));
        d.y() -= 2.0 * L2 * std::round(d.y() / (2.0 * L2));
        return d;
      };
      return torus_green(wrap(p)) - torus_green(wrap(i1)) - torus_green(wrap(i2)) + torus_green(wrap(i3));
    }
  }
  throw std::logic_error("green: bad kind");
}

Eigen::Vector2d ManifoldContext::green_grad(const Eigen::Vector2d& x, const Eigen::Vector2d& p) const {
  switch (kind) {
    case Kind::FlatTorus:
      return torus_green_grad(displacement(x, p));
    case Kind::Disk: {
      const double R = radius;
      const Eigen::Vector2d d = x - p;
      const double pn = p.norm();
      if (pn < 1e-14) return -x / (2.0 * M_PI * x.squaredNorm());
      const Eigen::Vector2d pstar = p * (R * R / (pn * pn));
      const Eigen::Vector2d ds = x - pstar;
      return -d / (2.0 * M_PI * d.squaredNorm()) + ds / (2.0 * M_PI * ds.squaredNorm());
    }
    case Kind::Rectangle: {
      const Eigen::Vector2d i1(-p.x(), p.y()), i2(p.x(), -p.y()), i3(-p.x(), -p.y());
      auto wrap = [&](const Eigen::Vector2d& q) {
        Eigen::Vector2d d = x - q;
        d.x() -= 2.0 * L1 * std::round(d.x() / (2.0 * L1));
        d.y() -= 2.0 * L2 * std::round(d.y() / (2.0 * L2));
        return d;
      };
      return torus_green_grad(wrap(p)) - torus_green_grad(wrap(i1)) - torus_green_grad(wrap(i2)) +
             torus_green_grad(wrap(i3));
    }
  }
  throw std::logic_error("green_grad: bad kind");
}

double ManifoldContext::regular_at(const Eigen::Vector2d& x, const Eigen::Vector2d& p) const {
  return green(x, p) + std::log(displacement(x, p).norm()) / (2.0 * M_PI);
}

double ManifoldContext::regular_diagonal(const Eigen::Vector2d& p) const {
  switch (kind) {
    case Kind::FlatTorus: {
      // the log and the n = 0 Ewald term combine into the entire Ein series
      const Ewald& ew = *ewald_;
      double r = (-0.57721566490153286061 - 2.0 * std::log(ew.eta)) / (4.0 * M_PI) + ew.c0;
      for (const auto& s : ew.shifts) {
        const double r2 = s.squaredNorm();
        if (r2 == 0.0) continue;
        const double z = ew.eta * ew.eta * r2;
        if (z < 36.0) r += exp_int_e1(z) / (4.0 * M_PI);
      }
      for (const auto& m : ew.modes) r += m.z();
      return r;
    }
    case Kind::Disk:
      return std::log((radius * radius - p.squaredNorm()) / radius) / (2.0 * M_PI);
    case Kind::Rectangle: {
      const Eigen::Vector2d i1(-p.x(), p.y()), i2(p.x(), -p.y()), i3(-p.x(), -p.y());
      auto wrap = [&](const Eigen::Vector2d& q) {
        Eigen::Vector2d d = p - q;
        d.x() -= 2.0 * L1 * std::round(d.x() / (2.0 * L1));
        d.y() -= 2.0 * L2 * std::round(d.y() / (2.0 * L2));
        return d;
      };
      // diagonal part of the own image plus the three finite image terms
      ManifoldContext doubled;
      doubled.kind = Kind::FlatTorus;
      doubled.L1 = 2.0 * L1;
      doubled.L2 = 2.0 * L2;
      doubled.area = 4.0 * L1 * L2;
      doubled.ewald_ = ewald_;
      return doubled.regular_diagonal(p) - torus_green(wrap(i1)) - torus_green(wrap(i2)) +
             torus_green(wrap(i3));
    }
  }
  throw std::logic_error("regular_diagonal: bad kind");
}

GreenValue green_eval(const ManifoldContext& M, const Eigen::Vector2d& x, const Eigen::Vector2d& p) {
  return {M.green(x, p), M.green_grad(x, p)};
}

RegularPart regular_part(const ManifoldContext& M, const Eigen::Vector2d& p) {
  if (M.kind == ManifoldContext::Kind::Disk && !(p.norm() < M.radius))
    throw std::invalid_argument("regular_part: point must be interior");
  RegularPart out;
  // direction-averaged values of R(p + delta e, p); averaging kills the odd
  // orders so the sequence is even in delta and Richardson converges fast
  const double scale = (M.kind == ManifoldContext::Kind::Disk) ? (M.radius - p.norm()) : std::min(M.L1, M.L2);
  std::vector<double> seq;
  double delta = 0.05 * scale;
  for (int lev = 0; lev < 7; ++lev) {
    double acc = 0.0;
    for (int q = 0; q < 4; ++q) {
      const double th = 0.25 * M_PI + 0.5 * M_PI * q;
      acc += M.regular_at(p + delta * Eigen::Vector2d(std::cos(th), std::sin(th)), p);
    }
    seq.push_back(acc / 4.0);
    delta *= 0.5;
  }
  RichardsonResult rr = richardson_extrapolate(seq);
  out.value = rr.value;
  out.converged = rr.cauchy;
  out.err_estimate = rr.last_diff;
  if (!out.converged) throw std::runtime_error("regular_part: extrapolation not converging");
  // gradient of R(., p) across the diagonal by centered differences
  const double h = 1e-5 * scale;
  out.grad.x() = (M.regular_at(p + Eigen::Vector2d(h, 0), p) - M.regular_at(p - Eigen::Vector2d(h, 0), p)) / (2 * h);
  out.grad.y() = (M.regular_at(p + Eigen::Vector2d(0, h), p) - M.regular_at(p - Eigen::Vector2d(0, h), p)) / (2 * h);
  return out;
}

void SourceSet::validate() const {
  if (points.size() != alphas.size()) throw std::invalid_argument("SourceSet: size mismatch");
  for (size_t i = 0; i < points.size(); ++i) {
    if (!(alphas[i] > -1.0)) throw std::invalid_argument("SourceSet: alpha must be > -1");
    for (size_t j = i + 1; j < points.size(); ++j)
      if ((points[i] - points[j]).norm() < 1e-12) throw std::invalid_argument("SourceSet: points must be distinct");
  }
}

HField SourceSet::h_field_at(const Eigen::Vector2d& x) const {
  if (!h) return HField::radial(1.0, 0.0);
  return HField::from_expr(h, x.x(), x.y());
}

double SourceSet::rho_star() const {
  double s = 0.0;
  for (double a : alphas) s += 1.0 + a;
  return 8.0 * M_PI * s;
}

double SourceSet::n_star() const {
  double s = 0.0;
  for (double a : alphas) s += a;
  return 4.0 * M_PI * s;
}

double SourceSet::alpha_max() const {
  double m = -1.0;
  for (double a : alphas) m = std::max(m, a);
  return m;
}

std::vector<int> SourceSet::argmax_alpha() const {
  const double m = alpha_max();
  std::vector<int> idx;
  for (size_t i = 0; i < alphas.size(); ++i)
    if (std::abs(alphas[i] - m) < 1e-12) idx.push_back(static_cast<int>(i));
  return idx;
}

double gstar_eval(const ManifoldContext& M, const SourceSet& S, int j, const Eigen::Vector2d& x) {
  double g = 8.0 * M_PI * (1.0 + S.alphas[j]) * M.regular_at(x, S.points[j]);
  for (int l = 0; l < S.size(); ++l) {
    if (l == j) continue;
    if ((x - S.points[l]).norm() < 1e-12)
      throw std::invalid_argument("gstar_eval: x coincides with another source");
    g += 8.0 * M_PI * (1.0 + S.alphas[l]) * M.green(x, S.points[l]);
  }
  return g;
}

double gstar_at_point(const ManifoldContext& M, const SourceSet& S, int j) {
  double g = 8.0 * M_PI * (1.0 + S.alphas[j]) * M.regular_diagonal(S.points[j]);
  for (int l = 0; l < S.size(); ++l)
    if (l != j) g += 8.0 * M_PI * (1.0 + S.alphas[l]) * M.green(S.points[j], S.points[l]);
  return g;
}

double L_eval(const ManifoldContext& M, const SourceSet& S) {
  S.validate();
  const double aM = S.alpha_max();
  const double extra = M.dirichlet() ? 0.0 : S.rho_star() - S.n_star() - 2.0 * M.curvature;
  double L = 0.0;
  for (int j : S.argmax_alpha()) {
    const HField hf = S.h_field_at(S.points[j]);
    const double bracket = hf.lap_log() + extra;
    L += bracket * std::pow(hf.v0, 1.0 / (1.0 + aM)) * std::exp(gstar_at_point(M, S, j) / (1.0 + aM));
  }
  return L;
}

double fstar_value(const ManifoldContext& M, const SourceSet& S, const std::vector<Eigen::Vector2d>& xs) {
  double f = 0.0;
  for (size_t j = 0; j < xs.size(); ++j) {
    f += std::log(S.h_at(xs[j])) + 4.0 * M_PI * M.regular_diagonal(xs[j]);
    for (size_t l = 0; l < xs.size(); ++l)
      if (l != j) f += 4.0 * M_PI * M.green(xs[l], xs[j]);
    for (int i = 0; i < S.size(); ++i)
      f += 8.0 * M_PI * (1.0 + S.alphas[i]) * M.green(xs[j], S.points[i]);
  }
  return f;
}

FStarResult fstar_eval(const ManifoldContext& M, const SourceSet& S,
                       const std::vector<Eigen::Vector2d>& regular_points) {
  for (const auto& x : regular_points)
    for (int i = 0; i < S.size(); ++i)
      if ((x - S.points[i]).norm() < 1e-6)
        throw std::invalid_argument("fstar_eval: regular point too close to a singular source");
  const int n = 2 * static_cast<int>(regular_points.size());
  FStarResult out;
  out.grad.resize(n);
  out.hess.resize(n, n);
  auto val = [&](const Eigen::VectorXd& z) {
    std::vector<Eigen::Vector2d> xs(regular_points.size());
    for (size_t i = 0; i < xs.size(); ++i) xs[i] = {z[2 * i], z[2 * i + 1]};
    return fstar_value(M, S, xs);
  };
  Eigen::VectorXd z0(n);
  for (size_t i = 0; i < regular_points.size(); ++i) {
    z0[2 * i] = regular_points[i].x();
    z0[2 * i + 1] = regular_points[i].y();
  }
  out.value = val(z0);
  // centered differences, cube-root step with one Richardson pass
  const double scale = M.dirichlet() ? M.radius : std::min(M.L1, M.L2);
  const double h0 = std::cbrt(std::numeric_limits<double>::epsilon()) * scale * 10.0;
  auto fd_grad = [&](double h, int i) {
    Eigen::VectorXd zp = z0, zm = z0;
    zp[i] += h;
    zm[i] -= h;
    return (val(zp) - val(zm)) / (2.0 * h);
  };
  for (int i = 0; i < n; ++i) {
    const double g1 = fd_grad(h0, i), g2 = fd_grad(0.5 * h0, i);
    out.grad[i] = (4.0 * g2 - g1) / 3.0;
  }
  auto fd_hess = [&](double h, int i, int j) {
    if (i == j) {
      Eigen::VectorXd zp = z0, zm = z0;
      zp[i] += h;
      zm[i] -= h;
      return (val(zp) - 2.0 * out.value + val(zm)) / (h * h);
    }
    Eigen::VectorXd zpp = z0, zpm = z0, zmp = z0, zmm = z0;
    zpp[i] += h;
    zpp[j] += h;
    zpm[i] += h;
    zpm[j] -= h;
    zmp[i] -= h;
    zmp[j] += h;
    zmm[i] -= h;
    zmm[j] -= h;
    return (val(zpp) - val(zpm) - val(zmp) + val(zmm)) / (4.0 * h * h);
  };
  const double h1 = std::sqrt(std::sqrt(std::numeric_limits<double>::epsilon())) * scale;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const double a1 = fd_hess(h1, i, j), a2 = fd_hess(0.5 * h1, i, j);
      out.hess(i, j) = out.hess(j, i) = (4.0 * a2 - a1) / 3.0;
    }
  out.det = out.hess.determinant();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out.hess);
  const double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
  const double lmin = es.eigenvalues().cwiseAbs().minCoeff();
  out.condition = lmin > 0.0 ? lmax / lmin : std::numeric_limits<double>::infinity();
  return out;
}

namespace {

// smooth cutoff: 1 on [0, 1/2], 0 on [1, inf)
double smoothstep_window(double t) {
  if (t <= 0.5) return 1.0;
  if (t >= 1.0) return 0.0;
  const double s = (t - 0.5) / 0.5;
  const double u = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
  return 1.0 - u;
}

}  // namespace

DReport D_eval(const ManifoldContext& M, const SourceSet& S, const std::vector<double>& r_seq, int grid_n) {
  if (M.kind != ManifoldContext::Kind::FlatTorus)
    throw std::invalid_argument("D_eval: implemented on the flat torus");
  S.validate();
  const int m = S.size();
  DReport rep;
  rep.r_values = r_seq;

  // criticality (neg-crit) is verified and reported, never enforced
  double crit = 0.0;
  for (int j = 0; j < m; ++j) {
    Eigen::Vector2d g = Eigen::Vector2d::Zero();
    const HField hf = S.h_field_at(S.points[j]);
    g += hf.grad_log();
    for (int l = 0; l < m; ++l)
      if (l != j) g += 8.0 * M_PI * (1.0 + S.alphas[l]) * M.green_grad(S.points[j], S.points[l]);
    // the regular-part gradient vanishes on the torus by symmetry
    crit = std::max(crit, g.norm());
  }
  rep.criticality_residual = crit;
  rep.criticality_ok = crit < 1e-6;

  // per-point normalizations
  std::vector<double> gstar(m), hj(m), W(m), hq(m);
  for (int j = 0; j < m; ++j) {
    gstar[j] = gstar_at_point(M, S, j);
    hq[j] = S.h_at(S.points[j]);
    double lhj = std::log(hq[j]) - 4.0 * M_PI * S.alphas[j] * M.regular_diagonal(S.points[j]);
    for (int l = 0; l < m; ++l)
      if (l != j) lhj -= 4.0 * M_PI * S.alphas[l] * M.green(S.points[j], S.points[l]);
    hj[j] = std::exp(lhj);
    W[j] = hq[j] / hj[j];
  }
  // Psi(x) = log h(x) + sum_l (8 pi + 4 pi a_l) G(x, q_l), so e^{Phi_j} = W_j e^{Psi} / (h(q_j) e^{G*_j})
  auto psi = [&](const Eigen::Vector2d& x) {
    double s = std::log(S.h_at(x));
    for (int l = 0; l < m; ++l) s += (8.0 * M_PI + 4.0 * M_PI * S.alphas[l]) * M.green(x, S.points[l]);
    return s;
  };

  // Voronoi assignment under the flat metric and cutoff radii
  std::vector<double> dj(m, 0.25 * std::min(M.L1, M.L2));
  for (int j = 0; j < m; ++j)
    for (int l = 0; l < m; ++l)
      if (l != j) dj[j] = std::min(dj[j], 0.45 * M.displacement(S.points[j], S.points[l]).norm());
  auto owner = [&](const Eigen::Vector2d& x) {
    int best = 0;
    double bd = M.displacement(x, S.points[0]).squaredNorm();
    for (int l = 1; l < m; ++l) {
      const double d2 = M.displacement(x, S.points[l]).squaredNorm();
      if (d2 < bd) {
        bd = d2;
        best = l;
      }
    }
    return best;
  };

  // grid part: int_M e^Psi W_{cell} (1 - eta_j) over the periodic cell
  double grid_part = 0.0;
  {
    const int N = grid_n;
    const double dx = M.L1 / N, dy = M.L2 / N;
    for (int i = 0; i < N; ++i)
      for (int k = 0; k < N; ++k) {
        const Eigen::Vector2d x((i + 0.5) * dx, (k + 0.5) * dy);
        double eta = 0.0;
        for (int j = 0; j < m; ++j) {
          const double s = M.displacement(x, S.points[j]).norm();
          if (s < dj[j]) eta = std::max(eta, smoothstep_window(s / dj[j]));
        }
        if (eta >= 1.0) continue;
        grid_part += std::exp(psi(x)) * W[owner(x)] * (1.0 - eta) * dx * dy;
      }
  }

  // polar parts depend on the deleted radius; everything else is fixed.
  // Gauss panels between log-grid nodes keep the steep local factor exact
  // enough for the counterterm cancellation (relative ~1e-11 needed)
  const int nth = 64;
  const GaussRule& gl8 = gauss_legendre(8);
  auto ring_mean = [&](int j, double rr) {
    double ring = 0.0;
    for (int k = 0; k < nth; ++k) {
      const double th = 2.0 * M_PI * k / nth;
      const Eigen::Vector2d x = S.points[j] + rr * Eigen::Vector2d(std::cos(th), std::sin(th));
      ring += std::exp(psi(x));
    }
    return ring / nth;
  };
  auto polar_part = [&](int j, double rj) {
    const Eigen::ArrayXd rad = log_grid(rj, dj[j], 240);
    double acc = 0.0;
    for (int i = 0; i + 1 < rad.size(); ++i) {
      const double c = 0.5 * (rad[i] + rad[i + 1]), hw = 0.5 * (rad[i + 1] - rad[i]);
      for (int k = 0; k < gl8.x.size(); ++k) {
        const double rr = c + hw * gl8.x[k];
        acc += gl8.w[k] * hw * smoothstep_window(rr / dj[j]) * 2.0 * M_PI * rr * ring_mean(j, rr);
      }
    }
    return acc;
  };

  for (double r : r_seq) {
    double S_r = grid_part;
    for (int j = 0; j < m; ++j) {
      const double aj = S.alphas[j];
      const double rj = (aj == 0.0) ? r * std::sqrt(8.0 * hq[j] * std::exp(gstar[j])) : r;
      if (rj >= dj[j]) throw std::invalid_argument("D_eval: deleted radius exceeds the cell guard");
      S_r += W[j] * polar_part(j, rj);
      S_r -= hq[j] * std::exp(gstar[j]) * (M_PI / (1.0 + aj)) * std::pow(rj, -2.0 - 2.0 * aj);
    }
    rep.partial.push_back(S_r);
  }
  RichardsonResult rr = richardson_extrapolate(rep.partial);
  rep.value = rr.value;
  rep.est_order = rr.est_order;
  rep.cauchy = rr.cauchy;
  rep.diffs = rr.diffs;

  // partition sensitivity: bias the Voronoi assignment and redo the grid part
  if (m > 1) {
    double biased = 0.0;
    const int N = grid_n;
    const double dx = M.L1 / N, dy = M.L2 / N;
    const double bias = 0.05 * std::min(M.L1, M.L2);
    for (int i = 0; i < N; ++i)
      for (int k = 0; k < N; ++k) {
        const Eigen::Vector2d x((i + 0.5) * dx, (k + 0.5) * dy);
        double eta = 0.0;
        for (int j = 0; j < m; ++j) {
          const double s = M.displacement(x, S.points[j]).norm();
          if (s < dj[j]) eta = std::max(eta, smoothstep_window(s / dj[j]));
        }
        if (eta >= 1.0) continue;
        int best = 0;
        double bd = M.displacement(x, S.points[0]).norm() - bias;
        for (int l = 1; l < m; ++l) {
          const double d2 = M.displacement(x, S.points[l]).norm();
          if (d2 < bd) {
            bd = d2;
            best = l;
          }
        }
        biased += std::exp(psi(x)) * W[best] * (1.0 - eta) * dx * dy;
      }
    rep.partition_sensitivity = std::abs(biased - grid_part);
  }
  return rep;
}

double d_eval_calibration(double alpha, const std::vector<double>& r_seq, double R0) {
  std::vector<double> seq;
  for (double r : r_seq) {
    auto f = [&](double s) { return 2.0 * M_PI * s * std::pow(s, -4.0 - 2.0 * alpha); };
    const double integral = integrate_radial(f, 0.0, r, R0);
    const double bracket = integral - (M_PI / (1.0 + alpha)) * std::pow(r, -2.0 - 2.0 * alpha) +
                           (M_PI / (1.0 + alpha)) * std::pow(R0, -2.0 - 2.0 * alpha);
    seq.push_back(bracket);
  }
  return richardson_extrapolate(seq).value;
}

RhoRateReport rho_residual_rate(const ManifoldContext& M, const SourceSet& S, double tau,
                                const std::vector<double>& lambdas) {
  S.validate();
  const int m = S.size();
  const double aM = S.alpha_max();
  const double rho_star = S.rho_star();
  RhoRateReport rep;
  rep.lambdas = lambdas;
  rep.L_value = L_eval(M, S);
  const int n = static_cast<int>(lambdas.size());
  rep.eps_pow.resize(n);
  rep.rho_diff.resize(n);

  // per-point local weights: value and Taylor data of log h~_j at p_j; the
  // Green-function terms add rho* - N* - 2K to the log-laplacian and their
  // gradients (with the f_k gauge choice) to the log-gradient
  const double extra_lap = M.dirichlet() ? 0.0 : rho_star - S.n_star() - 2.0 * M.curvature;
  double sum_alpha = 0.0;
  for (double a : S.alphas) sum_alpha += a;
  std::vector<HField> hloc(m);
  std::vector<double> gst(m);
  for (int j = 0; j < m; ++j) {
    const HField hf = S.h_field_at(S.points[j]);
    gst[j] = gstar_at_point(M, S, j);
    double lv = std::log(rho_star * hf.v0) - 4.0 * M_PI * S.alphas[j] * M.regular_diagonal(S.points[j]);
    Eigen::Vector2d gl = hf.grad_log();
    for (int l = 0; l < m; ++l) {
      if (l == j) continue;
      lv -= 4.0 * M_PI * S.alphas[l] * M.green(S.points[j], S.points[l]);
      gl -= 4.0 * M_PI * S.alphas[l] * M.green_grad(S.points[j], S.points[l]);
    }
    // gauge term f_k: Delta f = rho, f(p_j) = 0; gradient from its Green sum
    for (int l = 0; l < m; ++l) {
      if (l == j) continue;
      gl += rho_star / (m + sum_alpha) * (1.0 + S.alphas[l]) * M.green_grad(S.points[j], S.points[l]);
    }
    std::array<std::array<double, 5>, 5> dl{};
    dl[1][0] = gl.x();
    dl[0][1] = gl.y();
    dl[2][0] = 0.5 * (hf.lap_log() + extra_lap);
    dl[0][2] = 0.5 * (hf.lap_log() + extra_lap);
    hloc[j] = HField::from_log_derivs(std::exp(lv), dl);
  }

  for (int i = 0; i < n; ++i) {
    // lock the bubble heights through the far-field matching relations
    const int j0 = S.argmax_alpha().front();
    const double lam1 = lambdas[i];
    const double ubar = -lam1 - gst[j0] - 2.0 * std::log(hloc[j0].v0 / (8.0 * std::pow(1.0 + S.alphas[j0], 2)));
    double rho_k = 0.0;
    for (int j = 0; j < m; ++j) {
      const double lamj = -ubar - gst[j] - 2.0 * std::log(hloc[j].v0 / (8.0 * std::pow(1.0 + S.alphas[j], 2)));
      BubbleParams p(S.alphas[j], hloc[j].v0, lamj);
      ExpansionField f(p, hloc[j], tau, ExpansionOrder::Full, 900);
      rho_k += assembled_mass(f);
    }
    rep.eps_pow[i] = std::exp(-lam1 / (1.0 + aM));
    rep.rho_diff[i] = rho_k - rho_star;
  }
  rep.fitted_coeff = fit_proportional(rep.eps_pow, rep.rho_diff);
  rep.sign_matches_L = rep.fitted_coeff * rep.L_value > 0.0;
  return rep;
}

}  // namespace blab
