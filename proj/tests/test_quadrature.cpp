#include "blab/quadrature.hpp"

#include <cmath>

#include "blab/fit.hpp"
#include "doctest.h"

using namespace blab;

TEST_CASE("gauss rules integrate polynomials exactly") {
  const GaussRule& gl = gauss_legendre(8);
  double s = 0.0;
  for (int i = 0; i < gl.x.size(); ++i) s += gl.w[i] * std::pow(gl.x[i], 6);
  CHECK(s == doctest::Approx(2.0 / 7.0).epsilon(1e-14));

  // Jacobi, weight (1+t)^b: int_{-1}^{1} (1+t)^b dt = 2^(b+1)/(b+1)
  for (double b : {-0.8, 0.5, 3.0}) {
    GaussRule gj = gauss_jacobi(6, b);
    CHECK(gj.w.sum() == doctest::Approx(std::pow(2.0, b + 1.0) / (b + 1.0)).epsilon(1e-13));
    // and x-moment: int (1+t)^b t dt = 2^(b+1) (b) / ((b+1)(b+2)) ... check numerically vs high-n rule
    GaussRule ref = gauss_jacobi(24, b);
    double m1 = 0.0, m1r = 0.0;
    for (int i = 0; i < gj.x.size(); ++i) m1 += gj.w[i] * gj.x[i];
    for (int i = 0; i < ref.x.size(); ++i) m1r += ref.w[i] * ref.x[i];
    CHECK(m1 == doctest::Approx(m1r).epsilon(1e-12));
  }
}

TEST_CASE("integrate_radial: power rule and singular endpoint") {
  // int_0^1 r^(2a) dr = 1/(2a+1), a = 0.25 -> 2/3
  double v = integrate_radial([](double) { return 1.0; }, 0.25, 0.0, 1.0);
  CHECK(v == doctest::Approx(2.0 / 3.0).epsilon(1e-13));

  // weight folded by the caller: int_0^1 r^(-0.9) dr = 10 (via alpha = -0.45)
  v = integrate_radial([](double) { return 1.0; }, -0.45, 0.0, 1.0);
  CHECK(v == doctest::Approx(10.0).epsilon(1e-12));

  // smooth part alongside the weight
  v = integrate_radial([](double r) { return std::exp(-r); }, 0.5, 0.0, kInf);
  CHECK(v == doctest::Approx(std::tgamma(2.0)).epsilon(1e-12));  // int r e^-r = 1
}

TEST_CASE("integrate_radial: tail-model exactness on pure power laws") {
  QuadratureSpec sp;
  sp.tail_power = -3.0;
  double v = integrate_radial([](double r) { return std::pow(r, -3.0); }, 0.0, 1.0, kInf, sp);
  CHECK(v == doctest::Approx(0.5).epsilon(1e-14));

  sp.tail_power = -2.2;
  v = integrate_radial([](double r) { return std::pow(r, -2.2); }, 0.0, 2.0, kInf, sp);
  CHECK(v == doctest::Approx(std::pow(2.0, -1.2) / 1.2).epsilon(1e-13));
}

TEST_CASE("bubble mass agrees with quadrature of the defining integral") {
  for (double alpha : {-0.5, 0.0, 0.5, 1.5, 2.5}) {
    BubbleParams p(alpha, 6.3, 9.0);
    for (double R : {0.1, 1.0, 10.0}) {
      // integrand h0 r^(2a) e^U * 2 pi r; Jacobian folded: weight exponent 2(a + 1/2)
      auto f = [&](double r) { return 2.0 * M_PI * p.h0 * std::exp(bubble_profile(p, r)); };
      double q = integrate_radial(f, alpha + 0.5, 0.0, R);
      CHECK(q == doctest::Approx(bubble_mass(p, R)).epsilon(1e-10));
    }
    QuadratureSpec sp;
    sp.tail_power = -3.0 - 2.0 * alpha;  // full integrand ~ r^(2a+1) r^(-4-4a)
    auto f = [&](double r) { return 2.0 * M_PI * p.h0 * std::exp(bubble_profile(p, r)); };
    double q = integrate_radial(f, alpha + 0.5, 0.0, kInf, sp);
    CHECK(q == doctest::Approx(8.0 * M_PI * (1.0 + alpha)).epsilon(1e-10));
  }
}

TEST_CASE("identity checks across the alpha grid") {
  // 20 non-integer alphas in (0.05, 5)
  for (int k = 0; k < 20; ++k) {
    const double alpha = 0.05 + k * 0.2475;
    IdentityReport r1 = identity1_check(alpha);
    INFO("alpha = ", alpha, " ident1 = ", r1.computed);
    CHECK(std::abs(r1.computed) < 1e-10);
    IdentityReport r2 = identity2_check(alpha);
    INFO("alpha = ", alpha, " ident2 err = ", r2.abs_error / std::abs(r2.reference));
    CHECK(r2.abs_error < 1e-8 * std::abs(r2.reference));
  }
  CHECK_THROWS(identity1_check(-0.2));
  CHECK_THROWS(identity2_check(0.0));
}

TEST_CASE("identity2 closed-form substitutions from the statement") {
  IdentityReport r = identity2_check(1.0);
  CHECK(r.reference == doctest::Approx(-2.0 * M_PI).epsilon(1e-15));
  r = identity2_check(0.5);
  CHECK(r.reference == doctest::Approx(-4.0 * M_PI / (1.5 * std::sin(2.0 * M_PI / 3.0))).epsilon(1e-15));
}

TEST_CASE("substitution path agrees with the direct path") {
  QuadratureSpec sp;
  for (double alpha : {0.3, 1.5, 2.5}) {
    const double K = (2.0 + alpha) / alpha;
    const double q = 2.0 + 2.0 * alpha;
    auto smooth = [&](double s) {
      const double e = q * std::log(s);
      const double w = e > 350.0 ? std::exp(-e) : 1.0 / (1.0 + std::exp(e));
      const double m = (K + 1.0) * w - 1.0;
      return s * s * s * m * m * (2.0 * w - 1.0) * w * w;
    };
    QuadratureSpec spd = sp;
    spd.tail_power = -2.0 * alpha - 1.0;
    const double direct = integrate_radial(smooth, alpha, 0.0, kInf, spd);
    const double sub = integrate_radial_substituted(smooth, alpha, 1.0, sp);
    CHECK(std::abs(direct - sub) < 10.0 * sp.rel_tol * std::max(1.0, std::abs(direct)) + 1e-11);
  }
}

TEST_CASE("b0k regular-case integral against high-precision oracle values") {
  // frozen from 30-digit evaluation of the closed form (oracle o1)
  BubbleParams p1(0.0, 8.0, 2.0 * std::log(50.0));  // a = 1, tau/eps = 50 at tau = 1
  CHECK(b0k_reg_eval(p1, 1.0) == doctest::Approx(-2.912822645598732762133).epsilon(1e-12));

  BubbleParams p2(0.0, 7.2, 2.0 * std::log(120.0));  // a = 0.9, L = 120
  CHECK(b0k_reg_eval(p2, 1.0) == doctest::Approx(-4.611068879686534612838).epsilon(1e-12));

  CHECK(b0k_reg_eval(BubbleParams(0.0, 8.0, 10.0), 0.0) == 0.0);
  CHECK_THROWS(b0k_reg_eval(BubbleParams(0.5, 8.0, 10.0), 1.0));
}

TEST_CASE("b0k growth fit: slope -1/a^2 against log(tau/eps)") {
  const double a = 0.7;
  BubbleParams base(0.0, 8.0 * a, 0.0);
  std::vector<double> lams = {18.0, 22.0, 26.0, 30.0};
  double prev_b = 0.0, prev_L = 0.0;
  for (size_t i = 0; i < lams.size(); ++i) {
    BubbleParams p = base.with_lambda(lams[i]);
    const double L = 0.4 / p.eps();
    const double b = b0k_reg_eval(p, 0.4);
    if (i > 0) {
      const double slope = (b - prev_b) / (std::log(L) - std::log(prev_L));
      CHECK(slope == doctest::Approx(-1.0 / (a * a)).epsilon(0.01));
    }
    prev_b = b;
    prev_L = L;
  }
}

TEST_CASE("d1k formula: limits and validation") {
  HField h = HField::radial(6.0, 0.8);
  BubbleParams p(1.5, 6.0, 120.0);
  D1k d = d1k_eval(p, h, 0.35);
  const double lead = -2.0 * M_PI * M_PI / (2.5 * std::sin(M_PI / 2.5)) * std::pow(8.0 * 2.5 * 2.5 / 6.0, 1.0 / 2.5);
  // eps -> 0 drops the tau^(-2a) eps^(2a) correction
  CHECK(d.lap_coeff == doctest::Approx(lead).epsilon(1e-12));
  CHECK(!d.decomposed);
  CHECK(d.combined == doctest::Approx(d.lap_coeff).epsilon(1e-12));

  // decomposed path when lap log V = 0 but grad != 0
  std::array<std::array<double, 5>, 5> dl{};
  dl[1][0] = 0.3;
  HField hg = HField::from_log_derivs(5.0, dl);
  D1k dg = d1k_eval(BubbleParams(0.5, 5.0, 12.0), hg, 0.3);
  CHECK(dg.decomposed);
  CHECK(dg.grad_coeff > 0.0);

  CHECK_THROWS(d1k_eval(BubbleParams(-0.5, 5.0, 12.0), h, 0.3));
}

TEST_CASE("d1k two-route check: flux formula vs direct quadrature of E1 xi") {
  // int_{B_R} E1 xi with E1 = (e^2/4) V0 r^(2a) e^U ((g+r)^2 |grad log V|^2 + lap r^2),
  // against (lap_coeff * lap + grad_coeff) * eps^2, over a lambda sweep
  const double alpha = 0.8, h0 = 7.0, tau = 0.3, lap = 0.6;
  const double gx = 0.25;  // grad log V = (gx, 0)
  std::array<std::array<double, 5>, 5> dl{};
  dl[1][0] = gx;
  dl[2][0] = lap / 2;
  dl[0][2] = lap / 2;
  HField h = HField::from_log_derivs(h0, dl);
  Eigen::ArrayXd epss(3), errs(3);
  int i = 0;
  for (double lam : {14.0, 18.0, 22.0}) {
    BubbleParams p(alpha, h0, lam);
    const double eps = p.eps(), a = p.a(), R = tau / eps;
    auto integrand = [&](double r) {
      const double xi = kernel_radial_profile(KernelElement(KernelElement::Kind::Radial, alpha, a), r);
      const double gr = g_profile(p, r) + r;
      const double e1 = 0.25 * eps * eps * h0 * std::exp(bubble_profile(p, r)) *
                        (gr * gr * gx * gx + lap * r * r);
      return 2.0 * M_PI * e1 * xi * r;  // polar Jacobian; weight r^(2a) via alpha arg
    };
    const double direct = integrate_radial(integrand, alpha, 0.0, R);
    D1k d = d1k_eval(p, h, tau);
    const double pred = (d.lap_coeff * lap + d.grad_coeff) * eps * eps;
    epss[i] = eps;
    errs[i] = std::abs(direct - pred);
    ++i;
  }
  // two-route agreement tightens at rate >= min(2, 2 alpha) in eps beyond eps^2
  const double slope = fit_loglog_slope(epss, errs);
  CHECK(slope >= 2.0 + std::min(2.0, 2.0 * alpha) - 0.4);
  CHECK(errs[2] / (epss[2] * epss[2]) < 1e-4);
}
