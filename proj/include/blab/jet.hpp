#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

namespace blab {

// Truncated bivariate Taylor expansion (a 5-jet) at a point: carries the value
// and all partial derivatives through total degree 5 as coefficients
// c[i][j] = (d/dx)^i (d/dy)^j f / (i! j!). Arithmetic on jets is arithmetic on
// truncated power series; composing with an analytic univariate function uses
// its derivative list at the jet's value. This is how the expression language
// delivers exact Taylor data for HField.
class Jet2 {
 public:
  static constexpr int kDeg = 5;

  Jet2() { c_.fill(0.0); }
  explicit Jet2(double v) {
    c_.fill(0.0);
    at(0, 0) = v;
  }
  static Jet2 variable_x(double x0) {
    Jet2 j(x0);
    j.at(1, 0) = 1.0;
    return j;
  }
  static Jet2 variable_y(double y0) {
    Jet2 j(y0);
    j.at(0, 1) = 1.0;
    return j;
  }

  double& at(int i, int j) { return c_[index(i, j)]; }
  double at(int i, int j) const { return c_[index(i, j)]; }
  double value() const { return c_[0]; }

  // partial derivative d^i_x d^j_y f (with factorials restored)
  double deriv(int i, int j) const {
    double f = 1.0;
    for (int k = 2; k <= i; ++k) f *= k;
    for (int k = 2; k <= j; ++k) f *= k;
    return at(i, j) * f;
  }

  Jet2 operator+(const Jet2& o) const {
    Jet2 r;
    for (size_t k = 0; k < c_.size(); ++k) r.c_[k] = c_[k] + o.c_[k];
    return r;
  }
  Jet2 operator-(const Jet2& o) const {
    Jet2 r;
    for (size_t k = 0; k < c_.size(); ++k) r.c_[k] = c_[k] - o.c_[k];
    return r;
  }
  Jet2 operator-() const {
    Jet2 r;
    for (size_t k = 0; k < c_.size(); ++k) r.c_[k] = -c_[k];
    return r;
  }
  Jet2 operator*(const Jet2& o) const {
    Jet2 r;
    for (int i1 = 0; i1 <= kDeg; ++i1)
      for (int j1 = 0; i1 + j1 <= kDeg; ++j1) {
        const double a = at(i1, j1);
        if (a == 0.0) continue;
        for (int i2 = 0; i1 + i2 <= kDeg; ++i2)
          for (int j2 = 0; i1 + j1 + i2 + j2 <= kDeg; ++j2) r.at(i1 + i2, j1 + j2) += a * o.at(i2, j2);
      }
    return r;
  }
  Jet2 operator*(double s) const {
    Jet2 r;
    for (size_t k = 0; k < c_.size(); ++k) r.c_[k] = c_[k] * s;
    return r;
  }
  Jet2 operator+(double s) const {
    Jet2 r = *this;
    r.c_[0] += s;
    return r;
  }

  // f(this) where derivs[k] = f^(k)(value()), k = 0..5
  Jet2 compose(const std::array<double, kDeg + 1>& derivs) const {
    Jet2 u = *this;
    u.c_[0] = 0.0;  // nilpotent part
    Jet2 acc(derivs[0]);
    Jet2 upow(1.0);
    double fact = 1.0;
    for (int k = 1; k <= kDeg; ++k) {
      upow = upow * u;
      fact *= k;
      acc = acc + upow * (derivs[k] / fact);
    }
    return acc;
  }

  Jet2 exp() const {
    const double e = std::exp(value());
    return compose({e, e, e, e, e, e});
  }
  Jet2 log() const {
    const double v = value();
    if (v <= 0.0) throw std::domain_error("Jet2::log: nonpositive value");
    std::array<double, kDeg + 1> d{std::log(v)};
    double p = 1.0 / v, sign = 1.0, fact = 1.0;
    for (int k = 1; k <= kDeg; ++k) {
      d[k] = sign * fact * p;  // (-1)^(k-1) (k-1)! / v^k
      p /= v;
      sign = -sign;
      fact *= k;
    }
    return compose(d);
  }
  Jet2 sin() const {
    const double s = std::sin(value()), c = std::cos(value());
    return compose({s, c, -s, -c, s, c});
  }
  Jet2 cos() const {
    const double s = std::sin(value()), c = std::cos(value());
    return compose({c, -s, -c, s, c, -s});
  }
  Jet2 recip() const {
    const double v = value();
    if (v == 0.0) throw std::domain_error("Jet2::recip: division by zero");
    // d^k (1/v) = (-1)^k k! / v^(k+1)
    std::array<double, kDeg + 1> d{};
    double vk = v, kfact = 1.0, sgn = 1.0;
    for (int k = 0; k <= kDeg; ++k) {
      d[k] = sgn * kfact / vk;
      vk *= v;
      sgn = -sgn;
      kfact *= (k + 1);
    }
    return compose(d);
  }
  Jet2 powi(int n) const {
    if (n < 0) return recip().powi(-n);
    Jet2 r(1.0);
    Jet2 b = *this;
    int e = n;
    while (e > 0) {
      if (e & 1) r = r * b;
      b = b * b;
      e >>= 1;
    }
    return r;
  }

 private:
  static int index(int i, int j) {
    const int n = i + j;
    return n * (n + 1) / 2 + j;
  }
  std::array<double, (kDeg + 1) * (kDeg + 2) / 2> c_{};
};

inline Jet2 operator*(double s, const Jet2& j) { return j * s; }
inline Jet2 operator+(double s, const Jet2& j) { return j + s; }
inline Jet2 operator-(double s, const Jet2& j) { return (-j) + s; }

}  // namespace blab
