#pragma once

#include <cctype>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "blab/jet.hpp"

namespace blab {

// Small closed-form expression language for weight functions h(x, y):
// numbers, x, y, pi, + - * / ^ (integer exponent), cos, sin, exp, parentheses.
// Expressions evaluate on plain doubles and on 5-jets, so weight fields carry
// exact Taylor data instead of finite differences.

struct ExprError : std::runtime_error {
  explicit ExprError(const std::string& m) : std::runtime_error(m) {}
};

class Expr {
 public:
  enum class Op { Const, VarX, VarY, Add, Sub, Mul, Div, Neg, Pow, Cos, Sin, Exp };

  static std::shared_ptr<Expr> parse(const std::string& text);

  template <typename T>
  T eval(const T& x, const T& y) const {
    switch (op_) {
      case Op::Const: return T(value_);
      case Op::VarX: return x;
      case Op::VarY: return y;
      case Op::Add: return a_->eval(x, y) + b_->eval(x, y);
      case Op::Sub: return a_->eval(x, y) - b_->eval(x, y);
      case Op::Mul: return a_->eval(x, y) * b_->eval(x, y);
      case Op::Div: return div(a_->eval(x, y), b_->eval(x, y));
      case Op::Neg: return -a_->eval(x, y);
      case Op::Pow: return powi(a_->eval(x, y), ipow_);
      case Op::Cos: return cos_of(a_->eval(x, y));
      case Op::Sin: return sin_of(a_->eval(x, y));
      case Op::Exp: return exp_of(a_->eval(x, y));
    }
    throw ExprError("corrupt expression node");
  }

  double operator()(double x, double y) const { return eval<double>(x, y); }
  Jet2 jet_at(double x0, double y0) const { return eval<Jet2>(Jet2::variable_x(x0), Jet2::variable_y(y0)); }

  // degree if this expression is a polynomial in (x, y), else -1
  int poly_degree() const {
    switch (op_) {
      case Op::Const: return 0;
      case Op::VarX:
      case Op::VarY: return 1;
      case Op::Add:
      case Op::Sub: {
        const int a = a_->poly_degree(), b = b_->poly_degree();
        return (a < 0 || b < 0) ? -1 : std::max(a, b);
      }
      case Op::Mul: {
        const int a = a_->poly_degree(), b = b_->poly_degree();
        return (a < 0 || b < 0) ? -1 : a + b;
      }
      case Op::Div: {
        const int a = a_->poly_degree(), b = b_->poly_degree();
        return (a < 0 || b != 0) ? -1 : a;
      }
      case Op::Neg: return a_->poly_degree();
      case Op::Pow: {
        const int a = a_->poly_degree();
        return (a < 0 || ipow_ < 0) ? -1 : a * ipow_;
      }
      default: return -1;
    }
  }

  // degree of log(this) when that is a polynomial: c * exp(P) products; -1 otherwise
  int log_poly_degree() const {
    switch (op_) {
      case Op::Const: return value_ > 0.0 ? 0 : -1;
      case Op::Exp: return a_->poly_degree();
      case Op::Mul:
      case Op::Div: {
        const int a = a_->log_poly_degree(), b = b_->log_poly_degree();
        return (a < 0 || b < 0) ? -1 : std::max(a, b);
      }
      case Op::Pow: {
        const int a = a_->log_poly_degree();
        return a < 0 ? -1 : a;
      }
      default: return -1;
    }
  }

 private:
  Op op_ = Op::Const;
  double value_ = 0.0;
  int ipow_ = 1;
  std::shared_ptr<Expr> a_, b_;

  static double div(double a, double b) { return a / b; }
  static Jet2 div(const Jet2& a, const Jet2& b) { return a * b.recip(); }
  static double powi(double a, int n) { return std::pow(a, n); }
  static Jet2 powi(const Jet2& a, int n) { return a.powi(n); }
  static double cos_of(double a) { return std::cos(a); }
  static Jet2 cos_of(const Jet2& a) { return a.cos(); }
  static double sin_of(double a) { return std::sin(a); }
  static Jet2 sin_of(const Jet2& a) { return a.sin(); }
  static double exp_of(double a) { return std::exp(a); }
  static Jet2 exp_of(const Jet2& a) { return a.exp(); }

  friend class ExprParser;
};

class ExprParser {
 public:
  explicit ExprParser(const std::string& s) : s_(s) {}

  std::shared_ptr<Expr> run() {
    auto e = sum();
    skip_ws();
    if (pos_ != s_.size()) fail("trailing characters");
    return e;
  }

 private:
  using P = std::shared_ptr<Expr>;
  const std::string& s_;
  size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& m) const {
    throw ExprError("expression error at column " + std::to_string(pos_ + 1) + ": " + m);
  }
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  static P node(Expr::Op op, P a = nullptr, P b = nullptr) {
    auto e = std::make_shared<Expr>();
    e->op_ = op;
    e->a_ = std::move(a);
    e->b_ = std::move(b);
    return e;
  }

  P sum() {
    skip_ws();
    P e;
    if (eat('-')) e = node(Expr::Op::Neg, product());
    else e = product();
    for (;;) {
      if (eat('+')) e = node(Expr::Op::Add, e, product());
      else if (eat('-')) e = node(Expr::Op::Sub, e, product());
      else return e;
    }
  }
  P product() {
    P e = power();
    for (;;) {
      if (eat('*')) e = node(Expr::Op::Mul, e, power());
      else if (eat('/')) e = node(Expr::Op::Div, e, power());
      else return e;
    }
  }
  P power() {
    P e = atom();
    if (eat('^')) {
      skip_ws();
      bool neg = eat('-');
      size_t start = pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      if (pos_ == start) fail("integer exponent expected after '^'");
      int n = std::stoi(s_.substr(start, pos_ - start));
      auto p = node(Expr::Op::Pow, e);
      p->ipow_ = neg ? -n : n;
      return p;
    }
    return e;
  }
  P atom() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of expression");
    char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      auto e = sum();
      if (!eat(')')) fail("missing ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      size_t used = 0;
      double v = std::stod(s_.substr(pos_), &used);
      pos_ += used;
      auto e = node(Expr::Op::Const);
      e->value_ = v;
      return e;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      size_t start = pos_;
      while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      std::string id = s_.substr(start, pos_ - start);
      if (id == "x") return node(Expr::Op::VarX);
      if (id == "y") return node(Expr::Op::VarY);
      if (id == "pi") {
        auto e = node(Expr::Op::Const);
        e->value_ = 3.14159265358979323846;
        return e;
      }
      Expr::Op op;
      if (id == "cos") op = Expr::Op::Cos;
      else if (id == "sin") op = Expr::Op::Sin;
      else if (id == "exp") op = Expr::Op::Exp;
      else fail("unknown identifier '" + id + "'");
      if (!eat('(')) fail("'(' expected after function name");
      auto a = sum();
      if (!eat(')')) fail("missing ')'");
      return node(op, a);
    }
    fail(std::string("unexpected character '") + c + "'");
  }
};

inline std::shared_ptr<Expr> Expr::parse(const std::string& text) { return ExprParser(text).run(); }

}  // namespace blab
