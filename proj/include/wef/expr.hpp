#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdio>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "wef/complexmat.hpp"
#include "wef/elliptic.hpp"
#include "wef/errors.hpp"

namespace wef {

/// Complex value together with its derivative along the real x axis.
/// Forward-mode differentiation through the expression tree; this is how
/// derivatives of coefficient functions are obtained (there is no symbolic
/// differentiation).
struct Dual {
  Complex v;
  Complex d;
};

inline Dual operator+(const Dual& a, const Dual& b) { return {a.v + b.v, a.d + b.d}; }
inline Dual operator-(const Dual& a, const Dual& b) { return {a.v - b.v, a.d - b.d}; }
inline Dual operator-(const Dual& a) { return {-a.v, -a.d}; }
inline Dual operator*(const Dual& a, const Dual& b) {
  return {a.v * b.v, a.d * b.v + a.v * b.d};
}
inline Dual operator/(const Dual& a, const Dual& b) {
  const Complex q = a.v / b.v;
  return {q, (a.d - q * b.d) / b.v};
}

/// Immutable coefficient expression of one variable x with complex constants.
/// Builtins: sin, cos, exp, sinh, cosh, sqrt, cn, sn, dn, K; constants pi, i.
/// Safe for concurrent evaluation once constructed.
class Expr {
public:
  Expr() = default;

  static Expr parse(std::string_view source,
                    const std::vector<std::string>& param_names = {}) {
    if (source.empty()) throw SyntaxError("empty expression", 0);
    Parser p(source, param_names);
    Expr e;
    e.root_ = p.parse_expression(e.nodes_);
    p.expect_end();
    return e;
  }

  Complex eval(Complex x,
               const std::map<std::string, Complex>* params = nullptr) const {
    return eval_node<Complex>(root_, x, params);
  }

  /// Value and d/dx at a real point x.
  Dual eval_dual(double x,
                 const std::map<std::string, Complex>* params = nullptr) const {
    return eval_node<Dual>(root_, Dual{Complex(x), Complex(1.0)}, params);
  }

  /// True when the expression has no x dependence.
  bool is_constant() const {
    for (const Node& n : nodes_)
      if (n.kind == Kind::VarX) return false;
    return true;
  }

  std::string print() const { return print_node(root_); }

  bool empty() const { return nodes_.empty(); }

private:
  enum class Kind { Const, VarX, Param, Add, Sub, Mul, Div, Neg, Pow, Call };
  enum class Func { Sin, Cos, Exp, Sinh, Cosh, Sqrt, Cn, Sn, Dn, K };

  struct Node {
    Kind kind;
    Complex value{};  // Const
    int a = -1, b = -1;
    Func func = Func::Sin;
    std::string name; // Param
  };

  std::vector<Node> nodes_;
  int root_ = -1;

  template <class T> static T make_const(Complex c);
  static double real_part(const Complex& v) { return v.real(); }
  static double real_part(const Dual& v) { return v.v.real(); }

  template <class T>
  T eval_node(int idx, const T& x,
              const std::map<std::string, Complex>* params) const {
    const Node& n = nodes_[static_cast<std::size_t>(idx)];
    switch (n.kind) {
    case Kind::Const: return make_const<T>(n.value);
    case Kind::VarX: return x;
    case Kind::Param: {
      if (params) {
        auto it = params->find(n.name);
        if (it != params->end()) return make_const<T>(it->second);
      }
      throw UnknownIdentifierError(n.name, 0);
    }
    case Kind::Add: return eval_node<T>(n.a, x, params) + eval_node<T>(n.b, x, params);
    case Kind::Sub: return eval_node<T>(n.a, x, params) - eval_node<T>(n.b, x, params);
    case Kind::Mul: return eval_node<T>(n.a, x, params) * eval_node<T>(n.b, x, params);
    case Kind::Div: return eval_node<T>(n.a, x, params) / eval_node<T>(n.b, x, params);
    case Kind::Neg: return -eval_node<T>(n.a, x, params);
    case Kind::Pow: return eval_pow(eval_node<T>(n.a, x, params), eval_node<T>(n.b, x, params));
    case Kind::Call: return eval_call<T>(n, x, params);
    }
    throw Error("corrupt expression tree");
  }

  static bool integer_exponent(const Complex& b, long& k) {
    if (b.imag() != 0.0) return false;
    const double r = b.real();
    if (r != std::nearbyint(r) || std::abs(r) > 1024.0) return false;
    k = static_cast<long>(r);
    return true;
  }

  /// Integer powers by repeated multiplication: exact realness for real
  /// bases, which keeps real problems bit-exactly real.
  static Complex powi(Complex a, long k) {
    if (k < 0) return Complex(1.0) / powi(a, -k);
    Complex r(1.0), p = a;
    while (k) {
      if (k & 1) r *= p;
      p *= p;
      k >>= 1;
    }
    return r;
  }

  static Complex eval_pow(const Complex& a, const Complex& b) {
    long k;
    if (integer_exponent(b, k)) return powi(a, k);
    return std::pow(a, b);
  }
  static Dual eval_pow(const Dual& a, const Dual& b) {
    if (b.d == Complex(0.0)) {
      long k;
      if (integer_exponent(b.v, k)) {
        const Complex v = powi(a.v, k);
        if (k == 0 || a.d == Complex(0.0)) return {v, Complex(0.0)};
        return {v, Complex(static_cast<double>(k)) * powi(a.v, k - 1) * a.d};
      }
      const Complex v = std::pow(a.v, b.v);
      if (a.d == Complex(0.0)) return {v, Complex(0.0)};
      return {v, b.v * std::pow(a.v, b.v - Complex(1.0)) * a.d};
    }
    const Complex v = std::pow(a.v, b.v);
    return {v, v * (b.d * std::log(a.v) + b.v * a.d / a.v)};
  }

  template <class T>
  T eval_call(const Node& n, const T& x,
              const std::map<std::string, Complex>* params) const {
    const T arg = eval_node<T>(n.a, x, params);
    switch (n.func) {
    case Func::Sin: return apply_sin(arg);
    case Func::Cos: return apply_cos(arg);
    case Func::Exp: return apply_exp(arg);
    case Func::Sinh: return apply_sinh(arg);
    case Func::Cosh: return apply_cosh(arg);
    case Func::Sqrt: return apply_sqrt(arg);
    case Func::K: return apply_k(arg);
    case Func::Cn:
    case Func::Sn:
    case Func::Dn: {
      const T marg = eval_node<T>(n.b, x, params);
      return apply_jacobi(n.func, arg, marg);
    }
    }
    throw Error("corrupt expression tree");
  }

  static Complex apply_sin(const Complex& a) { return std::sin(a); }
  static Complex apply_cos(const Complex& a) { return std::cos(a); }
  static Complex apply_exp(const Complex& a) { return std::exp(a); }
  static Complex apply_sinh(const Complex& a) { return std::sinh(a); }
  static Complex apply_cosh(const Complex& a) { return std::cosh(a); }
  static Complex apply_sqrt(const Complex& a) { return std::sqrt(a); }
  static Dual apply_sin(const Dual& a) { return {std::sin(a.v), std::cos(a.v) * a.d}; }
  static Dual apply_cos(const Dual& a) { return {std::cos(a.v), -std::sin(a.v) * a.d}; }
  static Dual apply_exp(const Dual& a) {
    const Complex e = std::exp(a.v);
    return {e, e * a.d};
  }
  static Dual apply_sinh(const Dual& a) { return {std::sinh(a.v), std::cosh(a.v) * a.d}; }
  static Dual apply_cosh(const Dual& a) { return {std::cosh(a.v), std::sinh(a.v) * a.d}; }
  static Dual apply_sqrt(const Dual& a) {
    const Complex s = std::sqrt(a.v);
    return {s, a.d / (Complex(2.0) * s)};
  }

  static double require_real(const Complex& v, const char* what) {
    const double scale = std::max(1.0, std::abs(v));
    if (std::abs(v.imag()) > 1e-12 * scale)
      throw DomainError(std::string(what) + " requires a real argument");
    return v.real();
  }

  static Complex apply_k(const Complex& a) {
    return Complex(elliptic_k(require_real(a, "K")));
  }
  static Dual apply_k(const Dual& a) {
    if (a.d != Complex(0.0))
      throw DomainError("K with an x-dependent argument is not supported");
    return {apply_k(a.v), Complex(0.0)};
  }

  static Complex jacobi_pick(Func f, const JacobiValues& j) {
    if (f == Func::Sn) return Complex(j.sn);
    if (f == Func::Cn) return Complex(j.cn);
    return Complex(j.dn);
  }

  static Complex apply_jacobi(Func f, const Complex& u, const Complex& m) {
    const double ur = require_real(u, "jacobi function");
    const double mr = require_real(m, "jacobi parameter");
    return jacobi_pick(f, jacobi(ur, mr));
  }
  static Dual apply_jacobi(Func f, const Dual& u, const Dual& m) {
    if (m.d != Complex(0.0))
      throw DomainError("jacobi functions with an x-dependent parameter are not supported");
    const double ur = require_real(u.v, "jacobi function");
    const double mr = require_real(m.v, "jacobi parameter");
    const JacobiValues j = jacobi(ur, mr);
    Complex deriv;
    if (f == Func::Sn) deriv = Complex(j.cn * j.dn);
    else if (f == Func::Cn) deriv = Complex(-j.sn * j.dn);
    else deriv = Complex(-mr * j.sn * j.cn);
    return {jacobi_pick(f, j), deriv * u.d};
  }

  static std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }

  std::string print_node(int idx) const {
    const Node& n = nodes_[static_cast<std::size_t>(idx)];
    switch (n.kind) {
    case Kind::Const: {
      if (n.value.imag() == 0.0) {
        if (n.value.real() < 0.0) return "(" + format_double(n.value.real()) + ")";
        return format_double(n.value.real());
      }
      return "(" + format_double(n.value.real()) + "+" +
             format_double(n.value.imag()) + "*i)";
    }
    case Kind::VarX: return "x";
    case Kind::Param: return n.name;
    case Kind::Add: return "(" + print_node(n.a) + "+" + print_node(n.b) + ")";
    case Kind::Sub: return "(" + print_node(n.a) + "-" + print_node(n.b) + ")";
    case Kind::Mul: return "(" + print_node(n.a) + "*" + print_node(n.b) + ")";
    case Kind::Div: return "(" + print_node(n.a) + "/" + print_node(n.b) + ")";
    case Kind::Neg: return "(-" + print_node(n.a) + ")";
    case Kind::Pow: return "(" + print_node(n.a) + "^" + print_node(n.b) + ")";
    case Kind::Call: {
      std::string s = func_name(n.func);
      s += "(" + print_node(n.a);
      if (n.b >= 0) s += "," + print_node(n.b);
      s += ")";
      return s;
    }
    }
    throw Error("corrupt expression tree");
  }

  static const char* func_name(Func f) {
    switch (f) {
    case Func::Sin: return "sin";
    case Func::Cos: return "cos";
    case Func::Exp: return "exp";
    case Func::Sinh: return "sinh";
    case Func::Cosh: return "cosh";
    case Func::Sqrt: return "sqrt";
    case Func::Cn: return "cn";
    case Func::Sn: return "sn";
    case Func::Dn: return "dn";
    case Func::K: return "K";
    }
    return "?";
  }

  class Parser {
  public:
    Parser(std::string_view src, const std::vector<std::string>& params)
        : src_(src), params_(params) {}

    int parse_expression(std::vector<Node>& nodes) {
      int lhs = parse_term(nodes);
      for (;;) {
        skip_ws();
        if (peek() == '+' || peek() == '-') {
          const char op = take();
          const int rhs = parse_term(nodes);
          lhs = push(nodes, op == '+' ? Kind::Add : Kind::Sub, lhs, rhs);
        } else {
          return lhs;
        }
      }
    }

    void expect_end() {
      skip_ws();
      if (pos_ != src_.size())
        throw SyntaxError("unexpected trailing input", pos_);
    }

  private:
    std::string_view src_;
    const std::vector<std::string>& params_;
    std::size_t pos_ = 0;

    char peek() const { return pos_ < src_.size() ? src_[pos_] : '\0'; }
    char take() { return src_[pos_++]; }
    void skip_ws() {
      while (pos_ < src_.size() &&
             std::isspace(static_cast<unsigned char>(src_[pos_])))
        ++pos_;
    }

    static int push(std::vector<Node>& nodes, Kind k, int a, int b) {
      Node n;
      n.kind = k;
      n.a = a;
      n.b = b;
      nodes.push_back(std::move(n));
      return static_cast<int>(nodes.size()) - 1;
    }

    int parse_term(std::vector<Node>& nodes) {
      int lhs = parse_factor(nodes);
      for (;;) {
        skip_ws();
        if (peek() == '*' || peek() == '/') {
          const char op = take();
          const int rhs = parse_factor(nodes);
          lhs = push(nodes, op == '*' ? Kind::Mul : Kind::Div, lhs, rhs);
        } else {
          return lhs;
        }
      }
    }

    // '^' binds tighter than unary minus: -x^2 parses as -(x^2).
    int parse_factor(std::vector<Node>& nodes) {
      skip_ws();
      if (peek() == '-') {
        take();
        return push(nodes, Kind::Neg, parse_factor(nodes), -1);
      }
      if (peek() == '+') {
        take();
        return parse_factor(nodes);
      }
      return parse_power(nodes);
    }

    int parse_power(std::vector<Node>& nodes) {
      const int base = parse_atom(nodes);
      skip_ws();
      if (peek() == '^') {
        take();
        const int ex = parse_factor(nodes); // right associative, allows 2^-3
        return push(nodes, Kind::Pow, base, ex);
      }
      return base;
    }

    int parse_atom(std::vector<Node>& nodes) {
      skip_ws();
      if (pos_ >= src_.size()) throw SyntaxError("unexpected end of expression", pos_);
      const char c = peek();
      if (c == '(') {
        take();
        const int inner = parse_expression(nodes);
        skip_ws();
        if (peek() != ')') throw SyntaxError("expected ')'", pos_);
        take();
        return inner;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
        return parse_number(nodes);
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_')
        return parse_identifier(nodes);
      throw SyntaxError(std::string("unexpected character '") + c + "'", pos_);
    }

    int parse_number(std::vector<Node>& nodes) {
      const std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.'))
        ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
        std::size_t probe = pos_ + 1;
        if (probe < src_.size() && (src_[probe] == '+' || src_[probe] == '-')) ++probe;
        if (probe < src_.size() && std::isdigit(static_cast<unsigned char>(src_[probe]))) {
          pos_ = probe;
          while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
            ++pos_;
        }
      }
      double value = 0.0;
      const auto res = std::from_chars(src_.data() + start, src_.data() + pos_, value);
      if (res.ec != std::errc() || res.ptr != src_.data() + pos_)
        throw SyntaxError("malformed number", start);
      Node n;
      n.kind = Kind::Const;
      n.value = Complex(value);
      nodes.push_back(std::move(n));
      return static_cast<int>(nodes.size()) - 1;
    }

    int parse_identifier(std::vector<Node>& nodes) {
      const std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        ++pos_;
      const std::string name(src_.substr(start, pos_ - start));

      if (name == "x") return push(nodes, Kind::VarX, -1, -1);
      if (name == "pi") {
        Node n;
        n.kind = Kind::Const;
        n.value = Complex(M_PI);
        nodes.push_back(std::move(n));
        return static_cast<int>(nodes.size()) - 1;
      }
      if (name == "i") {
        Node n;
        n.kind = Kind::Const;
        n.value = Complex(0.0, 1.0);
        nodes.push_back(std::move(n));
        return static_cast<int>(nodes.size()) - 1;
      }

      const int arity = function_arity(name);
      if (arity > 0) {
        skip_ws();
        if (peek() != '(')
          throw SyntaxError("expected '(' after function name '" + name + "'", pos_);
        take();
        const int a = parse_expression(nodes);
        int b = -1;
        if (arity == 2) {
          skip_ws();
          if (peek() != ',')
            throw SyntaxError("function '" + name + "' takes two arguments", pos_);
          take();
          b = parse_expression(nodes);
        }
        skip_ws();
        if (peek() != ')') throw SyntaxError("expected ')'", pos_);
        take();
        Node n;
        n.kind = Kind::Call;
        n.func = function_id(name);
        n.a = a;
        n.b = b;
        nodes.push_back(std::move(n));
        return static_cast<int>(nodes.size()) - 1;
      }

      for (const std::string& p : params_)
        if (p == name) {
          Node n;
          n.kind = Kind::Param;
          n.name = name;
          nodes.push_back(std::move(n));
          return static_cast<int>(nodes.size()) - 1;
        }
      throw UnknownIdentifierError(name, start);
    }

    static int function_arity(const std::string& name) {
      if (name == "sin" || name == "cos" || name == "exp" || name == "sinh" ||
          name == "cosh" || name == "sqrt" || name == "K")
        return 1;
      if (name == "cn" || name == "sn" || name == "dn") return 2;
      return 0;
    }

    static Func function_id(const std::string& name) {
      if (name == "sin") return Func::Sin;
      if (name == "cos") return Func::Cos;
      if (name == "exp") return Func::Exp;
      if (name == "sinh") return Func::Sinh;
      if (name == "cosh") return Func::Cosh;
      if (name == "sqrt") return Func::Sqrt;
      if (name == "cn") return Func::Cn;
      if (name == "sn") return Func::Sn;
      if (name == "dn") return Func::Dn;
      return Func::K;
    }
  };
};

template <> inline Complex Expr::make_const<Complex>(Complex c) { return c; }
template <> inline Dual Expr::make_const<Dual>(Complex c) { return {c, Complex(0.0)}; }

} // namespace wef
