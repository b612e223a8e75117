#pragma once

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "clbf/interval.hpp"

namespace clbf {

enum class op {
  constant, variable, add, sub, mul, div, pow_i, square, sqrt_, exp_, log_,
  sin_, cos_, abs_, min_, max_, norm2
};

struct expr_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct eval_error : std::runtime_error {
  std::string path;  // slash-joined chain of ops from root to offending node
  explicit eval_error(const std::string& what, std::string p)
      : std::runtime_error(what + " at " + p), path(std::move(p)) {}
};

class expr;

struct expr_node {
  op kind;
  double value = 0.0;  // constant payload
  int ivalue = 0;      // variable index, or integer exponent for pow_i
  int arity = 0;       // 0 means "fits any arity" (constant-only subtree)
  std::vector<expr> kids;
};

struct ival_result {
  interval v;
  bool domain_ok = true;
};

class expr {
 public:
  expr() = default;

  static expr lit(double v) {
    auto n = std::make_shared<expr_node>();
    n->kind = op::constant;
    n->value = v;
    return expr(std::move(n));
  }

  static expr var(int i, int arity) {
    if (i < 0 || i >= arity)
      throw expr_error("variable index " + std::to_string(i) +
                       " out of range for arity " + std::to_string(arity));
    auto n = std::make_shared<expr_node>();
    n->kind = op::variable;
    n->ivalue = i;
    n->arity = arity;
    return expr(std::move(n));
  }

  bool valid() const { return p_ != nullptr; }
  op kind() const { return p_->kind; }
  double value() const { return p_->value; }
  int index() const { return p_->ivalue; }
  int exponent() const { return p_->ivalue; }
  int arity() const { return p_->arity; }
  const std::vector<expr>& kids() const { return p_->kids; }

  bool is_const() const { return p_->kind == op::constant; }
  bool is_const(double v) const { return is_const() && p_->value == v; }

  double eval(const std::vector<double>& x) const;
  double eval_p(const std::vector<double>& x,
                std::vector<const char*>& path) const;
  ival_result eval_interval(const hyperbox& X) const;
  expr diff(int i) const;
  expr simplified() const;
  std::string sexpr() const;

  static expr parse_sexpr(const std::string& s, int arity);
  static expr parse_infix(const std::string& s, int arity);

  // Rebuilds the tree with arity n; needed when an n-var expression enters a
  // condition with auxiliary variables appended.
  expr with_arity(int n) const;

  friend expr operator+(const expr& a, const expr& b);
  friend expr operator-(const expr& a, const expr& b);
  friend expr operator*(const expr& a, const expr& b);
  friend expr operator/(const expr& a, const expr& b);
  friend expr operator-(const expr& a);

  static expr pow(const expr& a, int n);
  static expr square(const expr& a);
  static expr sqrt(const expr& a);
  static expr exp(const expr& a);
  static expr log(const expr& a);
  static expr sin(const expr& a);
  static expr cos(const expr& a);
  static expr abs(const expr& a);
  static expr min(const expr& a, const expr& b);
  static expr max(const expr& a, const expr& b);
  static expr norm2(const std::vector<expr>& parts);

 private:
  explicit expr(std::shared_ptr<const expr_node> p) : p_(std::move(p)) {}

  static int unify(int a, int b) {
    if (a == 0) return b;
    if (b == 0) return a;
    if (a != b)
      throw expr_error("arity mismatch: " + std::to_string(a) + " vs " +
                       std::to_string(b));
    return a;
  }

  static expr node(op k, std::vector<expr> kids, int ivalue = 0) {
    int ar = 0;
    for (const auto& c : kids) ar = unify(ar, c.arity());
    auto n = std::make_shared<expr_node>();
    n->kind = k;
    n->ivalue = ivalue;
    n->arity = ar;
    n->kids = std::move(kids);
    return expr(std::move(n));
  }

  static bool fold2(op k, double a, double b, double& out);
  static bool fold1(op k, double a, int iv, double& out);

  std::shared_ptr<const expr_node> p_;
};

// ---- smart constructors (fold the trivial algebra the moment it appears) ----

inline bool expr::fold2(op k, double a, double b, double& out) {
  switch (k) {
    case op::add: out = a + b; break;
    case op::sub: out = a - b; break;
    case op::mul: out = a * b; break;
    case op::div:
      if (b == 0.0) return false;
      out = a / b;
      break;
    case op::min_: out = std::min(a, b); break;
    case op::max_: out = std::max(a, b); break;
    default: return false;
  }
  return std::isfinite(out);
}

inline bool expr::fold1(op k, double a, int iv, double& out) {
  switch (k) {
    case op::pow_i: out = std::pow(a, iv); break;
    case op::square: out = a * a; break;
    case op::sqrt_:
      if (a < 0.0) return false;
      out = std::sqrt(a);
      break;
    case op::exp_: out = std::exp(a); break;
    case op::log_:
      if (a <= 0.0) return false;
      out = std::log(a);
      break;
    case op::sin_: out = std::sin(a); break;
    case op::cos_: out = std::cos(a); break;
    case op::abs_: out = std::abs(a); break;
    default: return false;
  }
  return std::isfinite(out);
}

inline expr operator+(const expr& a, const expr& b) {
  if (a.is_const() && b.is_const()) {
    double v;
    if (expr::fold2(op::add, a.value(), b.value(), v)) return expr::lit(v);
  }
  if (a.is_const(0.0)) return b;
  if (b.is_const(0.0)) return a;
  return expr::node(op::add, {a, b});
}

inline expr operator-(const expr& a, const expr& b) {
  if (a.is_const() && b.is_const()) {
    double v;
    if (expr::fold2(op::sub, a.value(), b.value(), v)) return expr::lit(v);
  }
  if (b.is_const(0.0)) return a;
  return expr::node(op::sub, {a, b});
}

inline expr operator*(const expr& a, const expr& b) {
  if (a.is_const() && b.is_const()) {
    double v;
    if (expr::fold2(op::mul, a.value(), b.value(), v)) return expr::lit(v);
  }
  if (a.is_const(0.0) || b.is_const(0.0)) return expr::lit(0.0);
  if (a.is_const(1.0)) return b;
  if (b.is_const(1.0)) return a;
  return expr::node(op::mul, {a, b});
}

inline expr operator/(const expr& a, const expr& b) {
  if (a.is_const() && b.is_const()) {
    double v;
    if (expr::fold2(op::div, a.value(), b.value(), v)) return expr::lit(v);
  }
  if (a.is_const(0.0)) return expr::lit(0.0);
  if (b.is_const(1.0)) return a;
  return expr::node(op::div, {a, b});
}

inline expr operator-(const expr& a) { return expr::lit(0.0) - a; }

inline expr expr::pow(const expr& a, int n) {
  if (n == 0) return lit(1.0);
  if (n == 1) return a;
  if (n == 2) return square(a);
  if (a.is_const()) {
    double v;
    if (fold1(op::pow_i, a.value(), n, v)) return lit(v);
  }
  return node(op::pow_i, {a}, n);
}

inline expr expr::square(const expr& a) {
  if (a.is_const()) {
    double v;
    if (fold1(op::square, a.value(), 0, v)) return lit(v);
  }
  return node(op::square, {a});
}

#define CLBF_UNARY_CTOR(name, opk)                         \
  inline expr expr::name(const expr& a) {                  \
    if (a.is_const()) {                                    \
      double v;                                            \
      if (fold1(opk, a.value(), 0, v)) return lit(v);      \
    }                                                      \
    return node(opk, {a});                                 \
  }
CLBF_UNARY_CTOR(sqrt, op::sqrt_)
CLBF_UNARY_CTOR(exp, op::exp_)
CLBF_UNARY_CTOR(log, op::log_)
CLBF_UNARY_CTOR(sin, op::sin_)
CLBF_UNARY_CTOR(cos, op::cos_)
CLBF_UNARY_CTOR(abs, op::abs_)
#undef CLBF_UNARY_CTOR

inline expr expr::min(const expr& a, const expr& b) {
  if (a.is_const() && b.is_const()) return lit(std::min(a.value(), b.value()));
  return node(op::min_, {a, b});
}
inline expr expr::max(const expr& a, const expr& b) {
  if (a.is_const() && b.is_const()) return lit(std::max(a.value(), b.value()));
  return node(op::max_, {a, b});
}

inline expr expr::norm2(const std::vector<expr>& parts) {
  if (parts.empty()) throw expr_error("norm2 of empty vector");
  return node(op::norm2, parts);
}

// ---- evaluation ----

namespace detail {
inline const char* op_name(op k);

inline const char* path_name(op k) {
  switch (k) {
    case op::constant: return "const";
    case op::variable: return "var";
    case op::add: return "add";
    case op::sub: return "sub";
    case op::mul: return "mul";
    case op::div: return "div";
    case op::pow_i: return "pow";
    case op::square: return "sq";
    case op::sqrt_: return "sqrt";
    case op::exp_: return "exp";
    case op::log_: return "log";
    case op::sin_: return "sin";
    case op::cos_: return "cos";
    case op::abs_: return "abs";
    case op::min_: return "min";
    case op::max_: return "max";
    case op::norm2: return "norm2";
  }
  return "?";
}

inline std::string join_path(const std::vector<const char*>& path) {
  std::string s;
  for (const char* seg : path) {
    if (!s.empty()) s += '/';
    s += seg;
  }
  return s;
}
}  // namespace detail

inline double expr::eval(const std::vector<double>& x) const {
  static thread_local std::vector<const char*> path;
  path.clear();
  return eval_p(x, path);
}

inline double expr::eval_p(const std::vector<double>& x,
                           std::vector<const char*>& path) const {
  const expr_node& n = *p_;
  struct pop_guard {
    std::vector<const char*>& v;
    ~pop_guard() { v.pop_back(); }
  };
  path.push_back(detail::path_name(n.kind));
  pop_guard pg{path};
  switch (n.kind) {
    case op::constant: return n.value;
    case op::variable:
      if (n.ivalue >= static_cast<int>(x.size()))
        throw eval_error("point dimension too small", detail::join_path(path));
      return x[n.ivalue];
    case op::add: return n.kids[0].eval_p(x, path) + n.kids[1].eval_p(x, path);
    case op::sub: return n.kids[0].eval_p(x, path) - n.kids[1].eval_p(x, path);
    case op::mul: return n.kids[0].eval_p(x, path) * n.kids[1].eval_p(x, path);
    case op::div: {
      double num = n.kids[0].eval_p(x, path);
      double den = n.kids[1].eval_p(x, path);
      if (den == 0.0)
        throw eval_error("division by zero", detail::join_path(path));
      return num / den;
    }
    case op::pow_i: return std::pow(n.kids[0].eval_p(x, path), n.ivalue);
    case op::square: {
      double v = n.kids[0].eval_p(x, path);
      return v * v;
    }
    case op::sqrt_: {
      double v = n.kids[0].eval_p(x, path);
      if (v < 0.0)
        throw eval_error("sqrt of negative", detail::join_path(path));
      return std::sqrt(v);
    }
    case op::exp_: return std::exp(n.kids[0].eval_p(x, path));
    case op::log_: {
      double v = n.kids[0].eval_p(x, path);
      if (v <= 0.0)
        throw eval_error("log of nonpositive", detail::join_path(path));
      return std::log(v);
    }
    case op::sin_: return std::sin(n.kids[0].eval_p(x, path));
    case op::cos_: return std::cos(n.kids[0].eval_p(x, path));
    case op::abs_: return std::abs(n.kids[0].eval_p(x, path));
    case op::min_:
      return std::min(n.kids[0].eval_p(x, path), n.kids[1].eval_p(x, path));
    case op::max_:
      return std::max(n.kids[0].eval_p(x, path), n.kids[1].eval_p(x, path));
    case op::norm2: {
      double s = 0.0;
      for (const auto& k : n.kids) {
        double v = k.eval_p(x, path);
        s += v * v;
      }
      return std::sqrt(s);
    }
  }
  throw eval_error("corrupt node", detail::join_path(path));
}

inline ival_result expr::eval_interval(const hyperbox& X) const {
  const expr_node& n = *p_;
  switch (n.kind) {
    case op::constant: return {interval(n.value), true};
    case op::variable: return {X[n.ivalue], true};
    case op::add: {
      auto a = n.kids[0].eval_interval(X), b = n.kids[1].eval_interval(X);
      return {a.v + b.v, a.domain_ok && b.domain_ok};
    }
    case op::sub: {
      auto a = n.kids[0].eval_interval(X), b = n.kids[1].eval_interval(X);
      return {a.v - b.v, a.domain_ok && b.domain_ok};
    }
    case op::mul: {
      auto a = n.kids[0].eval_interval(X), b = n.kids[1].eval_interval(X);
      return {a.v * b.v, a.domain_ok && b.domain_ok};
    }
    case op::div: {
      auto a = n.kids[0].eval_interval(X), b = n.kids[1].eval_interval(X);
      bool ok = a.domain_ok && b.domain_ok &&
                !(b.v.lo <= 0.0 && b.v.hi >= 0.0);
      return {a.v / b.v, ok};
    }
    case op::pow_i: {
      auto a = n.kids[0].eval_interval(X);
      bool ok = a.domain_ok &&
                !(n.ivalue < 0 && a.v.lo <= 0.0 && a.v.hi >= 0.0);
      return {ipow(a.v, n.ivalue), ok};
    }
    case op::square: {
      auto a = n.kids[0].eval_interval(X);
      return {isqr(a.v), a.domain_ok};
    }
    case op::sqrt_: {
      auto a = n.kids[0].eval_interval(X);
      return {isqrt(a.v), a.domain_ok && a.v.lo >= 0.0};
    }
    case op::exp_: {
      auto a = n.kids[0].eval_interval(X);
      return {iexp(a.v), a.domain_ok};
    }
    case op::log_: {
      auto a = n.kids[0].eval_interval(X);
      if (a.v.lo <= 0.0) return {interval::entire(), false};
      return {ilog(a.v), a.domain_ok};
    }
    case op::sin_: {
      auto a = n.kids[0].eval_interval(X);
      return {isin(a.v), a.domain_ok};
    }
    case op::cos_: {
      auto a = n.kids[0].eval_interval(X);
      return {icos(a.v), a.domain_ok};
    }
    case op::abs_: {
      auto a = n.kids[0].eval_interval(X);
      return {iabs(a.v), a.domain_ok};
    }
    case op::min_: {
      auto a = n.kids[0].eval_interval(X), b = n.kids[1].eval_interval(X);
      return {imin(a.v, b.v), a.domain_ok && b.domain_ok};
    }
    case op::max_: {
      auto a = n.kids[0].eval_interval(X), b = n.kids[1].eval_interval(X);
      return {imax(a.v, b.v), a.domain_ok && b.domain_ok};
    }
    case op::norm2: {
      interval s(0.0);
      bool ok = true;
      for (const auto& k : n.kids) {
        auto r = k.eval_interval(X);
        ok = ok && r.domain_ok;
        s = s + isqr(r.v);
      }
      return {isqrt(s), ok};
    }
  }
  return {interval::entire(), false};
}

// ---- differentiation ----

inline expr expr::diff(int i) const {
  const expr_node& n = *p_;
  switch (n.kind) {
    case op::constant: return lit(0.0);
    case op::variable: return lit(n.ivalue == i ? 1.0 : 0.0);
    case op::add: return n.kids[0].diff(i) + n.kids[1].diff(i);
    case op::sub: return n.kids[0].diff(i) - n.kids[1].diff(i);
    case op::mul:
      return n.kids[0].diff(i) * n.kids[1] + n.kids[0] * n.kids[1].diff(i);
    case op::div:
      return (n.kids[0].diff(i) * n.kids[1] -
              n.kids[0] * n.kids[1].diff(i)) /
             square(n.kids[1]);
    case op::pow_i:
      return lit(n.ivalue) * pow(n.kids[0], n.ivalue - 1) * n.kids[0].diff(i);
    case op::square: return lit(2.0) * n.kids[0] * n.kids[0].diff(i);
    case op::sqrt_:
      return n.kids[0].diff(i) / (lit(2.0) * sqrt(n.kids[0]));
    case op::exp_: return exp(n.kids[0]) * n.kids[0].diff(i);
    case op::log_: return n.kids[0].diff(i) / n.kids[0];
    case op::sin_: return cos(n.kids[0]) * n.kids[0].diff(i);
    case op::cos_: return -(sin(n.kids[0]) * n.kids[0].diff(i));
    case op::abs_:
    case op::min_:
    case op::max_:
      throw expr_error("differentiate: nonsmooth node");
    case op::norm2: {
      expr num = lit(0.0);
      for (const auto& k : n.kids) num = num + k * k.diff(i);
      return num / norm2(n.kids);
    }
  }
  throw expr_error("corrupt node");
}

// ---- simplify ----

inline expr expr::simplified() const {
  const expr_node& n = *p_;
  if (n.kind == op::constant || n.kind == op::variable) return *this;
  std::vector<expr> ks;
  ks.reserve(n.kids.size());
  for (const auto& k : n.kids) ks.push_back(k.simplified());
  switch (n.kind) {
    case op::add: return ks[0] + ks[1];
    case op::sub: return ks[0] - ks[1];
    case op::mul: return ks[0] * ks[1];
    case op::div: return ks[0] / ks[1];
    case op::pow_i: return pow(ks[0], n.ivalue);
    case op::square: return square(ks[0]);
    case op::sqrt_: return sqrt(ks[0]);
    case op::exp_: return exp(ks[0]);
    case op::log_: return log(ks[0]);
    case op::sin_: return sin(ks[0]);
    case op::cos_: return cos(ks[0]);
    case op::abs_: return abs(ks[0]);
    case op::min_: return min(ks[0], ks[1]);
    case op::max_: return max(ks[0], ks[1]);
    case op::norm2: return norm2(ks);
    default: return *this;
  }
}

inline expr expr::with_arity(int target) const {
  const expr_node& n = *p_;
  if (n.kind == op::constant) return *this;
  if (n.kind == op::variable) return var(n.ivalue, target);
  std::vector<expr> ks;
  ks.reserve(n.kids.size());
  for (const auto& k : n.kids) ks.push_back(k.with_arity(target));
  auto out = std::make_shared<expr_node>();
  out->kind = n.kind;
  out->value = n.value;
  out->ivalue = n.ivalue;
  out->arity = target;
  out->kids = std::move(ks);
  return expr(std::move(out));
}

// ---- s-expression serialization ----

namespace detail {
inline std::string dtos(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
inline const char* op_name(op k) {
  switch (k) {
    case op::constant: return "const";
    case op::variable: return "var";
    case op::add: return "+";
    case op::sub: return "-";
    case op::mul: return "*";
    case op::div: return "/";
    case op::pow_i: return "pow";
    case op::square: return "sq";
    case op::sqrt_: return "sqrt";
    case op::exp_: return "exp";
    case op::log_: return "log";
    case op::sin_: return "sin";
    case op::cos_: return "cos";
    case op::abs_: return "abs";
    case op::min_: return "min";
    case op::max_: return "max";
    case op::norm2: return "norm2";
    default: return "?";
  }
}
}  // namespace detail

inline std::string expr::sexpr() const {
  const expr_node& n = *p_;
  if (n.kind == op::constant) return detail::dtos(n.value);
  if (n.kind == op::variable) return "x" + std::to_string(n.ivalue);
  std::string s = "(";
  s += detail::op_name(n.kind);
  if (n.kind == op::pow_i) s += " " + std::to_string(n.ivalue);
  for (const auto& k : n.kids) s += " " + k.sexpr();
  s += ")";
  return s;
}

namespace detail {

struct sexpr_reader {
  const std::string& s;
  std::size_t pos = 0;
  int arity;

  void skip_ws() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos])))
      ++pos;
  }

  std::string token() {
    skip_ws();
    std::size_t start = pos;
    while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos])) &&
           s[pos] != '(' && s[pos] != ')')
      ++pos;
    return s.substr(start, pos - start);
  }

  expr read() {
    skip_ws();
    if (pos >= s.size()) throw expr_error("sexpr: unexpected end");
    if (s[pos] != '(') {
      std::string t = token();
      if (t.empty()) throw expr_error("sexpr: empty token");
      if (t[0] == 'x' && t.size() > 1 &&
          std::isdigit(static_cast<unsigned char>(t[1])))
        return expr::var(std::atoi(t.c_str() + 1), arity);
      char* end = nullptr;
      double v = std::strtod(t.c_str(), &end);
      if (end == t.c_str() || *end != '\0')
        throw expr_error("sexpr: bad token '" + t + "'");
      return expr::lit(v);
    }
    ++pos;  // '('
    std::string head = token();
    std::vector<expr> kids;
    int exponent = 0;
    if (head == "pow") {
      std::string e = token();
      exponent = std::atoi(e.c_str());
    }
    while (true) {
      skip_ws();
      if (pos >= s.size()) throw expr_error("sexpr: missing ')'");
      if (s[pos] == ')') { ++pos; break; }
      kids.push_back(read());
    }
    auto need = [&](std::size_t k) {
      if (kids.size() != k)
        throw expr_error("sexpr: wrong argument count for " + head);
    };
    if (head == "+") { need(2); return kids[0] + kids[1]; }
    if (head == "-") { need(2); return kids[0] - kids[1]; }
    if (head == "*") { need(2); return kids[0] * kids[1]; }
    if (head == "/") { need(2); return kids[0] / kids[1]; }
    if (head == "pow") { need(1); return expr::pow(kids[0], exponent); }
    if (head == "sq") { need(1); return expr::square(kids[0]); }
    if (head == "sqrt") { need(1); return expr::sqrt(kids[0]); }
    if (head == "exp") { need(1); return expr::exp(kids[0]); }
    if (head == "log") { need(1); return expr::log(kids[0]); }
    if (head == "sin") { need(1); return expr::sin(kids[0]); }
    if (head == "cos") { need(1); return expr::cos(kids[0]); }
    if (head == "abs") { need(1); return expr::abs(kids[0]); }
    if (head == "min") { need(2); return expr::min(kids[0], kids[1]); }
    if (head == "max") { need(2); return expr::max(kids[0], kids[1]); }
    if (head == "norm2") return expr::norm2(kids);
    throw expr_error("sexpr: unknown head '" + head + "'");
  }
};

// Conventional infix grammar for config strings: + - * / ^ (integer powers),
// sin cos exp log sqrt abs min max, variables x1..xn (1-based).
struct infix_reader {
  const std::string& s;
  std::size_t pos = 0;
  int arity;

  void skip_ws() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos])))
      ++pos;
  }
  bool eat(char c) {
    skip_ws();
    if (pos < s.size() && s[pos] == c) { ++pos; return true; }
    return false;
  }
  char peek() {
    skip_ws();
    return pos < s.size() ? s[pos] : '\0';
  }

  expr parse() {
    expr e = sum();
    skip_ws();
    if (pos != s.size())
      throw expr_error("parse: trailing input at '" + s.substr(pos) + "'");
    return e;
  }

  expr sum() {
    expr e = product();
    while (true) {
      if (eat('+')) e = e + product();
      else if (eat('-')) e = e - product();
      else return e;
    }
  }

  expr product() {
    expr e = unary();
    while (true) {
      if (eat('*')) e = e * unary();
      else if (eat('/')) e = e / unary();
      else return e;
    }
  }

  expr unary() {
    if (eat('-')) return -unary();
    if (eat('+')) return unary();
    return power();
  }

  expr power() {
    expr base = primary();
    if (eat('^')) {
      bool neg = eat('-');
      skip_ws();
      std::size_t start = pos;
      while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos])))
        ++pos;
      if (pos == start) throw expr_error("parse: integer exponent expected");
      int n = std::atoi(s.substr(start, pos - start).c_str());
      return expr::pow(base, neg ? -n : n);
    }
    return base;
  }

  expr primary() {
    skip_ws();
    if (pos >= s.size()) throw expr_error("parse: unexpected end");
    char c = s[pos];
    if (c == '(') {
      ++pos;
      expr e = sum();
      if (!eat(')')) throw expr_error("parse: missing ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      char* end = nullptr;
      double v = std::strtod(s.c_str() + pos, &end);
      pos = end - s.c_str();
      return expr::lit(v);
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t start = pos;
      while (pos < s.size() &&
             (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
        ++pos;
      std::string name = s.substr(start, pos - start);
      if (name.size() > 1 && name[0] == 'x' &&
          std::isdigit(static_cast<unsigned char>(name[1]))) {
        int idx = std::atoi(name.c_str() + 1) - 1;
        if (idx < 0 || idx >= arity)
          throw expr_error("parse: variable " + name + " out of range");
        return expr::var(idx, arity);
      }
      if (!eat('(')) throw expr_error("parse: expected '(' after " + name);
      std::vector<expr> args;
      if (peek() != ')') {
        args.push_back(sum());
        while (eat(',')) args.push_back(sum());
      }
      if (!eat(')')) throw expr_error("parse: missing ')' after " + name);
      auto need = [&](std::size_t k) {
        if (args.size() != k)
          throw expr_error("parse: wrong argument count for " + name);
      };
      if (name == "sin") { need(1); return expr::sin(args[0]); }
      if (name == "cos") { need(1); return expr::cos(args[0]); }
      if (name == "exp") { need(1); return expr::exp(args[0]); }
      if (name == "log") { need(1); return expr::log(args[0]); }
      if (name == "sqrt") { need(1); return expr::sqrt(args[0]); }
      if (name == "abs") { need(1); return expr::abs(args[0]); }
      if (name == "min") { need(2); return expr::min(args[0], args[1]); }
      if (name == "max") { need(2); return expr::max(args[0], args[1]); }
      throw expr_error("parse: unknown function '" + name + "'");
    }
    throw expr_error(std::string("parse: unexpected character '") + c + "'");
  }
};

}  // namespace detail

inline expr expr::parse_sexpr(const std::string& s, int arity) {
  detail::sexpr_reader r{s, 0, arity};
  expr e = r.read();
  r.skip_ws();
  if (r.pos != s.size()) throw expr_error("sexpr: trailing input");
  return e;
}

inline expr expr::parse_infix(const std::string& s, int arity) {
  detail::infix_reader r{s, 0, arity};
  return r.parse();
}

}  // namespace clbf
