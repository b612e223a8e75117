#pragma once

#include <string>
#include <vector>

#include "clbf/expr.hpp"
#include "clbf/interval.hpp"

namespace clbf {

struct input_set {
  enum class kind { ball, box };
  kind type = kind::ball;
  double bound = 1.0;               // ball: ||u||_2 <= bound
  std::vector<double> lo, hi;       // box: lo_j <= u_j <= hi_j

  int dim_box() const { return static_cast<int>(lo.size()); }
  double mid(int j) const { return 0.5 * (lo[j] + hi[j]); }
  double radius(int j) const { return 0.5 * (hi[j] - lo[j]); }
};

struct system_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// xdot = f(x) + g(x) u, with x ranging over a closed hyperbox.
struct control_system {
  int n = 0;
  int m = 0;
  std::vector<expr> f;               // n entries
  std::vector<std::vector<expr>> g;  // n rows, m columns
  hyperbox domain;                   // n intervals
  input_set input;

  void validate() const {
    if (n <= 0 || m <= 0) throw system_error("state/input dimension must be positive");
    if (static_cast<int>(f.size()) != n) throw system_error("f has wrong length");
    if (static_cast<int>(g.size()) != n) throw system_error("g has wrong row count");
    for (const auto& row : g)
      if (static_cast<int>(row.size()) != m) throw system_error("g has wrong column count");
    if (static_cast<int>(domain.size()) != n) throw system_error("domain has wrong dimension");
    for (const auto& d : domain)
      if (!(d.lo <= d.hi) || !d.is_finite()) throw system_error("domain interval is degenerate");
    auto check_arity = [&](const expr& e, const char* where) {
      if (e.arity() != 0 && e.arity() != n)
        throw system_error(std::string(where) + ": expression arity does not match state dimension");
    };
    for (const auto& e : f) check_arity(e, "f");
    for (const auto& row : g)
      for (const auto& e : row) check_arity(e, "g");
    if (input.type == input_set::kind::ball) {
      if (!(input.bound > 0.0)) throw system_error("input ball bound must be positive");
    } else {
      if (input.dim_box() != m || static_cast<int>(input.hi.size()) != m)
        throw system_error("input box has wrong dimension");
      for (int j = 0; j < m; ++j)
        if (!(input.lo[j] < input.hi[j])) throw system_error("input box is degenerate");
    }
  }

  std::vector<double> xdot(const std::vector<double>& x,
                           const std::vector<double>& u) const {
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) {
      double v = f[i].eval(x);
      for (int j = 0; j < m; ++j) v += g[i][j].eval(x) * u[j];
      out[i] = v;
    }
    return out;
  }

  bool in_domain(const std::vector<double>& x) const {
    for (int i = 0; i < n; ++i)
      if (!domain[i].contains(x[i])) return false;
    return true;
  }
};

inline std::vector<expr> gradient(const expr& W, int n) {
  std::vector<expr> g;
  g.reserve(n);
  for (int i = 0; i < n; ++i) g.push_back(W.diff(i).simplified());
  return g;
}

struct lie_derivs {
  expr along_f;               // dW/dx . f
  std::vector<expr> along_g;  // dW/dx . g_col_j, one per input
};

inline lie_derivs lie(const control_system& sys, const expr& W) {
  std::vector<expr> gw = gradient(W, sys.n);
  expr lf = expr::lit(0.0);
  for (int i = 0; i < sys.n; ++i) lf = lf + gw[i] * sys.f[i];
  lie_derivs out;
  out.along_f = lf.simplified();
  out.along_g.reserve(sys.m);
  for (int j = 0; j < sys.m; ++j) {
    expr lg = expr::lit(0.0);
    for (int i = 0; i < sys.n; ++i) lg = lg + gw[i] * sys.g[i][j];
    out.along_g.push_back(lg.simplified());
  }
  return out;
}

}  // namespace clbf
