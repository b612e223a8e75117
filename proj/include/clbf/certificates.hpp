#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <string>
#include <vector>

#include "clbf/expr.hpp"
#include "clbf/interval.hpp"
#include "clbf/system.hpp"

namespace clbf {

struct certificate_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// x' P x as an expression, squares on the diagonal so interval evaluation
// does not pay the dependency tax twice.
inline expr quadratic_form(const std::vector<std::vector<double>>& P, int n) {
  if (static_cast<int>(P.size()) != n)
    throw certificate_error("quadratic form: wrong matrix size");
  expr q = expr::lit(0.0);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(P[i].size()) != n)
      throw certificate_error("quadratic form: ragged matrix");
    q = q + expr::lit(P[i][i]) * expr::square(expr::var(i, n));
    for (int j = i + 1; j < n; ++j) {
      double s = P[i][j] + P[j][i];
      if (s != 0.0)
        q = q + expr::lit(s) * expr::var(i, n) * expr::var(j, n);
    }
  }
  return q.simplified();
}

// Soft maximum of a family of scalar fields: log(sum exp(tau h_i))/tau.
// Two expression forms are kept: diff_form is the plain composition (smooth,
// what gets differentiated and interval-evaluated), eval_form shifts by the
// running max so large tau cannot overflow a point evaluation.
struct barrier {
  int n = 0;
  double tau = 1.0;
  std::vector<expr> terms;
  std::vector<std::vector<expr>> term_grads;
  expr diff_form;
  expr eval_form;

  double value(const std::vector<double>& x) const {
    // scratch is per-thread: one barrier may be evaluated from many
    // simulation workers at once
    static thread_local std::vector<double> hs;
    double hmax = -std::numeric_limits<double>::infinity();
    hs.resize(terms.size());
    for (std::size_t i = 0; i < terms.size(); ++i) {
      hs[i] = terms[i].eval(x);
      hmax = std::max(hmax, hs[i]);
    }
    double s = 0.0;
    for (double hi : hs) s += std::exp(tau * (hi - hmax));
    return hmax + std::log(s) / tau;
  }

  double value_and_grad(const std::vector<double>& x,
                        std::vector<double>& grad) const {
    static thread_local std::vector<double> hs;
    double hmax = -std::numeric_limits<double>::infinity();
    hs.resize(terms.size());
    for (std::size_t i = 0; i < terms.size(); ++i) {
      hs[i] = terms[i].eval(x);
      hmax = std::max(hmax, hs[i]);
    }
    double s = 0.0;
    for (std::size_t i = 0; i < terms.size(); ++i) {
      hs[i] = std::exp(tau * (hs[i] - hmax));
      s += hs[i];
    }
    grad.assign(n, 0.0);
    for (std::size_t i = 0; i < terms.size(); ++i) {
      double w = hs[i] / s;
      for (int k = 0; k < n; ++k)
        grad[k] += w * term_grads[i][k].eval(x);
    }
    return hmax + std::log(s) / tau;
  }
};

inline barrier make_barrier(std::vector<expr> terms, double tau, int n) {
  if (terms.empty()) throw certificate_error("barrier needs at least one term");
  if (!(tau > 0.0)) throw certificate_error("barrier sharpness must be positive");
  barrier b;
  b.n = n;
  b.tau = tau;
  b.terms = std::move(terms);
  for (const auto& t : b.terms) {
    if (t.arity() != 0 && t.arity() != n)
      throw certificate_error("barrier term arity mismatch");
    b.term_grads.push_back(gradient(t, n));
  }

  expr tl = expr::lit(tau);
  expr acc = expr::exp(tl * b.terms[0]);
  for (std::size_t i = 1; i < b.terms.size(); ++i)
    acc = acc + expr::exp(tl * b.terms[i]);
  b.diff_form = (expr::log(acc) / tl).simplified();

  expr hmax = b.terms[0];
  for (std::size_t i = 1; i < b.terms.size(); ++i)
    hmax = expr::max(hmax, b.terms[i]);
  expr acc2 = expr::exp(tl * (b.terms[0] - hmax));
  for (std::size_t i = 1; i < b.terms.size(); ++i)
    acc2 = acc2 + expr::exp(tl * (b.terms[i] - hmax));
  b.eval_form = (hmax + expr::log(acc2) / tl).simplified();
  return b;
}

// Quadratic-inside, barrier-outside patched function
//   W = alpha V          where h <= 1 - eps
//   W = h                where h >= 1
//   W = (1-k) alpha V + k h   in the band, k = bump(h)
// with bump(h) = exp(-1/(eps^2 - (h-1)^2) + 1/eps^2), which runs 0 -> 1
// across the band with all derivatives vanishing at the inner edge.
struct patched {
  barrier b;
  expr V;
  std::vector<expr> grad_V;
  double alpha = 1.0;
  double eps = 0.5;

  enum class region { inner, band, outer };

  double bump(double h) const {
    if (h >= 1.0) return 1.0;
    if (h <= 1.0 - eps) return 0.0;
    double d = eps * eps - (h - 1.0) * (h - 1.0);
    return std::exp(-1.0 / d + 1.0 / (eps * eps));
  }

  double bump_deriv(double h) const {
    if (h >= 1.0 || h <= 1.0 - eps) return 0.0;
    double d = eps * eps - (h - 1.0) * (h - 1.0);
    return -2.0 * (h - 1.0) * bump(h) / (d * d);
  }

  region classify(double h) const {
    if (h >= 1.0) return region::outer;
    if (h <= 1.0 - eps) return region::inner;
    return region::band;
  }

  double scaled_V(const std::vector<double>& x) const {
    return alpha * V.eval(x);
  }

  double value(const std::vector<double>& x) const {
    double h = b.value(x);
    switch (classify(h)) {
      case region::outer: return h;
      case region::inner: return scaled_V(x);
      case region::band: {
        double k = bump(h);
        return (1.0 - k) * scaled_V(x) + k * h;
      }
    }
    return h;
  }

  double value_and_grad(const std::vector<double>& x,
                        std::vector<double>& grad) const {
    std::vector<double> gh;
    double h = b.value_and_grad(x, gh);
    switch (classify(h)) {
      case region::outer:
        grad = gh;
        return h;
      case region::inner: {
        grad.resize(b.n);
        for (int i = 0; i < b.n; ++i) grad[i] = alpha * grad_V[i].eval(x);
        return scaled_V(x);
      }
      case region::band: {
        double k = bump(h), kd = bump_deriv(h);
        double av = scaled_V(x);
        grad.resize(b.n);
        for (int i = 0; i < b.n; ++i) {
          double gv = alpha * grad_V[i].eval(x);
          grad[i] = (1.0 - k) * gv + (k + kd * (h - av)) * gh[i];
        }
        return (1.0 - k) * av + k * h;
      }
    }
    return h;
  }

  static patched build(barrier b, expr V, double alpha, double eps,
                       bool prerequisites_verified) {
    if (!prerequisites_verified)
      throw certificate_error(
          "patched function requested before its side conditions were verified");
    if (!(eps > 0.0 && eps < 1.0))
      throw certificate_error("band width must lie in (0,1)");
    if (!(alpha > 0.0)) throw certificate_error("scale must be positive");
    patched p;
    p.grad_V = gradient(V, b.n);
    p.b = std::move(b);
    p.V = std::move(V);
    p.alpha = alpha;
    p.eps = eps;
    return p;
  }
};

// ---- certified maximization over a sublevel set ----

struct bnb_options {
  double rel_tol = 1e-6;
  double width_floor = 1e-8;
  std::uint64_t budget = 50000000;
  std::vector<std::vector<double>> hints;
};

struct bnb_result {
  double upper = -std::numeric_limits<double>::infinity();
  double best_value = -std::numeric_limits<double>::infinity();
  std::vector<double> best_point;
  std::uint64_t boxes = 0;
  bool converged = false;
};

// max objective(x) over {x in domain : constraint(x) <= 0}, returning a bound
// that is certainly >= the true supremum, plus a feasible incumbent proving
// the bound is nearly attained. Best-first on the interval upper bound;
// deterministic by construction (single thread, sequence-numbered heap).
inline bnb_result maximize_on_sublevel(const expr& objective,
                                       const expr& constraint,
                                       const hyperbox& domain,
                                       const bnb_options& opt) {
  const int n = static_cast<int>(domain.size());
  bnb_result out;

  auto feasible_value = [&](const std::vector<double>& x, double& val) {
    hyperbox thin;
    thin.reserve(n);
    for (double xi : x) thin.push_back(interval(xi));
    for (std::size_t i = 0; i < thin.size(); ++i)
      if (!domain[i].contains(x[i])) return false;
    auto c = constraint.eval_interval(thin);
    if (!c.domain_ok || c.v.hi > 0.0) return false;
    auto v = objective.eval_interval(thin);
    if (!v.domain_ok) return false;
    val = v.v.lo;
    return true;
  };

  auto consider = [&](const std::vector<double>& x) {
    double val;
    if (feasible_value(x, val) && val > out.best_value) {
      out.best_value = val;
      out.best_point = x;
    }
  };

  // Hints seed the incumbent. A hint sitting exactly on the constraint
  // boundary can fail the rigorous feasibility test by a rounding hair, so
  // walk it inward along -grad(objective) a little at a time.
  std::vector<expr> gobj;
  for (int i = 0; i < n; ++i) gobj.push_back(objective.diff(i).simplified());
  for (const auto& hint : opt.hints) {
    if (static_cast<int>(hint.size()) != n) continue;
    consider(hint);
    std::vector<double> g(n);
    double gn = 0.0;
    try {
      for (int i = 0; i < n; ++i) {
        g[i] = gobj[i].eval(hint);
        gn += g[i] * g[i];
      }
    } catch (const eval_error&) {
      continue;
    }
    gn = std::sqrt(gn);
    if (gn == 0.0) continue;
    for (double step : {1e-7, 3e-7, 1e-6, 3e-6, 1e-5, 3e-5, 1e-4}) {
      std::vector<double> x = hint;
      for (int i = 0; i < n; ++i) x[i] -= step * g[i] / gn;
      double val;
      if (feasible_value(x, val)) {
        if (val > out.best_value) {
          out.best_value = val;
          out.best_point = x;
        }
        break;
      }
    }
  }

  struct item {
    double key;
    std::uint64_t seq;
    hyperbox box;
  };
  auto cmp = [](const item& a, const item& b) {
    if (a.key != b.key) return a.key < b.key;  // max-heap on key
    return a.seq > b.seq;                      // then FIFO
  };
  std::priority_queue<item, std::vector<item>, decltype(cmp)> heap(cmp);
  std::uint64_t seq = 0;
  double retired = -std::numeric_limits<double>::infinity();

  auto push_box = [&](hyperbox box) {
    auto c = constraint.eval_interval(box);
    if (c.domain_ok && c.v.lo > 0.0) return;  // infeasible
    auto v = objective.eval_interval(box);
    double key = v.domain_ok ? v.v.hi : std::numeric_limits<double>::infinity();
    if (key <= out.best_value) return;  // cannot beat the incumbent
    consider(box_mid(box));
    if (max_width(box) < opt.width_floor) {
      retired = std::max(retired, key);
      return;
    }
    heap.push({key, seq++, std::move(box)});
  };

  push_box(domain);
  const double inf = std::numeric_limits<double>::infinity();
  while (!heap.empty()) {
    double live = heap.top().key;
    double bound = std::max(live, retired);
    double gap_tol = opt.rel_tol * std::max(std::abs(out.best_value), 1e-12);
    if (out.best_value > -inf && bound - out.best_value <= gap_tol) {
      out.upper = bound;
      out.converged = true;
      out.boxes = seq;
      return out;
    }
    if (seq > opt.budget) break;
    item it = heap.top();
    heap.pop();
    if (it.key <= out.best_value) continue;
    int d = widest_dim(it.box);
    double mid = it.box[d].mid();
    hyperbox left = it.box, right = std::move(it.box);
    left[d] = interval(left[d].lo, mid);
    right[d] = interval(mid, right[d].hi);
    push_box(std::move(left));
    push_box(std::move(right));
  }

  out.upper = std::max(retired, heap.empty() ? -inf : heap.top().key);
  out.upper = std::max(out.upper, out.best_value);
  out.boxes = seq;
  double gap_tol = opt.rel_tol * std::max(std::abs(out.best_value), 1e-12);
  out.converged = out.best_value > -inf && out.upper > -inf &&
                  out.upper - out.best_value <= gap_tol;
  return out;
}

struct scale_result {
  double alpha = 0.0;
  double level_max = 0.0;  // certified upper bound for V over {h <= 1}
  bnb_result search;
};

// Largest alpha with {alpha V <= 1 - eps} containing {h <= 1}: divide 1-eps
// by a certified upper bound of V over the barrier sublevel set.
inline scale_result scale_to_sublevel(const expr& V, const barrier& b,
                                      const hyperbox& domain, double eps,
                                      const bnb_options& opt) {
  expr constraint = (b.diff_form - expr::lit(1.0)).simplified();
  bnb_result r = maximize_on_sublevel(V, constraint, domain, opt);
  if (!r.converged)
    throw certificate_error("level search did not reach its tolerance");
  if (!(r.upper > 0.0))
    throw certificate_error("barrier sublevel set appears empty or V <= 0 on it");
  scale_result out;
  out.level_max = r.upper;
  out.alpha = (1.0 - eps) / r.upper;
  out.search = std::move(r);
  return out;
}

// ---- interior stationary point of the soft maximum ----

struct stationary_result {
  bool ok = false;
  std::vector<double> x;
  double grad_norm = 0.0;
  int iters = 0;
  std::string reason;
};

inline stationary_result find_stationary(const barrier& b,
                                         std::vector<double> x0,
                                         const hyperbox& domain,
                                         int max_iters = 200000,
                                         double tol = 1e-8) {
  stationary_result out;
  std::vector<double> g, xt;
  double h = b.value_and_grad(x0, g);
  for (int it = 0; it < max_iters; ++it) {
    double gn2 = 0.0;
    for (double gi : g) gn2 += gi * gi;
    double gn = std::sqrt(gn2);
    if (gn <= tol) {
      out.ok = true;
      out.x = std::move(x0);
      out.grad_norm = gn;
      out.iters = it;
      return out;
    }
    double t = 1.0;
    bool moved = false;
    while (t >= 1e-18) {
      xt = x0;
      bool inside = true;
      for (std::size_t i = 0; i < xt.size(); ++i) {
        xt[i] -= t * g[i];
        if (!domain[i].contains(xt[i])) inside = false;
      }
      if (inside) {
        double ht = b.value(xt);
        if (ht <= h - 1e-4 * t * gn2) {
          x0 = xt;
          h = b.value_and_grad(x0, g);
          moved = true;
          break;
        }
      }
      t *= 0.5;
    }
    if (!moved) {
      out.x = std::move(x0);
      out.grad_norm = gn;
      out.iters = it;
      out.reason = "line search stalled; no interior stationary point found";
      return out;
    }
  }
  out.x = std::move(x0);
  out.reason = "iteration budget exhausted";
  out.iters = max_iters;
  return out;
}

// First entry of the schedule for which the caller's full check passes.
struct epsilon_result {
  bool ok = false;
  double eps = 0.0;
  std::string reason;
};

inline epsilon_result find_epsilon(const std::vector<double>& schedule,
                                   const std::function<bool(double)>& passes) {
  if (schedule.empty()) return {false, 0.0, "empty band-width schedule"};
  for (double e : schedule) {
    if (!(e > 0.0 && e < 1.0)) return {false, e, "band width outside (0,1)"};
    if (passes(e)) return {true, e, ""};
  }
  return {false, 0.0, "no band width in the schedule verified"};
}

}  // namespace clbf
