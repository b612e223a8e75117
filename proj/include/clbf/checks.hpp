#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "clbf/certificates.hpp"
#include "clbf/system.hpp"
#include "clbf/verifier.hpp"

namespace clbf {

struct labeled_condition {
  std::string name;
  condition cond;
};

struct check_result {
  verdict v = verdict::unknown;
  std::vector<labeled_condition> cases;
  std::vector<refutation> runs;  // parallel to cases
  std::string note;
};

namespace detail {

// min over the input set of s . u, as an expression of x (and any extra vars):
//   ball:  -ubar * ||s||_2, handled by the caller via a norm2 node
//   box:   sum_j (mid_j s_j - rad_j |s_j|), handled by sign-splitting
// For the box the caller gets 2^m cases; premises pin sign(s_j) = sigma_j.
struct support_cases {
  std::vector<std::string> suffix;          // per case
  std::vector<std::vector<expr>> premises;  // per case, appended to the base
  std::vector<expr> min_term;               // per case, min_u s.u as an expr
};

inline support_cases input_support(const input_set& u,
                                   const std::vector<expr>& s) {
  support_cases out;
  if (u.type == input_set::kind::ball) {
    out.suffix.push_back("ball");
    out.premises.emplace_back();
    out.min_term.push_back(expr::lit(-u.bound) * expr::norm2(s));
    return out;
  }
  const int m = static_cast<int>(s.size());
  for (int mask = 0; mask < (1 << m); ++mask) {
    std::string name = "box_";
    std::vector<expr> prem;
    expr term = expr::lit(0.0);
    for (int j = 0; j < m; ++j) {
      bool pos = (mask >> j) & 1;
      name += pos ? 'p' : 'n';
      double sg = pos ? 1.0 : -1.0;
      prem.push_back(expr::lit(-sg) * s[j]);  // requires sigma_j s_j >= 0
      term = term + expr::lit(u.mid(j)) * s[j] -
             expr::lit(u.radius(j) * sg) * s[j];
    }
    out.suffix.push_back(std::move(name));
    out.premises.push_back(std::move(prem));
    out.min_term.push_back(term.simplified());
  }
  return out;
}

}  // namespace detail

// On the unit level set of the soft barrier some admissible input must push h
// down: min_u L_f h + L_g h . u < 0 wherever h = 1.
inline std::vector<labeled_condition> build_cbf_cases(const control_system& sys,
                                                      const barrier& b) {
  lie_derivs ld = lie(sys, b.diff_form);
  auto sup = detail::input_support(sys.input, ld.along_g);
  std::vector<labeled_condition> out;
  for (std::size_t k = 0; k < sup.suffix.size(); ++k) {
    condition c;
    c.arity = sys.n;
    c.domain = sys.domain;
    c.eq = {(b.diff_form - expr::lit(1.0)).simplified()};
    c.le = sup.premises[k];
    c.concl = (ld.along_f + sup.min_term[k]).simplified();
    out.push_back({"cbf_" + sup.suffix[k], std::move(c)});
  }
  return out;
}

// Where the barrier allows it and the quadratic has left the handoff set,
// some admissible input must strictly decrease V.
inline std::vector<labeled_condition> build_clf_cases(const control_system& sys,
                                                      const expr& V,
                                                      double level,
                                                      const barrier& b) {
  lie_derivs ld = lie(sys, V);
  auto sup = detail::input_support(sys.input, ld.along_g);
  std::vector<labeled_condition> out;
  for (std::size_t k = 0; k < sup.suffix.size(); ++k) {
    condition c;
    c.arity = sys.n;
    c.domain = sys.domain;
    c.le = {(b.diff_form - expr::lit(1.0)).simplified(),
            (expr::lit(level) - V).simplified()};
    for (const auto& p : sup.premises[k]) c.le.push_back(p);
    c.concl = (ld.along_f + sup.min_term[k]).simplified();
    out.push_back({"clf_" + sup.suffix[k], std::move(c)});
  }
  return out;
}

// In the blending band no convex combination of the two descent demands may
// become a certificate of infeasibility: over normalized multipliers the
// combined drift must stay below the combined input authority.
inline std::vector<labeled_condition> build_compat_cases(
    const control_system& sys, const expr& V, const barrier& b, double eps,
    bool include_unreduced_crosscheck) {
  lie_derivs lv = lie(sys, V);
  lie_derivs lh = lie(sys, b.diff_form);
  expr band_lo = (expr::lit(1.0 - eps) - b.diff_form).simplified();
  expr band_hi = (b.diff_form - expr::lit(1.0)).simplified();
  std::vector<labeled_condition> out;

  if (sys.input.type == input_set::kind::ball) {
    {
      // multipliers (l1, l2) with l1 + l2 <= 1; the slack tau = 1 - l1 - l2
      // plays the role of the normalized input-authority weight.
      const int N = sys.n + 2;
      expr l1 = expr::var(sys.n, N), l2 = expr::var(sys.n + 1, N);
      expr tau = (expr::lit(1.0) - l1 - l2).simplified();
      std::vector<expr> s;
      for (int j = 0; j < sys.m; ++j)
        s.push_back((l1 * lv.along_g[j].with_arity(N) +
                     l2 * lh.along_g[j].with_arity(N))
                        .simplified());
      condition c;
      c.arity = N;
      c.domain = sys.domain;
      c.domain.push_back(interval(0.0, 1.0));
      c.domain.push_back(interval(0.0, 1.0));
      c.le = {band_lo.with_arity(N), band_hi.with_arity(N),
              (l1 + l2 - expr::lit(1.0)).simplified(),
              (expr::norm2(s) - tau).simplified()};
      c.concl = (l1 * lv.along_f.with_arity(N) +
                 l2 * lh.along_f.with_arity(N) -
                 expr::lit(sys.input.bound) * tau)
                    .simplified();
      out.push_back({"compat_ball", std::move(c)});
    }
    if (include_unreduced_crosscheck) {
      // same statement with tau kept as an explicit variable tied by an
      // equality, as a consistency probe on the reduction
      const int N = sys.n + 3;
      expr l1 = expr::var(sys.n, N), l2 = expr::var(sys.n + 1, N);
      expr tau = expr::var(sys.n + 2, N);
      std::vector<expr> s;
      for (int j = 0; j < sys.m; ++j)
        s.push_back((l1 * lv.along_g[j].with_arity(N) +
                     l2 * lh.along_g[j].with_arity(N))
                        .simplified());
      condition c;
      c.arity = N;
      c.domain = sys.domain;
      for (int k = 0; k < 3; ++k) c.domain.push_back(interval(0.0, 1.0));
      c.eq = {(l1 + l2 + tau - expr::lit(1.0)).simplified()};
      c.le = {band_lo.with_arity(N), band_hi.with_arity(N),
              (expr::norm2(s) - tau).simplified()};
      c.concl = (l1 * lv.along_f.with_arity(N) +
                 l2 * lh.along_f.with_arity(N) -
                 expr::lit(sys.input.bound) * tau)
                    .simplified();
      out.push_back({"compat_ball_unreduced", std::move(c)});
    }
    return out;
  }

  // Box input: on the unit simplex the pair (l1, l2) = (l, 1-l) suffices.
  const int N = sys.n + 1;
  expr l1 = expr::var(sys.n, N);
  expr l2 = (expr::lit(1.0) - l1).simplified();
  std::vector<expr> s;
  for (int j = 0; j < sys.m; ++j)
    s.push_back((l1 * lv.along_g[j].with_arity(N) +
                 l2 * lh.along_g[j].with_arity(N))
                    .simplified());
  auto sup = detail::input_support(sys.input, s);
  for (std::size_t k = 0; k < sup.suffix.size(); ++k) {
    condition c;
    c.arity = N;
    c.domain = sys.domain;
    c.domain.push_back(interval(0.0, 1.0));
    c.le = {band_lo.with_arity(N), band_hi.with_arity(N)};
    for (const auto& p : sup.premises[k]) c.le.push_back(p);
    c.concl = (l1 * lv.along_f.with_arity(N) + l2 * lh.along_f.with_arity(N) +
               sup.min_term[k])
                  .simplified();
    out.push_back({"compat_" + sup.suffix[k], std::move(c)});
  }
  return out;
}

inline check_result run_cases(std::vector<labeled_condition> cases,
                              const refute_options& opt) {
  check_result out;
  out.cases = std::move(cases);
  bool any_unknown = false;
  for (const auto& lc : out.cases) {
    out.runs.push_back(refute_forall(lc.cond, opt));
    const auto& r = out.runs.back();
    if (r.result == verdict::falsified) {
      out.v = verdict::falsified;
      out.note = lc.name;
      return out;
    }
    if (r.result == verdict::unknown) {
      any_unknown = true;
      if (out.note.empty()) out.note = lc.name;
    }
  }
  out.v = any_unknown ? verdict::unknown : verdict::verified;
  if (!any_unknown) out.note.clear();
  return out;
}

// ---- local quadratic certificate around the origin ----

struct local_result {
  verdict v = verdict::unknown;
  std::string failing;  // empty when verified
  double eta = 0.0;     // half the spectral margin of the closed-loop pencil
  double mu = 0.0;      // third-order remainder bound over the core box
  double mu_floor = 0.0;
  double input_margin = 0.0;  // admissible authority minus demand at level c
  labeled_condition annulus;
  refutation annulus_run;
  std::vector<double> witness;
};

struct local_options {
  double r_core = 1e-5;
  refute_options refute;
};

// Strict decrease of V = x'Px under u = -Kx on {V <= c} away from the core
// box, as a quantifier-free condition (also the emission form of the check).
inline labeled_condition build_local_outer(
    const control_system& sys, const std::vector<std::vector<double>>& P,
    const std::vector<std::vector<double>>& K, double c, double r_core) {
  const int n = sys.n, m = sys.m;
  expr V = quadratic_form(P, n);
  std::vector<expr> gv = gradient(V, n);
  expr vdot = expr::lit(0.0);
  for (int i = 0; i < n; ++i) {
    expr fcl = sys.f[i];
    for (int j = 0; j < m; ++j) {
      expr kx = expr::lit(0.0);
      for (int k = 0; k < n; ++k)
        kx = kx + expr::lit(K[j][k]) * expr::var(k, n);
      fcl = fcl - sys.g[i][j] * kx;
    }
    vdot = vdot + gv[i] * fcl;
  }
  vdot = vdot.simplified();

  expr inf_norm = expr::abs(expr::var(0, n));
  for (int i = 1; i < n; ++i)
    inf_norm = expr::max(inf_norm, expr::abs(expr::var(i, n)));
  condition ann;
  ann.arity = n;
  ann.domain = sys.domain;
  ann.le = {(V - expr::lit(c)).simplified(),
            (expr::lit(r_core) - inf_norm).simplified()};
  ann.concl = vdot;
  return {"local_outer", std::move(ann)};
}

// Linear feedback u = -K x around the origin: checks the closed-loop matrix
// margin, dominates the nonlinear remainder (interval Taylor bound on the
// core box, branch and prune on the rest of {V <= c}), and confirms the law
// respects the input set on the whole handoff region.
inline local_result check_local(const control_system& sys,
                                const std::vector<std::vector<double>>& P,
                                const std::vector<std::vector<double>>& K,
                                double c, const local_options& opt) {
  using Mat = Eigen::MatrixXd;
  const int n = sys.n, m = sys.m;
  local_result out;

  Mat Pm(n, n), A(n, n), B(n, m), Km(m, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) Pm(i, j) = P[i][j];
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) Km(i, j) = K[i][j];
  std::vector<double> origin(n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) A(i, j) = sys.f[i].diff(j).eval(origin);
    for (int j = 0; j < m; ++j) B(i, j) = sys.g[i][j].eval(origin);
  }

  Eigen::SelfAdjointEigenSolver<Mat> pes(0.5 * (Pm + Pm.transpose()));
  if (pes.eigenvalues().minCoeff() <= 0.0) {
    out.v = verdict::falsified;
    out.failing = "matrix-margin";
    return out;
  }

  Mat Acl = A - B * Km;
  Mat Qt = Acl.transpose() * Pm + Pm * Acl;
  Eigen::SelfAdjointEigenSolver<Mat> qes(0.5 * (Qt + Qt.transpose()));
  double lam_max = qes.eigenvalues().maxCoeff();
  if (!(lam_max < 0.0)) {
    out.v = verdict::falsified;
    out.failing = "matrix-margin";
    return out;
  }
  out.eta = -lam_max / 2.0;

  // input admissibility over the whole ellipsoid {V <= c}
  Mat Pinv = Pm.llt().solve(Mat::Identity(n, n));
  if (sys.input.type == input_set::kind::ball) {
    Mat G = Km * Pinv * Km.transpose();
    Eigen::SelfAdjointEigenSolver<Mat> ges(0.5 * (G + G.transpose()));
    double peak = std::sqrt(c * std::max(0.0, ges.eigenvalues().maxCoeff()));
    out.input_margin = sys.input.bound - peak;
    if (!(peak <= sys.input.bound)) {
      out.v = verdict::falsified;
      out.failing = "admissibility";
      return out;
    }
  } else {
    out.input_margin = std::numeric_limits<double>::infinity();
    for (int j = 0; j < m; ++j) {
      double q = (Km.row(j) * Pinv * Km.row(j).transpose())(0, 0);
      double peak = std::sqrt(c * std::max(0.0, q));
      double room = std::min(sys.input.hi[j], -sys.input.lo[j]);
      out.input_margin = std::min(out.input_margin, room - peak);
      if (!(peak <= room)) {
        out.v = verdict::falsified;
        out.failing = "admissibility";
        return out;
      }
    }
  }

  // closed-loop decrease of V: the emission form carries the exact
  // expression as its conclusion
  out.annulus = build_local_outer(sys, P, K, c, opt.r_core);
  const expr& vdot = out.annulus.cond.concl;

  // Taylor remainder over the core box: bound all third partials of vdot
  // (its quadratic part contributes nothing at third order).
  const double r = opt.r_core;
  hyperbox core(n, interval(-r, r));
  double sum = 0.0;
  std::vector<int> alpha(n, 0);
  std::function<void(int, int, const expr&)> walk = [&](int from, int left,
                                                        const expr& d) {
    if (left == 0) {
      double w = 6.0;
      for (int i = 0; i < n; ++i)
        for (int k = 2; k <= alpha[i]; ++k) w /= k;
      auto iv = d.eval_interval(core);
      if (!iv.domain_ok || !iv.v.is_finite()) {
        sum = std::numeric_limits<double>::infinity();
        return;
      }
      sum += w * std::max(std::abs(iv.v.lo), std::abs(iv.v.hi));
      return;
    }
    for (int i = from; i < n; ++i) {
      ++alpha[i];
      walk(i, left - 1, d.diff(i).simplified());
      --alpha[i];
    }
  };
  walk(0, 3, vdot);
  out.mu = (r * r * r / 6.0) * sum;
  out.mu_floor = 2.0 * out.eta * r * r;
  if (!(out.mu < out.mu_floor)) {
    out.v = verdict::unknown;
    out.failing = "core-remainder";
    return out;
  }

  // the rest of {V <= c}: branch and prune directly on vdot < 0
  out.annulus_run = refute_forall(out.annulus.cond, opt.refute);
  if (out.annulus_run.result == verdict::falsified) {
    out.v = verdict::falsified;
    out.failing = "annulus";
    out.witness = out.annulus_run.witness;
    return out;
  }
  if (out.annulus_run.result == verdict::unknown) {
    out.v = verdict::unknown;
    out.failing = "annulus";
    return out;
  }
  out.v = verdict::verified;
  return out;
}

}  // namespace clbf
