#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "clbf/system.hpp"

namespace clbf {

// Small-instance instruments for the two linear-feasibility lemmas the
// compatibility check rests on. The primal side searches {Au < b, u in U}
// directly; the dual side minimizes the normalized multiplier functional
// whose positivity is equivalent to primal feasibility. Production checks
// never call these; tests compare the two routes against each other.

struct farkas_primal {
  bool feasible = false;
  double margin = 0.0;  // max over U of min_i (b_i - A_i u)
  std::vector<double> u;
};

namespace detail {

inline double row_dot(const std::vector<double>& row,
                      const std::vector<double>& u) {
  double s = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) s += row[j] * u[j];
  return s;
}

// all nonnegative vectors of length k with entries on a grid of `step`
// summing to 1
inline void walk_simplex(int k, double step,
                         const std::function<void(const std::vector<double>&)>& fn) {
  std::vector<double> lam(k, 0.0);
  std::function<void(int, double)> rec = [&](int i, double left) {
    if (i == k - 1) {
      lam[i] = left;
      fn(lam);
      return;
    }
    int ticks = static_cast<int>(std::round(left / step));
    for (int t = 0; t <= ticks; ++t) {
      lam[i] = t * step;
      rec(i + 1, left - t * step);
    }
  };
  rec(0, 1.0);
}

}  // namespace detail

// Dense grid search with window refinement for {u in bounds : Au < b}.
inline farkas_primal farkas_primal_feasible(
    const std::vector<std::vector<double>>& A, const std::vector<double>& b,
    const input_set& bounds) {
  const int m = A.empty() ? bounds.dim_box() : static_cast<int>(A[0].size());
  std::vector<double> lo(m), hi(m);
  for (int j = 0; j < m; ++j) {
    if (bounds.type == input_set::kind::ball) {
      lo[j] = -bounds.bound;
      hi[j] = bounds.bound;
    } else {
      lo[j] = bounds.lo[j];
      hi[j] = bounds.hi[j];
    }
  }
  auto margin_at = [&](const std::vector<double>& u) {
    if (bounds.type == input_set::kind::ball) {
      double n2 = 0.0;
      for (double uj : u) n2 += uj * uj;
      if (n2 > bounds.bound * bounds.bound) return -1e300;
    }
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < A.size(); ++i)
      worst = std::min(worst, b[i] - detail::row_dot(A[i], u));
    return worst;
  };

  farkas_primal best;
  best.margin = -std::numeric_limits<double>::infinity();
  best.u.assign(m, 0.0);
  std::vector<double> center(m), width(m), u(m);
  for (int j = 0; j < m; ++j) {
    center[j] = 0.5 * (lo[j] + hi[j]);
    width[j] = 0.5 * (hi[j] - lo[j]);
  }
  const int ticks = 16;  // 33 points per axis and round
  for (int round = 0; round < 9; ++round) {
    std::vector<int> idx(m, -ticks);
    for (;;) {
      for (int j = 0; j < m; ++j) {
        u[j] = center[j] + width[j] * idx[j] / ticks;
        u[j] = std::clamp(u[j], lo[j], hi[j]);
      }
      double mg = margin_at(u);
      if (mg > best.margin) {
        best.margin = mg;
        best.u = u;
      }
      int j = 0;
      while (j < m && ++idx[j] > ticks) idx[j++] = -ticks;
      if (j == m) break;
    }
    center = best.u;
    for (int j = 0; j < m; ++j) width[j] *= 0.25;
  }
  best.feasible = best.margin > 0.0;
  return best;
}

// Lemma-1 dual functional for box bounds: min over the simplex of
// lambda.b - min_u (lambda.A) u, the inner min taken in closed form.
inline double farkas_dual_min_box(const std::vector<std::vector<double>>& A,
                                  const std::vector<double>& b,
                                  const input_set& box) {
  const int k = static_cast<int>(A.size());
  const int m = box.dim_box();
  auto value = [&](const std::vector<double>& lam) {
    double v = 0.0;
    for (int i = 0; i < k; ++i) v += lam[i] * b[i];
    for (int j = 0; j < m; ++j) {
      double w = 0.0;
      for (int i = 0; i < k; ++i) w += lam[i] * A[i][j];
      v -= box.mid(j) * w - box.radius(j) * std::abs(w);
    }
    return v;
  };

  double bestv = std::numeric_limits<double>::infinity();
  std::vector<double> bestl(k, 0.0);
  detail::walk_simplex(k, 1e-2, [&](const std::vector<double>& lam) {
    double v = value(lam);
    if (v < bestv) {
      bestv = v;
      bestl = lam;
    }
  });
  // local refinement around the coarse minimum
  double step = 1e-3;
  for (int round = 0; round < 3; ++round) {
    std::vector<double> lam(k);
    std::vector<int> idx(k - 1, -10);
    if (k == 1) break;
    for (;;) {
      double sum = 0.0;
      bool okp = true;
      for (int i = 0; i < k - 1; ++i) {
        lam[i] = bestl[i] + idx[i] * step;
        if (lam[i] < 0.0) okp = false;
        sum += lam[i];
      }
      lam[k - 1] = 1.0 - sum;
      if (lam[k - 1] < 0.0) okp = false;
      if (okp) {
        double v = value(lam);
        if (v < bestv) {
          bestv = v;
          bestl = lam;
        }
      }
      int j = 0;
      while (j < k - 1 && ++idx[j] > 10) idx[j++] = -10;
      if (j == k - 1) break;
    }
    step *= 0.1;
  }
  return bestv;
}

// Lemma-2 dual functional for ball bounds: min of lambda.b + B tau over
// the normalized cone slice {lambda >= 0, tau >= 0, sum + tau = 1,
// ||A'lambda|| <= tau}.
inline double farkas_dual_min_ball(const std::vector<std::vector<double>>& A,
                                   const std::vector<double>& b, double B) {
  const int k = static_cast<int>(A.size());
  const int m = A.empty() ? 0 : static_cast<int>(A[0].size());
  auto admissible = [&](const std::vector<double>& lam, double tau) {
    double n2 = 0.0;
    for (int j = 0; j < m; ++j) {
      double w = 0.0;
      for (int i = 0; i < k; ++i) w += lam[i] * A[i][j];
      n2 += w * w;
    }
    return n2 <= tau * tau;
  };
  auto value = [&](const std::vector<double>& lam, double tau) {
    double v = B * tau;
    for (int i = 0; i < k; ++i) v += lam[i] * b[i];
    return v;
  };

  double bestv = std::numeric_limits<double>::infinity();
  std::vector<double> bestl(k, 0.0);
  double bestt = 1.0;
  detail::walk_simplex(k + 1, 1e-2, [&](const std::vector<double>& full) {
    std::vector<double> lam(full.begin(), full.begin() + k);
    double tau = full[k];
    if (!admissible(lam, tau)) return;
    double v = value(lam, tau);
    if (v < bestv) {
      bestv = v;
      bestl = lam;
      bestt = tau;
    }
  });
  double step = 1e-3;
  for (int round = 0; round < 3; ++round) {
    std::vector<double> lam(k);
    std::vector<int> idx(k, -10);
    for (;;) {
      double sum = 0.0;
      bool okp = true;
      for (int i = 0; i < k; ++i) {
        lam[i] = bestl[i] + idx[i] * step;
        if (lam[i] < 0.0) okp = false;
        sum += lam[i];
      }
      double tau = 1.0 - sum;
      if (tau < 0.0) okp = false;
      if (okp && admissible(lam, tau)) {
        double v = value(lam, tau);
        if (v < bestv) {
          bestv = v;
          bestl = lam;
          bestt = tau;
        }
      }
      int j = 0;
      while (j < k && ++idx[j] > 10) idx[j++] = -10;
      if (j == k) break;
    }
    step *= 0.1;
  }
  (void)bestt;
  return bestv;
}

struct farkas_verdicts {
  bool conclusive = false;
  bool agree = false;
  bool primal_feasible = false;
  double primal_margin = 0.0;
  double dual_min = 0.0;
};

// Two-route comparison with an inconclusive band around zero: both searches
// carry grid error, so near-degenerate instances answer "either".
inline farkas_verdicts farkas_agreement(
    const std::vector<std::vector<double>>& A, const std::vector<double>& b,
    const input_set& bounds, double tol = 1e-3) {
  farkas_verdicts out;
  auto primal = farkas_primal_feasible(A, b, bounds);
  out.primal_feasible = primal.feasible;
  out.primal_margin = primal.margin;
  out.dual_min = bounds.type == input_set::kind::ball
                     ? farkas_dual_min_ball(A, b, bounds.bound)
                     : farkas_dual_min_box(A, b, bounds);
  if (std::abs(out.primal_margin) <= tol || std::abs(out.dual_min) <= tol) {
    out.conclusive = false;
    out.agree = true;
    return out;
  }
  out.conclusive = true;
  out.agree = primal.feasible == (out.dual_min > 0.0);
  return out;
}

}  // namespace clbf
