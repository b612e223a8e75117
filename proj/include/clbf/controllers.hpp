#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "clbf/certificates.hpp"
#include "clbf/system.hpp"

namespace clbf {

struct controller_error : std::runtime_error {
  std::vector<double> state;
  controller_error(const std::string& what, std::vector<double> x)
      : std::runtime_error(what), state(std::move(x)) {}
};

struct lqr_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct lqr_result {
  Eigen::MatrixXd P;
  Eigen::MatrixXd K;  // u = -K x stabilizes; K = R^-1 B' P
  int iters = 0;
  double residual = 0.0;
};

namespace detail {

// A' P + P A = -S by vectorization; fine at these sizes.
inline Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& A,
                                      const Eigen::MatrixXd& S) {
  const int n = static_cast<int>(A.rows());
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n * n, n * n);
  Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  // vec(A' P + P A) = (I (x) A' + A' (x) I) vec(P), column-major vec
  for (int j = 0; j < n; ++j) M.block(j * n, j * n, n, n) += A.transpose();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M.block(i * n, j * n, n, n) += A(j, i) * I;
  Eigen::VectorXd s(n * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) s(j * n + i) = -S(i, j);
  Eigen::VectorXd p = M.fullPivLu().solve(s);
  Eigen::MatrixXd P(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) P(i, j) = p(j * n + i);
  return 0.5 * (P + P.transpose());
}

inline double spectral_abscissa(const Eigen::MatrixXd& A) {
  return Eigen::EigenSolver<Eigen::MatrixXd>(A, false)
      .eigenvalues()
      .real()
      .maxCoeff();
}

}  // namespace detail

// Newton-type Riccati iteration: alternate Lyapunov solves with gain updates,
// starting from a stabilizing gain.
inline lqr_result kleinman_lqr(const Eigen::MatrixXd& A,
                               const Eigen::MatrixXd& B,
                               const Eigen::MatrixXd& Q,
                               const Eigen::MatrixXd& R,
                               const Eigen::MatrixXd& K0, int max_iters = 100,
                               double tol = 1e-9) {
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.cols());
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n ||
      R.rows() != m || R.cols() != m || K0.rows() != m || K0.cols() != n)
    throw lqr_error("inconsistent matrix dimensions");
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw lqr_error("state cost must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> res(R);
  if (res.eigenvalues().minCoeff() <= 0.0)
    throw lqr_error("input cost must be positive definite");
  if (detail::spectral_abscissa(A - B * K0) >= 0.0)
    throw lqr_error("initial gain does not stabilize the linearization");

  Eigen::MatrixXd Rinv = R.llt().solve(Eigen::MatrixXd::Identity(m, m));
  Eigen::MatrixXd K = K0, P;
  double best = std::numeric_limits<double>::infinity();
  int worse_streak = 0;
  lqr_result out;
  for (int it = 1; it <= max_iters; ++it) {
    Eigen::MatrixXd Ak = A - B * K;
    P = detail::solve_lyapunov(Ak, Q + K.transpose() * R * K);
    K = Rinv * B.transpose() * P;
    double r = (A.transpose() * P + P * A -
                P * B * Rinv * B.transpose() * P + Q)
                   .cwiseAbs()
                   .maxCoeff();
    out.iters = it;
    out.residual = r;
    if (r <= tol) {
      out.P = P;
      out.K = K;
      return out;
    }
    if (r >= best) {
      if (++worse_streak >= 5)
        throw lqr_error("Riccati iteration stalled at residual " +
                        std::to_string(r));
    } else {
      best = r;
      worse_streak = 0;
    }
  }
  throw lqr_error("Riccati iteration did not converge, residual " +
                  std::to_string(out.residual));
}

// Pointwise norm-bounded decrease law for a ball input set. Given the drift
// component a and input row b of the derivative of the scalar being pushed
// down, returns a u with ||u|| <= ubar and a + b.u <= 0, shrinking smoothly
// to zero control where none is needed.
inline std::vector<double> ball_descent_input(double a,
                                              const std::vector<double>& b,
                                              double ubar,
                                              const std::vector<double>& at_x) {
  double bn2 = 0.0;
  for (double bj : b) bn2 += bj * bj;
  std::vector<double> u(b.size(), 0.0);
  if (bn2 == 0.0) {
    if (a > 0.0)
      throw controller_error("drift is positive where the input has no authority",
                             at_x);
    return u;
  }
  double bn = std::sqrt(bn2);
  double q = ubar * bn;
  if (a >= q)
    throw controller_error("required decrease exceeds the input authority",
                           at_x);
  double k = (a + std::sqrt(a * a + q * q * q * q)) /
             (bn2 * (1.0 + std::sqrt(1.0 + q * q)));
  for (std::size_t j = 0; j < b.size(); ++j) u[j] = -k * b[j];
  return u;
}

// Nearest point of the box to its midpoint subject to b.u <= -(sigma + a)
// by a scalar dual search: u_j(l) = clip(mid_j - l b_j), with b.u(l)
// nonincreasing in l.
inline std::vector<double> box_qp_input(double a, const std::vector<double>& b,
                                        const input_set& box, double sigma,
                                        const std::vector<double>& at_x) {
  const int m = static_cast<int>(b.size());
  double target = -sigma - a;
  auto u_of = [&](double l) {
    std::vector<double> u(m);
    for (int j = 0; j < m; ++j)
      u[j] = std::clamp(box.mid(j) - l * b[j], box.lo[j], box.hi[j]);
    return u;
  };
  auto phi = [&](double l) {
    auto u = u_of(l);
    double s = 0.0;
    for (int j = 0; j < m; ++j) s += b[j] * u[j];
    return s;
  };
  double floor_val = 0.0;
  for (int j = 0; j < m; ++j)
    floor_val += b[j] > 0 ? b[j] * box.lo[j] : b[j] * box.hi[j];
  if (floor_val > target)
    throw controller_error("decrease constraint infeasible over the input box",
                           at_x);
  if (phi(0.0) <= target) return u_of(0.0);
  double lo = 0.0, hi = 1.0;
  int guard = 0;
  while (phi(hi) > target) {
    lo = hi;
    hi *= 2.0;
    if (++guard > 200)
      throw controller_error("dual search for the box law diverged", at_x);
  }
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (phi(mid) > target) lo = mid;
    else hi = mid;
  }
  return u_of(hi);
}

// Full state-feedback policy: linear gain near the origin, barrier-aware
// decrease law outside the handoff set, smoothstep blend in between.
struct blended_law {
  control_system sys;
  patched W;
  std::vector<std::vector<double>> K_fb;  // u = K_fb x near the origin
  double c = 1.0;

  std::vector<double> linear(const std::vector<double>& x) const {
    std::vector<double> u(sys.m, 0.0);
    for (int j = 0; j < sys.m; ++j)
      for (int i = 0; i < sys.n; ++i) u[j] += K_fb[j][i] * x[i];
    return u;
  }

  std::vector<double> outer(const std::vector<double>& x) const {
    std::vector<double> gw;
    W.value_and_grad(x, gw);
    double a = 0.0;
    std::vector<double> b(sys.m, 0.0);
    for (int i = 0; i < sys.n; ++i) {
      a += gw[i] * sys.f[i].eval(x);
      for (int j = 0; j < sys.m; ++j) b[j] += gw[i] * sys.g[i][j].eval(x);
    }
    if (sys.input.type == input_set::kind::ball)
      return ball_descent_input(a, b, sys.input.bound, x);
    double slack = -a;
    for (int j = 0; j < sys.m; ++j)
      slack += sys.input.radius(j) * std::abs(b[j]) - sys.input.mid(j) * b[j];
    if (slack <= 0.0)
      throw controller_error("no admissible input preserves the decrease", x);
    return box_qp_input(a, b, sys.input, 0.5 * slack, x);
  }

  std::vector<double> operator()(const std::vector<double>& x) const {
    double V = W.V.eval(x);
    if (V <= 0.5 * c) return linear(x);
    if (V >= c) return outer(x);
    double t = (V - 0.5 * c) / (0.5 * c);
    double s = t * t * (3.0 - 2.0 * t);
    auto ui = linear(x);
    auto uo = outer(x);
    for (std::size_t j = 0; j < ui.size(); ++j)
      ui[j] = (1.0 - s) * ui[j] + s * uo[j];
    return ui;
  }
};

}  // namespace clbf
