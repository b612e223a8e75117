#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "clbf/controllers.hpp"
#include "fixtures.hpp"

using clbf::ball_descent_input;
using clbf::blended_law;
using clbf::box_qp_input;
using clbf::control_system;
using clbf::controller_error;
using clbf::expr;
using clbf::input_set;
using clbf::kleinman_lqr;
using clbf::lqr_error;

namespace {

Eigen::MatrixXd m1(double v) {
  Eigen::MatrixXd M(1, 1);
  M(0, 0) = v;
  return M;
}

double care_residual(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                     const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                     const Eigen::MatrixXd& P) {
  Eigen::MatrixXd Rinv = R.inverse();
  return (A.transpose() * P + P * A - P * B * Rinv * B.transpose() * P + Q)
      .cwiseAbs()
      .maxCoeff();
}

double abscissa(const Eigen::MatrixXd& M) {
  return Eigen::EigenSolver<Eigen::MatrixXd>(M, false)
      .eigenvalues()
      .real()
      .maxCoeff();
}

}  // namespace

TEST_CASE("riccati iteration matches scalar closed forms") {
  // x' = u, unit costs: P solves -P^2 + 1 = 0, gain equals P
  auto r = kleinman_lqr(m1(0.0), m1(1.0), m1(1.0), m1(1.0), m1(1.0));
  REQUIRE(r.P(0, 0) == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(r.K(0, 0) == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(r.residual <= 1e-9);

  // uncontrollable but already stable: plain Lyapunov solution, zero gain
  auto s = kleinman_lqr(m1(-1.0), m1(0.0), m1(1.0), m1(1.0), m1(0.0));
  REQUIRE(s.P(0, 0) == Catch::Approx(0.5).margin(1e-12));
  REQUIRE(s.K(0, 0) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("riccati iteration rejects bad setups") {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 2);
  Eigen::MatrixXd B = Eigen::MatrixXd::Ones(2, 1);
  Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(2, 2);
  Eigen::MatrixXd R1 = Eigen::MatrixXd::Identity(1, 1);

  CHECK_THROWS_AS(kleinman_lqr(A, B, Q, R1, Eigen::MatrixXd::Zero(1, 3)),
                  lqr_error);
  Eigen::MatrixXd Qbad = Q;
  Qbad(0, 1) = 0.3;
  CHECK_THROWS_AS(kleinman_lqr(A, B, Qbad, R1, Eigen::MatrixXd::Zero(1, 2)),
                  lqr_error);
  CHECK_THROWS_AS(kleinman_lqr(A, B, Q, m1(0.0), Eigen::MatrixXd::Zero(1, 2)),
                  lqr_error);
  // zero initial gain leaves an unstable plant unstabilized
  CHECK_THROWS_AS(kleinman_lqr(m1(1.0), m1(1.0), m1(1.0), m1(1.0), m1(0.0)),
                  lqr_error);
  // no gain can help when the input matrix vanishes
  CHECK_THROWS_AS(kleinman_lqr(m1(1.0), m1(0.0), m1(1.0), m1(1.0), m1(5.0)),
                  lqr_error);
}

TEST_CASE("riccati iteration solves the oscillatory three-state pair") {
  Eigen::MatrixXd A(3, 3), B(3, 2);
  A << -0.05, -57.9, 0.00919, 1710.0, 0.0, 314.0, -0.271, -314.0, 0.0;
  B << 0.05, 0.0, 1710.0, 0.0, 0.0, 1710.0;
  Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(3, 3);
  Eigen::MatrixXd R = Eigen::MatrixXd::Identity(2, 2);

  auto r = kleinman_lqr(A, B, Q, R, Eigen::MatrixXd::Zero(2, 3));
  REQUIRE(r.residual <= 1e-9);
  REQUIRE(care_residual(A, B, Q, R, r.P) <= 1e-9);
  REQUIRE(abscissa(A - B * r.K) < 0.0);

  Eigen::MatrixXd Pref(3, 3);
  Pref << 2.4921909317670857e-02, -2.4085425957877604e-04,
      -4.2189184989390402e-05, -2.4085425957877604e-04,
      5.9264590710853492e-04, 1.4018565068792760e-06,
      -4.2189184989390402e-05, 1.4018565068792760e-06,
      5.8505077873977898e-04;
  Eigen::MatrixXd Kref(2, 3);
  Kref << -0.4106146884138235, 1.0134124584426158, 0.00239506516751409,
      -0.0721435063318576, 0.00239717462676356, 1.000436831645022;
  REQUIRE((r.P - Pref).cwiseAbs().maxCoeff() < 1e-12);
  REQUIRE((r.K - Kref).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("riccati residuals close on random stable plants") {
  std::mt19937 rng(515151);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd A(3, 3), B(3, 2);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) A(i, j) = U(rng);
      for (int j = 0; j < 2; ++j) B(i, j) = U(rng);
    }
    A -= (abscissa(A) + 0.5) * Eigen::MatrixXd::Identity(3, 3);
    Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(3, 3);
    Eigen::MatrixXd R = Eigen::MatrixXd::Identity(2, 2);
    auto r = kleinman_lqr(A, B, Q, R, Eigen::MatrixXd::Zero(2, 3));
    CHECK(care_residual(A, B, Q, R, r.P) <= 1e-9);
    CHECK(abscissa(A - B * r.K) < 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r.P);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("riccati iteration reports when the tolerance is out of reach") {
  Eigen::MatrixXd A(3, 3), B(3, 2);
  A << -0.05, -57.9, 0.00919, 1710.0, 0.0, 314.0, -0.271, -314.0, 0.0;
  B << 0.05, 0.0, 1710.0, 0.0, 0.0, 1710.0;
  CHECK_THROWS_AS(
      kleinman_lqr(A, B, Eigen::MatrixXd::Identity(3, 3),
                   Eigen::MatrixXd::Identity(2, 2),
                   Eigen::MatrixXd::Zero(2, 3), 100, 0.0),
      lqr_error);
}

TEST_CASE("ball decrease law hits the scalar closed form") {
  auto u = ball_descent_input(0.0, {1.0}, 1.0, {0.5});
  REQUIRE(u.size() == 1);
  REQUIRE(u[0] == Catch::Approx(-1.0 / (1.0 + std::sqrt(2.0))).margin(1e-15));
}

TEST_CASE("ball decrease law edge behavior") {
  // no authority needed, none used
  auto u0 = ball_descent_input(-1.0, {0.0, 0.0}, 1.0, {0.0, 0.0});
  CHECK(u0[0] == 0.0);
  CHECK(u0[1] == 0.0);

  CHECK_THROWS_AS(ball_descent_input(0.5, {0.0}, 1.0, {0.1}),
                  controller_error);
  try {
    ball_descent_input(2.0, {1.0, 0.0}, 1.0, {0.25, -0.75});
    FAIL("expected a throw");
  } catch (const controller_error& e) {
    CHECK(e.state == std::vector<double>{0.25, -0.75});
  }

  // magnitude saturates toward the bound as the margin closes
  double q = 1.0 * std::sqrt(2.0);
  auto ub = ball_descent_input(q * (1.0 - 1e-9), {1.0, 1.0}, 1.0, {0.0});
  double nrm = std::hypot(ub[0], ub[1]);
  CHECK(nrm <= 1.0 + 1e-12);
  CHECK(nrm == Catch::Approx(1.0).margin(1e-4));
}

TEST_CASE("ball decrease law keeps its guarantees under fuzz") {
  std::mt19937 rng(907);
  std::uniform_real_distribution<double> U(-2.0, 2.0);
  std::uniform_real_distribution<double> U01(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    int m = 1 + static_cast<int>(rng() % 3);
    std::vector<double> b(m);
    double bn2 = 0.0;
    for (double& bj : b) {
      bj = U(rng);
      bn2 += bj * bj;
    }
    if (bn2 < 1e-6) continue;
    double ubar = 0.5 + 1.5 * U01(rng);
    double q = ubar * std::sqrt(bn2);
    double a = -2.0 * q + U01(rng) * q * 2.999;
    auto u = ball_descent_input(a, b, ubar, {});
    double un2 = 0.0, du = a;
    for (int j = 0; j < m; ++j) {
      un2 += u[j] * u[j];
      du += b[j] * u[j];
    }
    CHECK(std::sqrt(un2) <= ubar * (1.0 + 1e-12));
    CHECK(du <= 1e-10);
  }
}

TEST_CASE("box decrease program pins and feasibility") {
  input_set box;
  box.type = input_set::kind::box;
  box.lo = {-2.0};
  box.hi = {2.0};
  auto u = box_qp_input(0.0, {1.0}, box, 0.5, {});
  REQUIRE(u[0] == Catch::Approx(-0.5).margin(1e-12));

  // already satisfied at the midpoint: stay there
  auto um = box_qp_input(-1.0, {1.0}, box, 0.2, {});
  CHECK(um[0] == 0.0);

  CHECK_THROWS_AS(box_qp_input(0.0, {1.0}, box, 3.0, {1.0}), controller_error);
}

TEST_CASE("box decrease program clips and stays minimal") {
  input_set box;
  box.type = input_set::kind::box;
  box.lo = {-1.0, -1.0};
  box.hi = {1.0, 1.0};
  double a = 0.3, sigma = 0.4;
  std::vector<double> b = {1.0, 0.25};
  auto u = box_qp_input(a, b, box, sigma, {});
  double lhs = a + b[0] * u[0] + b[1] * u[1];
  CHECK(lhs <= -sigma + 1e-9);
  CHECK(u[0] >= -1.0);
  CHECK(u[1] >= -1.0);

  // brute-force the same program on a grid
  double best = 1e100;
  for (int i = 0; i <= 400; ++i)
    for (int j = 0; j <= 400; ++j) {
      double u1 = -1.0 + 2.0 * i / 400.0, u2 = -1.0 + 2.0 * j / 400.0;
      if (a + b[0] * u1 + b[1] * u2 > -sigma) continue;
      best = std::min(best, u1 * u1 + u2 * u2);
    }
  CHECK(u[0] * u[0] + u[1] * u[1] <= best + 2e-2);

  // nearly all the work lands on the strong axis, which saturates
  auto us = box_qp_input(0.0, {1.0, 1e-3}, box, 1.0005, {});
  CHECK(us[0] == Catch::Approx(-1.0).margin(1e-9));
  CHECK(0.0 + 1.0 * us[0] + 1e-3 * us[1] <= -1.0005 + 1e-9);
}

namespace {

blended_law toy_law(input_set::kind kind, double gain) {
  control_system sys;
  sys.n = 1;
  sys.m = 1;
  sys.f = {expr::lit(0.0)};
  sys.g = {{expr::lit(1.0)}};
  sys.domain = {clbf::interval{-3.0, 3.0}};
  sys.input.type = kind;
  if (kind == input_set::kind::ball) {
    sys.input.bound = 1.0;
  } else {
    sys.input.lo = {-2.0};
    sys.input.hi = {2.0};
  }
  sys.validate();

  auto h = expr::parse_infix("(x1^2)/4", 1);
  auto b = clbf::make_barrier({h}, 2.0, 1);
  auto V = expr::parse_infix("x1^2", 1);
  blended_law law;
  law.sys = sys;
  law.W = clbf::patched::build(b, V, 0.1, 0.5, true);
  law.K_fb = {{gain}};
  law.c = 1.0;
  return law;
}

}  // namespace

TEST_CASE("blended policy hands off between its regimes") {
  auto law = toy_law(input_set::kind::box, -0.3);

  // small state: pure linear feedback
  CHECK(law({0.5})[0] == Catch::Approx(-0.15).margin(1e-15));

  // far out: h = 1 there, slack = 2, so the program targets -1
  CHECK(law({2.0})[0] == Catch::Approx(-1.0).margin(1e-9));

  // continuity across both handoff edges
  double xe = std::sqrt(0.5);
  CHECK(std::abs(law({xe * (1 - 1e-7)})[0] - law({xe * (1 + 1e-7)})[0]) <
        1e-5);
  CHECK(std::abs(law({1.0 - 1e-7})[0] - law({1.0 + 1e-7})[0]) < 1e-5);

  auto ball = toy_law(input_set::kind::ball, -0.3);
  CHECK(ball({2.0})[0] ==
        Catch::Approx(-1.0 / (1.0 + std::sqrt(2.0))).margin(1e-12));
}

TEST_CASE("blended policy on the pendulum fixture stays admissible") {
  auto sys = fixtures::lens_system();
  auto b = fixtures::lens_barrier();
  auto V = expr::parse_infix("x1^2 + 2*x2^2", 2);
  blended_law law;
  law.sys = sys;
  law.W = clbf::patched::build(b, V, 0.012814877271582478, 0.5, true);
  law.K_fb = fixtures::lens_K_fb();
  law.c = fixtures::lens_c;

  std::mt19937 rng(33);
  std::uniform_real_distribution<double> Ux(-3.0, 3.0), Uy(-2.9, 3.9);
  int used = 0;
  for (int trial = 0; trial < 5000 && used < 400; ++trial) {
    std::vector<double> x = {Ux(rng), Uy(rng)};
    if (law.W.b.value(x) > 0.999) continue;
    ++used;
    auto u = law(x);
    REQUIRE(u.size() == 1);
    CHECK(std::abs(u[0]) <= 1.0 + 1e-9);
  }
  REQUIRE(used == 400);
}
