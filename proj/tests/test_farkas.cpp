#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "clbf/farkas.hpp"

using clbf::farkas_agreement;
using clbf::farkas_dual_min_ball;
using clbf::farkas_dual_min_box;
using clbf::farkas_primal_feasible;
using clbf::input_set;

namespace {

input_set sym_box(double r, int m) {
  input_set s;
  s.type = input_set::kind::box;
  s.lo.assign(m, -r);
  s.hi.assign(m, r);
  return s;
}

input_set ball(double B) {
  input_set s;
  s.type = input_set::kind::ball;
  s.bound = B;
  return s;
}

}  // namespace

TEST_CASE("primal oracle pins") {
  auto yes = farkas_primal_feasible({{0.0}}, {1.0}, sym_box(1.0, 1));
  CHECK(yes.feasible);
  CHECK(yes.margin == Catch::Approx(1.0).margin(1e-12));

  auto no = farkas_primal_feasible({{0.0}}, {-1.0}, sym_box(1.0, 1));
  CHECK_FALSE(no.feasible);
  CHECK(no.margin == Catch::Approx(-1.0).margin(1e-12));

  auto bl = farkas_primal_feasible({{1.0}}, {0.0}, ball(1.0));
  CHECK(bl.feasible);
  CHECK(bl.margin == Catch::Approx(1.0).margin(1e-9));
  CHECK(bl.u[0] == Catch::Approx(-1.0).margin(1e-9));
}

TEST_CASE("primal oracle refines into thin slabs") {
  // feasible interval (0.5025, 0.5045), far off the coarse grid
  auto r = farkas_primal_feasible({{1.0}, {-1.0}}, {0.5045, -0.5025},
                                  sym_box(2.0, 1));
  CHECK(r.feasible);
  CHECK(r.u[0] == Catch::Approx(0.5035).margin(2e-4));
}

TEST_CASE("dual minimizer pins") {
  // premises force tau >= 1/2, so the minimum sits at lambda = tau = 1/2
  CHECK(farkas_dual_min_ball({{1.0}}, {0.0}, 1.0) ==
        Catch::Approx(0.5).margin(1e-6));
  CHECK(farkas_dual_min_ball({{1.0}}, {-3.0}, 1.0) ==
        Catch::Approx(-1.0).margin(1e-6));

  CHECK(farkas_dual_min_box({{1.0}}, {0.0}, sym_box(2.0, 1)) ==
        Catch::Approx(2.0).margin(1e-12));
  CHECK(farkas_dual_min_box({{1.0}, {-1.0}}, {-0.5, -0.5}, sym_box(2.0, 1)) ==
        Catch::Approx(-0.5).margin(1e-6));
}

TEST_CASE("routes agree on handmade instances") {
  auto a = farkas_agreement({{1.0}, {-1.0}}, {-0.5, -0.5}, sym_box(2.0, 1));
  CHECK(a.conclusive);
  CHECK(a.agree);
  CHECK_FALSE(a.primal_feasible);

  auto b = farkas_agreement({{1.0}}, {0.0}, ball(1.0));
  CHECK(b.conclusive);
  CHECK(b.agree);
  CHECK(b.primal_feasible);

  auto c = farkas_agreement({{1.0, 0.5}, {-0.5, 1.0}}, {1.0, 1.0},
                            sym_box(2.0, 2));
  CHECK(c.agree);
  CHECK(c.primal_feasible);  // u = 0 works
}

TEST_CASE("box-route equivalence under fuzz") {
  std::mt19937 rng(424242);
  std::uniform_real_distribution<double> E(-2.0, 2.0);
  std::uniform_real_distribution<double> R(0.5, 2.0);
  int conclusive = 0;
  for (int trial = 0; trial < 300; ++trial) {
    int k = 1 + static_cast<int>(rng() % 3);
    int m = 1 + static_cast<int>(rng() % 2);
    std::vector<std::vector<double>> A(k, std::vector<double>(m));
    std::vector<double> b(k);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < m; ++j) A[i][j] = E(rng);
      b[i] = E(rng);
    }
    input_set box;
    box.type = input_set::kind::box;
    for (int j = 0; j < m; ++j) {
      box.lo.push_back(-R(rng));
      box.hi.push_back(R(rng));
    }
    auto res = farkas_agreement(A, b, box);
    if (res.conclusive) ++conclusive;
    INFO("trial " << trial << " primal margin " << res.primal_margin
                  << " dual min " << res.dual_min);
    REQUIRE(res.agree);
  }
  CHECK(conclusive > 240);
}

TEST_CASE("ball-route equivalence under fuzz") {
  std::mt19937 rng(31337);
  std::uniform_real_distribution<double> E(-2.0, 2.0);
  std::uniform_real_distribution<double> R(0.5, 2.0);
  int conclusive = 0;
  for (int trial = 0; trial < 300; ++trial) {
    int k = 1 + static_cast<int>(rng() % 3);
    int m = 1 + static_cast<int>(rng() % 2);
    std::vector<std::vector<double>> A(k, std::vector<double>(m));
    std::vector<double> b(k);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < m; ++j) A[i][j] = E(rng);
      b[i] = E(rng);
    }
    auto res = farkas_agreement(A, b, ball(R(rng)));
    if (res.conclusive) ++conclusive;
    INFO("trial " << trial << " primal margin " << res.primal_margin
                  << " dual min " << res.dual_min);
    REQUIRE(res.agree);
  }
  CHECK(conclusive > 240);
}
