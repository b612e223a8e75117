#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "clbf/expr.hpp"
#include "clbf/system.hpp"

using clbf::expr;
using clbf::interval;

namespace {

double fd_partial(const expr& e, std::vector<double> x, int i, double h = 1e-5) {
  x[i] += h;
  double up = e.eval(x);
  x[i] -= 2 * h;
  double dn = e.eval(x);
  return (up - dn) / (2 * h);
}

std::mt19937 rng(987651);

expr random_expr(int arity, int depth) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 9);
  std::uniform_real_distribution<double> cval(-2.0, 2.0);
  std::uniform_int_distribution<int> vix(0, arity - 1);
  switch (pick(rng)) {
    case 0: return expr::lit(cval(rng));
    case 1: return expr::var(vix(rng), arity);
    case 2: return random_expr(arity, depth - 1) + random_expr(arity, depth - 1);
    case 3: return random_expr(arity, depth - 1) - random_expr(arity, depth - 1);
    case 4: return random_expr(arity, depth - 1) * random_expr(arity, depth - 1);
    case 5: return expr::sin(random_expr(arity, depth - 1));
    case 6: return expr::cos(random_expr(arity, depth - 1));
    case 7: return expr::square(random_expr(arity, depth - 1));
    case 8: return expr::exp(expr::lit(0.25) * random_expr(arity, depth - 1));
    default: return expr::pow(random_expr(arity, depth - 1), 3);
  }
}

}  // namespace

TEST_CASE("infix parsing and evaluation") {
  expr e = expr::parse_infix("x1^2 + 2*x2^2", 2);
  REQUIRE(e.eval({3.0, 5.0}) == Catch::Approx(59.0));
  REQUIRE(expr::parse_infix("1+2*3^2", 1).eval({0.0}) == Catch::Approx(19.0));
  REQUIRE(expr::parse_infix("-x1^2", 1).eval({2.0}) == Catch::Approx(-4.0));
  REQUIRE(expr::parse_infix("2*-x1", 1).eval({3.0}) == Catch::Approx(-6.0));
  REQUIRE(expr::parse_infix("(x1+1)/(x1-1)", 1).eval({3.0}) == Catch::Approx(2.0));
  REQUIRE(expr::parse_infix("sin(x1)*cos(x2)", 2).eval({0.5, 0.25}) ==
          Catch::Approx(std::sin(0.5) * std::cos(0.25)));
  REQUIRE(expr::parse_infix("min(x1, max(x2, 0.5))", 2).eval({2.0, -1.0}) ==
          Catch::Approx(0.5));
  REQUIRE(expr::parse_infix("sqrt(abs(x1))", 1).eval({-9.0}) == Catch::Approx(3.0));
  REQUIRE(expr::parse_infix("exp(log(x1))", 1).eval({2.5}) == Catch::Approx(2.5));
}

TEST_CASE("parse errors are loud") {
  REQUIRE_THROWS_AS(expr::parse_infix("x3 + 1", 2), clbf::expr_error);
  REQUIRE_THROWS_AS(expr::parse_infix("foo(x1)", 1), clbf::expr_error);
  REQUIRE_THROWS_AS(expr::parse_infix("x1 + ", 1), clbf::expr_error);
  REQUIRE_THROWS_AS(expr::parse_infix("x1 ) 2", 1), clbf::expr_error);
  REQUIRE_THROWS_AS(expr::parse_infix("x1 ^ x2", 2), clbf::expr_error);
  REQUIRE_THROWS_AS(expr::parse_infix("sin(x1, x2)", 2), clbf::expr_error);
}

TEST_CASE("power literal becomes a square node") {
  expr e = expr::parse_infix("x1^2", 1);
  REQUIRE(e.kind() == clbf::op::square);
  expr c = expr::parse_infix("x1^3", 1);
  REQUIRE(c.kind() == clbf::op::pow_i);
  REQUIRE(c.exponent() == 3);
  REQUIRE(expr::parse_infix("x1^0", 1).is_const(1.0));
}

TEST_CASE("domain violations carry a node path") {
  expr e = expr::parse_infix("exp(log(x1))", 1);
  try {
    e.eval({0.0});
    FAIL("expected eval_error");
  } catch (const clbf::eval_error& err) {
    REQUIRE(err.path == "exp/log");
  }
  try {
    expr::parse_infix("1/(x1-1)", 1).eval({1.0});
    FAIL("expected eval_error");
  } catch (const clbf::eval_error& err) {
    REQUIRE(err.path == "div");
    REQUIRE(std::string(err.what()).find("division by zero") !=
            std::string::npos);
  }
}

TEST_CASE("interval evaluation reports domain trouble") {
  clbf::hyperbox box{interval(-1.0, 1.0)};
  auto r = expr::parse_infix("log(x1)", 1).eval_interval(box);
  REQUIRE_FALSE(r.domain_ok);
  auto q = expr::parse_infix("1/x1", 1).eval_interval(box);
  REQUIRE_FALSE(q.domain_ok);
  auto s = expr::parse_infix("sqrt(x1)", 1).eval_interval(box);
  REQUIRE_FALSE(s.domain_ok);
  auto ok = expr::parse_infix("exp(x1)+x1^2", 1).eval_interval(box);
  REQUIRE(ok.domain_ok);
  REQUIRE(ok.v.contains(std::exp(0.5) + 0.25));
}

TEST_CASE("interval evaluation encloses point evaluation") {
  for (int it = 0; it < 500; ++it) {
    expr e = random_expr(2, 3);
    clbf::hyperbox box{interval(-1.5, 1.5), interval(-1.5, 1.5)};
    std::uniform_real_distribution<double> d(-1.5, 1.5);
    std::vector<double> x{d(rng), d(rng)};
    auto r = e.eval_interval(box);
    REQUIRE(r.domain_ok);
    double v = e.eval(x);
    REQUIRE(r.v.contains(v));
  }
}

TEST_CASE("differentiation") {
  expr e = expr::parse_infix("x1^2 + 2*x2^2", 2);
  REQUIRE(e.diff(0).simplified().sexpr() == "(* 2 x0)");
  REQUIRE(e.diff(1).eval({1.0, 3.0}) == Catch::Approx(12.0));

  expr n = expr::norm2({expr::var(0, 2), expr::var(1, 2)});
  REQUIRE(n.diff(0).eval({3.0, 4.0}) == Catch::Approx(0.6));

  REQUIRE_THROWS_AS(expr::abs(expr::var(0, 1)).diff(0), clbf::expr_error);
  REQUIRE_THROWS_AS(expr::min(expr::var(0, 1), expr::lit(1.0)).diff(0),
                    clbf::expr_error);
  REQUIRE_THROWS_AS(expr::max(expr::var(0, 1), expr::lit(1.0)).diff(0),
                    clbf::expr_error);
}

TEST_CASE("symbolic gradients match finite differences") {
  std::vector<std::string> sources{
      "exp(sin(x1) + x2^2/4)",
      "0.7*(x1 - 3.02) + 1",
      "2.8*(((x1 - 2.33)^2 + (x2 - 0.99)^2)/17.64 - 1) + 1",
      "log(2 + cos(x1*x2))",
      "sqrt(1 + x1^2 + x2^2)",
      "(x1 + x2)/(3 + x1^2)"};
  std::vector<std::vector<double>> pts{{0.3, 0.7}, {-1.1, 0.4}, {2.0, 1.5}};
  for (const auto& s : sources) {
    expr e = expr::parse_infix(s, 2);
    for (int i = 0; i < 2; ++i) {
      expr de = e.diff(i).simplified();
      for (const auto& p : pts) {
        double sym = de.eval(p);
        double num = fd_partial(e, p, i);
        REQUIRE(sym == Catch::Approx(num).epsilon(1e-6).margin(1e-9));
      }
    }
  }
}

TEST_CASE("constant folding at construction") {
  REQUIRE(expr::parse_infix("2 + 3*4", 1).is_const(14.0));
  REQUIRE((expr::lit(0.0) * expr::sin(expr::var(0, 1)) + expr::var(0, 1))
              .sexpr() == "x0");
  REQUIRE((expr::var(0, 2) * expr::lit(1.0)).sexpr() == "x0");
  // folds that would manufacture an out-of-domain value stay symbolic
  REQUIRE(expr::log(expr::lit(-1.0)).kind() == clbf::op::log_);
  REQUIRE((expr::lit(1.0) / expr::lit(0.0)).kind() == clbf::op::div);
}

TEST_CASE("simplified is idempotent and value-preserving") {
  for (int it = 0; it < 200; ++it) {
    expr e = random_expr(2, 3);
    expr s = e.simplified();
    REQUIRE(s.simplified().sexpr() == s.sexpr());
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    std::vector<double> x{d(rng), d(rng)};
    REQUIRE(s.eval(x) == Catch::Approx(e.eval(x)).margin(1e-12));
  }
}

TEST_CASE("sexpr round trip") {
  std::vector<std::string> sources{
      "x1^2 + 2*x2^2", "sin(x1)*cos(x2) - exp(x1/8)", "0.1*x1 + 0.2",
      "sqrt(1 + x1^2)", "min(x1, max(x2, 0.5)) + abs(x1)", "x1^5 - x2^3"};
  for (const auto& s : sources) {
    expr e = expr::parse_infix(s, 2);
    std::string ser = e.sexpr();
    expr back = expr::parse_sexpr(ser, 2);
    REQUIRE(back.sexpr() == ser);
  }
  for (int it = 0; it < 200; ++it) {
    expr e = random_expr(3, 4);
    std::string ser = e.sexpr();
    REQUIRE(expr::parse_sexpr(ser, 3).sexpr() == ser);
  }
  // 17 significant digits survive the trip
  expr c = expr::lit(0.1);
  REQUIRE(expr::parse_sexpr(c.sexpr(), 1).value() == 0.1);
  expr c2 = expr::lit(39.0 + 1124.0 / 65536.0);
  REQUIRE(expr::parse_sexpr(c2.sexpr(), 1).value() == 39.0 + 1124.0 / 65536.0);
}

TEST_CASE("arity bookkeeping") {
  expr a = expr::var(0, 2), b = expr::var(0, 3);
  REQUIRE_THROWS_AS(a + b, clbf::expr_error);
  REQUIRE_THROWS_AS(expr::var(2, 2), clbf::expr_error);
  REQUIRE((expr::lit(2.0) + expr::lit(3.0)).arity() == 0);

  expr e = expr::parse_infix("x1*x2", 2);
  expr lifted = e.with_arity(4);
  REQUIRE(lifted.arity() == 4);
  REQUIRE(lifted.eval({2.0, 5.0, 9.0, 9.0}) == Catch::Approx(10.0));
  expr aux = expr::var(3, 4);
  REQUIRE((lifted * aux).eval({2.0, 5.0, 0.0, 0.5}) == Catch::Approx(5.0));
}
