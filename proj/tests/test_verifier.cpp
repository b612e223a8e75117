#include <catch2/catch_amalgamated.hpp>

#include "clbf/verifier.hpp"

using clbf::condition;
using clbf::expr;
using clbf::interval;
using clbf::refute_options;
using clbf::verdict;

namespace {

condition simple(const std::string& concl_lt_zero, clbf::hyperbox dom,
                 int arity) {
  condition c;
  c.arity = arity;
  c.domain = std::move(dom);
  c.concl = expr::parse_infix(concl_lt_zero, arity);
  return c;
}

}  // namespace

TEST_CASE("bounded square stays under two") {
  auto c = simple("x1^2 - 2", {interval(0.0, 1.0)}, 1);
  auto r = clbf::refute_forall(c, {});
  REQUIRE(r.result == verdict::verified);
  REQUIRE(r.witness.empty());
  REQUIRE(r.boxes >= 1);
}

TEST_CASE("half line violation is found with a usable witness") {
  auto c = simple("x1 - 0.5", {interval(0.0, 1.0)}, 1);
  refute_options opt;
  auto r = clbf::refute_forall(c, opt);
  REQUIRE(r.result == verdict::falsified);
  REQUIRE(r.witness.size() == 1);
  REQUIRE(r.witness[0] >= 0.5 - 1e-3);
  REQUIRE(clbf::replay_witness(c, r.witness, opt.delta));
}

TEST_CASE("equality premise narrows the search to a point") {
  condition c;
  c.arity = 1;
  c.domain = {interval(-1.0, 1.0)};
  c.eq = {expr::parse_infix("x1", 1)};
  c.concl = expr::parse_infix("x1^2 - 0.001", 1);
  auto r = clbf::refute_forall(c, {});
  REQUIRE(r.result == verdict::verified);
}

TEST_CASE("infeasible premises verify vacuously") {
  condition c;
  c.arity = 1;
  c.domain = {interval(0.0, 1.0)};
  c.le = {expr::parse_infix("x1 + 1", 1)};  // x1 <= -1 never holds here
  c.concl = expr::parse_infix("0*x1 + 1", 1);  // would be false everywhere
  auto r = clbf::refute_forall(c, {});
  REQUIRE(r.result == verdict::verified);
}

TEST_CASE("premise-restricted violation reports a premise-satisfying witness") {
  condition c;
  c.arity = 2;
  c.domain = {interval(-1.0, 1.0), interval(-1.0, 1.0)};
  c.le = {expr::parse_infix("x2", 2)};            // x2 <= 0
  c.concl = expr::parse_infix("x1 - x2 - 1", 2);  // fails when x1 near 1, x2 near 0
  refute_options opt;
  auto r = clbf::refute_forall(c, opt);
  REQUIRE(r.result == verdict::falsified);
  REQUIRE(r.witness[1] <= opt.delta);
  REQUIRE(r.witness[0] - r.witness[1] - 1 >= -opt.delta);
  REQUIRE(clbf::replay_witness(c, r.witness, opt.delta));
}

TEST_CASE("dependency gap below the witness slack gives unknown") {
  // x1 - x1 - 1e-7 is identically -1e-7 < 0, but the interval form keeps a
  // residual of the box width, and with delta = 1e-9 the centre point is not
  // close enough to zero to count as a counterexample.
  condition c;
  c.arity = 1;
  c.domain = {interval(0.0, 0.01)};
  c.concl = expr::parse_infix("x1 - x1 - 0.0000001", 1);
  refute_options opt;
  opt.delta = 1e-9;
  auto r = clbf::refute_forall(c, opt);
  REQUIRE(r.result == verdict::unknown);
}

TEST_CASE("budget exhaustion gives unknown") {
  auto c = simple("x1 - x1 - 0.0000001", {interval(0.0, 1.0)}, 1);
  refute_options opt;
  opt.budget = 10;
  auto r = clbf::refute_forall(c, opt);
  REQUIRE(r.result == verdict::unknown);
  REQUIRE(r.boxes <= 11);
}

TEST_CASE("verdicts agree across worker counts") {
  std::vector<condition> cases;
  cases.push_back(simple("x1^2 - 2", {interval(0.0, 1.0)}, 1));
  cases.push_back(simple("x1 - 0.5", {interval(0.0, 1.0)}, 1));
  {
    condition c;
    c.arity = 2;
    c.domain = {interval(-2.0, 2.0), interval(-2.0, 2.0)};
    c.le = {expr::parse_infix("x1^2 + x2^2 - 1", 2)};
    c.concl = expr::parse_infix("sin(x1)*cos(x2) - 0.9", 2);
    cases.push_back(c);  // max of sin*cos on the disc is ~0.73, so verified
  }
  for (const auto& c : cases) {
    refute_options o1, o4, o16;
    o1.workers = 1;
    o4.workers = 4;
    o16.workers = 16;
    auto r1 = clbf::refute_forall(c, o1);
    auto r4 = clbf::refute_forall(c, o4);
    auto r16 = clbf::refute_forall(c, o16);
    REQUIRE(r1.result == r4.result);
    REQUIRE(r4.result == r16.result);
  }
}

TEST_CASE("domain trouble in the conclusion cannot verify") {
  // sqrt of a negative over part of the box: interval pass cannot discharge,
  // and the point pass cannot produce a witness either.
  auto c = simple("sqrt(x1) - 10", {interval(-0.01, 1.0)}, 1);
  auto r = clbf::refute_forall(c, {});
  REQUIRE(r.result == verdict::unknown);
}

TEST_CASE("witness replay rejects junk") {
  auto c = simple("x1 - 0.5", {interval(0.0, 1.0)}, 1);
  REQUIRE_FALSE(clbf::replay_witness(c, {0.2}, 1e-4));   // no violation there
  REQUIRE_FALSE(clbf::replay_witness(c, {5.0}, 1e-4));   // outside the domain
  REQUIRE_FALSE(clbf::replay_witness(c, {0.1, 0.2}, 1e-4));  // wrong arity
  REQUIRE(clbf::replay_witness(c, {0.9}, 1e-4));
}
