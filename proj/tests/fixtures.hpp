#pragma once

#include <string>
#include <vector>

#include "clbf/certificates.hpp"
#include "clbf/system.hpp"

namespace fixtures {

// Planar pendulum-type plant with a five-piece convex barrier family and a
// diagonal quadratic. Used across suites; the JSON config mirrors this.
inline std::vector<std::string> lens_terms() {
  return {
      "2.7989183529663589768*(x2 - 4) + 1",
      "0.7*(x1 - 3.0215926535897931) + 1",
      "2.7989183529663589768*(((x1 - 2.3311493805321036)^2 + "
      "(x2 - 0.9861471560571729)^2)/17.64 - 1) + 1",
      "8*(((x1 - 0.8)^2 + (x2 - 4)^2)/23.5 - 1) + 1",
      "3*(x2 - 1.2*x1 - 1.86) + 1"};
}

inline constexpr double lens_tau = 4.5;

inline clbf::control_system lens_system() {
  clbf::control_system sys;
  sys.n = 2;
  sys.m = 1;
  sys.f = {clbf::expr::lit(0.0), clbf::expr::parse_infix("-sin(x1)", 2)};
  sys.g = {{clbf::expr::lit(1.0)}, {clbf::expr::lit(-1.0)}};
  sys.domain = {clbf::interval(-3.141592653589793, 3.141592653589793),
                clbf::interval(-3.0, 4.0)};
  sys.input.type = clbf::input_set::kind::ball;
  sys.input.bound = 1.0;
  sys.validate();
  return sys;
}

inline clbf::barrier lens_barrier() {
  std::vector<clbf::expr> terms;
  for (const auto& s : lens_terms())
    terms.push_back(clbf::expr::parse_infix(s, 2));
  return clbf::make_barrier(std::move(terms), lens_tau, 2);
}

inline std::vector<std::vector<double>> lens_P() { return {{1.0, 0.0}, {0.0, 2.0}}; }
inline std::vector<std::vector<double>> lens_K_fb() { return {{-0.566, 1.132}}; }
inline constexpr double lens_c = 1.0;

// Third-order polynomial plant with a two-axis box input; feedback comes from
// a Riccati solve in the tests that need it.
inline clbf::control_system poly3_system() {
  clbf::control_system sys;
  sys.n = 3;
  sys.m = 2;
  sys.f = {clbf::expr::parse_infix("-0.05*x1 - 57.9*x2 + 0.00919*x3", 3),
           clbf::expr::parse_infix("1710*x1 + 314*x3", 3),
           clbf::expr::parse_infix("-0.271*x1 - 314*x2", 3)};
  sys.g = {{clbf::expr::parse_infix("0.05 - 57.9*x2", 3),
            clbf::expr::parse_infix("-57.9*x3", 3)},
           {clbf::expr::parse_infix("1710*(1 + x1)", 3), clbf::expr::lit(0.0)},
           {clbf::expr::lit(0.0), clbf::expr::parse_infix("1710*(1 + x1)", 3)}};
  sys.domain = {clbf::interval(-2.0, 2.0), clbf::interval(-2.0, 2.0),
                clbf::interval(-2.0, 2.0)};
  sys.input.type = clbf::input_set::kind::box;
  sys.input.lo = {-2.0, -2.0};
  sys.input.hi = {2.0, 2.0};
  sys.validate();
  return sys;
}

inline std::vector<std::string> poly3_terms() {
  return {"3*(x1 - 0.2) + 0.5*(x2^2 + x3^2) + 1",
          "4.5*(-x1 - 0.8) + 0.5*(x2^2 + x3^2) + 1",
          "2*(((x2 - 0.001)^2 + x3^2)/1.44 - 1) + 1"};
}

inline constexpr double poly3_tau = 3.1;

inline clbf::barrier poly3_barrier() {
  std::vector<clbf::expr> terms;
  for (const auto& s : poly3_terms())
    terms.push_back(clbf::expr::parse_infix(s, 3));
  return clbf::make_barrier(std::move(terms), poly3_tau, 3);
}

inline constexpr double poly3_c = 4e-4;

}  // namespace fixtures
