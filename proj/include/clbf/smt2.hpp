#pragma once

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "clbf/verifier.hpp"

namespace clbf {

namespace detail {

// Plain decimal (no exponent form), SMT-LIB friendly. Negative values are
// rendered by the caller through unary minus.
inline std::string smt2_decimal(double v) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  std::string s = buf;
  if (s.find('e') == std::string::npos && s.find('E') == std::string::npos) {
    if (s.find('.') == std::string::npos) s += ".0";
    return s;
  }
  // exponent form: reprint as a fixed decimal and trim
  std::snprintf(buf, sizeof(buf), "%.40f", v);
  s = buf;
  auto last = s.find_last_not_of('0');
  if (s[last] == '.') ++last;
  return s.substr(0, last + 1);
}

struct smt2_builder {
  std::ostringstream aux_decls;
  std::ostringstream aux_defs;
  int next_aux = 0;

  std::string num(double v) {
    if (v < 0.0) return "(- " + smt2_decimal(-v) + ")";
    return smt2_decimal(v);
  }

  std::string fresh(const std::string& defining, bool nonneg) {
    std::string y = "y" + std::to_string(next_aux++);
    aux_decls << "(declare-fun " << y << " () Real)\n";
    if (nonneg) aux_defs << "(assert (>= " << y << " 0.0))\n";
    aux_defs << "(assert (= (* " << y << " " << y << ") " << defining
             << "))\n";
    return y;
  }

  std::string emit(const expr& e) {
    switch (e.kind()) {
      case op::constant:
        return num(e.value());
      case op::variable:
        return "x" + std::to_string(e.index());
      case op::add:
        return "(+ " + emit(e.kids()[0]) + " " + emit(e.kids()[1]) + ")";
      case op::sub:
        return "(- " + emit(e.kids()[0]) + " " + emit(e.kids()[1]) + ")";
      case op::mul:
        return "(* " + emit(e.kids()[0]) + " " + emit(e.kids()[1]) + ")";
      case op::div:
        return "(/ " + emit(e.kids()[0]) + " " + emit(e.kids()[1]) + ")";
      case op::square: {
        auto a = emit(e.kids()[0]);
        return "(* " + a + " " + a + ")";
      }
      case op::pow_i: {
        int k = e.exponent();
        if (k == 0) return "1.0";
        auto a = emit(e.kids()[0]);
        int p = k < 0 ? -k : k;
        std::string prod = a;
        for (int i = 1; i < p; ++i) prod = "(* " + prod + " " + a + ")";
        if (k < 0) return "(/ 1.0 " + prod + ")";
        return prod;
      }
      case op::sqrt_:
        return fresh(emit(e.kids()[0]), true);
      case op::exp_:
        return "(exp " + emit(e.kids()[0]) + ")";
      case op::log_:
        return "(log " + emit(e.kids()[0]) + ")";
      case op::sin_:
        return "(sin " + emit(e.kids()[0]) + ")";
      case op::cos_:
        return "(cos " + emit(e.kids()[0]) + ")";
      case op::abs_: {
        auto a = emit(e.kids()[0]);
        return "(ite (>= " + a + " 0.0) " + a + " (- " + a + "))";
      }
      case op::min_: {
        auto a = emit(e.kids()[0]), b = emit(e.kids()[1]);
        return "(ite (<= " + a + " " + b + ") " + a + " " + b + ")";
      }
      case op::max_: {
        auto a = emit(e.kids()[0]), b = emit(e.kids()[1]);
        return "(ite (>= " + a + " " + b + ") " + a + " " + b + ")";
      }
      case op::norm2: {
        std::string sum;
        for (const auto& kid : e.kids()) {
          auto a = emit(kid);
          std::string sq = "(* " + a + " " + a + ")";
          sum = sum.empty() ? sq : "(+ " + sum + " " + sq + ")";
        }
        return fresh(sum, true);
      }
    }
    return "0.0";
  }
};

}  // namespace detail

// One decision problem per file: domain and premises asserted, conclusion
// negated, so `unsat` certifies the forall claim.
inline std::string to_smt2(const condition& c, const std::string& name) {
  detail::smt2_builder bld;
  std::vector<std::string> les, eqs;
  for (const auto& e : c.le) les.push_back(bld.emit(e));
  for (const auto& e : c.eq) eqs.push_back(bld.emit(e));
  std::string concl = bld.emit(c.concl);

  std::ostringstream os;
  os << "; " << name << "\n";
  os << "(set-logic QF_NRA)\n";
  for (int i = 0; i < c.arity; ++i)
    os << "(declare-fun x" << i << " () Real)\n";
  os << bld.aux_decls.str();
  for (int i = 0; i < c.arity; ++i) {
    os << "(assert (<= " << bld.num(c.domain[i].lo) << " x" << i << "))\n";
    os << "(assert (<= x" << i << " " << bld.num(c.domain[i].hi) << "))\n";
  }
  os << bld.aux_defs.str();
  for (const auto& s : les) os << "(assert (<= " << s << " 0.0))\n";
  for (const auto& s : eqs) os << "(assert (= " << s << " 0.0))\n";
  os << "(assert (>= " << concl << " 0.0))\n";
  os << "(check-sat)\n(exit)\n";
  return os.str();
}

}  // namespace clbf
