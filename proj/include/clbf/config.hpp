#pragma once

#include <json.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "clbf/certificates.hpp"
#include "clbf/controllers.hpp"
#include "clbf/expr.hpp"
#include "clbf/system.hpp"

namespace clbf {

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct project_config {
  std::string name;
  control_system sys;
  std::vector<expr> constraints;
  double tau = 1.0;

  std::vector<std::vector<double>> P;
  std::vector<std::vector<double>> K_fb;  // u = K_fb x near the origin
  double c = 1.0;
  expr V;

  std::vector<double> eps_schedule;

  double delta = 1e-4;
  long budget = 10000000;
  int workers = 4;
  double bnb_rel_tol = 1e-6;
  std::vector<std::vector<double>> bnb_hints;
  bool crosscheck_unreduced = false;
  bool emit_smt2 = false;

  double horizon = 10.0;
  double dt = 1e-3;
  int sim_count = 0;
  std::uint64_t seed = 0;

  std::string out_dir;
  std::string raw;  // file bytes, hashed into the manifest
};

namespace detail {

inline const nlohmann::json& req(const nlohmann::json& j,
                                 const std::string& key) {
  auto it = j.find(key);
  if (it == j.end()) throw config_error("config: missing field '" + key + "'");
  return *it;
}

inline std::vector<double> dvec(const nlohmann::json& j,
                                const std::string& what) {
  if (!j.is_array()) throw config_error("config: '" + what + "' must be an array");
  std::vector<double> v;
  for (const auto& e : j) {
    if (!e.is_number()) throw config_error("config: '" + what + "' must be numeric");
    v.push_back(e.get<double>());
  }
  return v;
}

inline std::vector<std::vector<double>> dmat(const nlohmann::json& j,
                                            const std::string& what) {
  if (!j.is_array() || j.empty())
    throw config_error("config: '" + what + "' must be a nonempty matrix");
  std::vector<std::vector<double>> m;
  for (const auto& row : j) m.push_back(dvec(row, what));
  for (const auto& row : m)
    if (row.size() != m.front().size())
      throw config_error("config: '" + what + "' rows have unequal lengths");
  return m;
}

inline Eigen::MatrixXd to_eigen(const std::vector<std::vector<double>>& m) {
  Eigen::MatrixXd M(m.size(), m.front().size());
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j) M(i, j) = m[i][j];
  return M;
}

inline expr parse_field(const nlohmann::json& j, int n,
                        const std::string& what) {
  if (!j.is_string())
    throw config_error("config: '" + what + "' must be an expression string");
  try {
    return expr::parse_infix(j.get<std::string>(), n);
  } catch (const expr_error& e) {
    throw config_error("config: '" + what + "': " + e.what());
  }
}

}  // namespace detail

inline project_config load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();

  project_config pc;
  pc.raw = ss.str();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(pc.raw);
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("config: not valid JSON: ") + e.what());
  }

  using detail::dmat;
  using detail::dvec;
  using detail::parse_field;
  using detail::req;

  pc.name = j.value("name", std::string("unnamed"));

  const auto& sysj = req(j, "system");
  int n = req(sysj, "state_dim").get<int>();
  int m = req(sysj, "input_dim").get<int>();
  if (n <= 0 || m <= 0) throw config_error("config: dimensions must be positive");
  pc.sys.n = n;
  pc.sys.m = m;
  const auto& fj = req(sysj, "f");
  if (!fj.is_array() || static_cast<int>(fj.size()) != n)
    throw config_error("config: 'f' must list one expression per state");
  for (const auto& e : fj) pc.sys.f.push_back(parse_field(e, n, "f"));
  const auto& gj = req(sysj, "g");
  if (!gj.is_array() || static_cast<int>(gj.size()) != n)
    throw config_error("config: 'g' must have one row per state");
  for (const auto& row : gj) {
    if (!row.is_array() || static_cast<int>(row.size()) != m)
      throw config_error("config: 'g' rows must have one entry per input");
    std::vector<expr> r;
    for (const auto& e : row) r.push_back(parse_field(e, n, "g"));
    pc.sys.g.push_back(std::move(r));
  }
  const auto& domj = req(sysj, "domain");
  auto dlo = dvec(req(domj, "lower"), "domain.lower");
  auto dhi = dvec(req(domj, "upper"), "domain.upper");
  if (static_cast<int>(dlo.size()) != n || static_cast<int>(dhi.size()) != n)
    throw config_error("config: domain bounds must match state_dim");
  for (int i = 0; i < n; ++i) pc.sys.domain.push_back(interval{dlo[i], dhi[i]});

  const auto& ibj = req(j, "input_bounds");
  std::string kind = req(ibj, "type").get<std::string>();
  if (kind == "ball") {
    pc.sys.input.type = input_set::kind::ball;
    pc.sys.input.bound = req(ibj, "bound").get<double>();
  } else if (kind == "box") {
    pc.sys.input.type = input_set::kind::box;
    pc.sys.input.lo = dvec(req(ibj, "lower"), "input_bounds.lower");
    pc.sys.input.hi = dvec(req(ibj, "upper"), "input_bounds.upper");
    if (static_cast<int>(pc.sys.input.lo.size()) != m ||
        static_cast<int>(pc.sys.input.hi.size()) != m)
      throw config_error("config: input bounds must match input_dim");
  } else {
    throw config_error("config: input_bounds.type must be 'ball' or 'box'");
  }
  try {
    pc.sys.validate();
  } catch (const system_error& e) {
    throw config_error(std::string("config: ") + e.what());
  }

  const auto& cj = req(j, "constraints");
  if (!cj.is_array() || cj.empty())
    throw config_error("config: 'constraints' must be a nonempty array");
  for (const auto& e : cj)
    pc.constraints.push_back(parse_field(e, n, "constraints"));

  pc.tau = req(j, "tau").get<double>();
  if (!(pc.tau > 0.0)) throw config_error("config: 'tau' must be positive");

  const auto& clfj = req(j, "clf");
  if (clfj.contains("lqr")) {
    const auto& lj = clfj["lqr"];
    auto Q = detail::to_eigen(dmat(req(lj, "Q"), "clf.lqr.Q"));
    auto R = detail::to_eigen(dmat(req(lj, "R"), "clf.lqr.R"));
    auto K0 = detail::to_eigen(dmat(req(lj, "K0"), "clf.lqr.K0"));
    pc.c = req(lj, "c").get<double>();
    Eigen::MatrixXd A(n, n), B(n, m);
    std::vector<double> origin(n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) A(i, k) = pc.sys.f[i].diff(k).eval(origin);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < m; ++k) B(i, k) = pc.sys.g[i][k].eval(origin);
    lqr_result lr;
    try {
      lr = kleinman_lqr(A, B, Q, R, K0);
    } catch (const lqr_error& e) {
      throw config_error(std::string("config: clf.lqr: ") + e.what());
    }
    pc.P.assign(n, std::vector<double>(n));
    pc.K_fb.assign(m, std::vector<double>(n));
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) pc.P[i][k] = lr.P(i, k);
    for (int i = 0; i < m; ++i)
      for (int k = 0; k < n; ++k) pc.K_fb[i][k] = -lr.K(i, k);
  } else {
    pc.P = dmat(req(clfj, "P"), "clf.P");
    pc.K_fb = dmat(req(clfj, "K"), "clf.K");
    pc.c = req(clfj, "c").get<double>();
  }
  if (static_cast<int>(pc.P.size()) != n || static_cast<int>(pc.P[0].size()) != n)
    throw config_error("config: clf.P must be state_dim x state_dim");
  if (static_cast<int>(pc.K_fb.size()) != m ||
      static_cast<int>(pc.K_fb[0].size()) != n)
    throw config_error("config: clf.K must be input_dim x state_dim");
  if (!(pc.c > 0.0)) throw config_error("config: clf.c must be positive");
  if (clfj.contains("V")) {
    pc.V = parse_field(clfj["V"], n, "clf.V");
  } else {
    try {
      pc.V = quadratic_form(pc.P, n);
    } catch (const certificate_error& e) {
      throw config_error(std::string("config: ") + e.what());
    }
  }

  const auto& pj = req(j, "patch");
  pc.eps_schedule = dvec(req(pj, "epsilon_schedule"), "patch.epsilon_schedule");
  if (pc.eps_schedule.empty())
    throw config_error("config: epsilon schedule must not be empty");
  for (double e : pc.eps_schedule)
    if (!(e > 0.0 && e < 1.0))
      throw config_error("config: epsilon candidates must lie in (0,1)");

  if (j.contains("verifier")) {
    const auto& vj = j["verifier"];
    pc.delta = vj.value("delta", pc.delta);
    pc.budget = vj.value("budget", pc.budget);
    pc.workers = vj.value("workers", pc.workers);
    pc.bnb_rel_tol = vj.value("bnb_rel_tol", pc.bnb_rel_tol);
    pc.crosscheck_unreduced =
        vj.value("crosscheck_unreduced", pc.crosscheck_unreduced);
    pc.emit_smt2 = vj.value("emit_smt2", pc.emit_smt2);
    if (vj.contains("bnb_hints")) {
      for (const auto& h : vj["bnb_hints"]) {
        auto pt = dvec(h, "verifier.bnb_hints");
        if (static_cast<int>(pt.size()) != n)
          throw config_error("config: hint dimension mismatch");
        pc.bnb_hints.push_back(std::move(pt));
      }
    }
    if (!(pc.delta > 0.0)) throw config_error("config: delta must be positive");
    if (pc.workers < 1) throw config_error("config: workers must be >= 1");
  }

  if (j.contains("simulate")) {
    const auto& sj = j["simulate"];
    pc.horizon = sj.value("horizon", pc.horizon);
    pc.dt = sj.value("dt", pc.dt);
    pc.sim_count = sj.value("count", pc.sim_count);
    pc.seed = sj.value("seed", pc.seed);
    if (!(pc.dt > 0.0) || !(pc.horizon > 0.0))
      throw config_error("config: simulate horizon and dt must be positive");
    if (pc.sim_count < 0) throw config_error("config: simulate count must be >= 0");
  }

  pc.out_dir = j.contains("outputs")
                   ? req(j["outputs"], "directory").get<std::string>()
                   : "out/" + pc.name;
  return pc;
}

inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace clbf
