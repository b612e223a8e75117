#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "clbf/certificates.hpp"
#include "clbf/checks.hpp"
#include "clbf/config.hpp"
#include "clbf/controllers.hpp"
#include "clbf/simulator.hpp"
#include "clbf/smt2.hpp"

namespace clbf {

struct pipeline_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct check_report {
  std::string name;
  verdict v = verdict::unknown;
  std::string note;             // failing case label or blocking reason
  std::vector<double> witness;  // counterexample point, when falsified
};

struct verify_outcome {
  std::vector<check_report> checks;  // cbf, local, clf, compat, scale
  double level_upper = 0.0;  // certified max of V over the kept region
  double alpha = 0.0;
  double eps = 0.0;
  bool scale_ok = false;
  // consistency probe of the band check in its original variables; advisory
  // unless it finds a witness the reduced encoding missed
  std::string crosscheck_case;
  verdict crosscheck = verdict::unknown;
  bool crosscheck_ran = false;
  int exit_code = 2;
};

namespace detail {

inline std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string hash_hex(const std::string& bytes) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(bytes)));
  return buf;
}

inline void write_text_atomic(const std::filesystem::path& p,
                              const std::string& body) {
  std::filesystem::create_directories(p.parent_path());
  std::filesystem::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw pipeline_error("cannot write " + p.string());
    os << body;
  }
  std::filesystem::rename(tmp, p);
}

inline double finite_or_zero(double v) { return std::isfinite(v) ? v : 0.0; }

}  // namespace detail

inline std::filesystem::path manifest_path(const project_config& cfg) {
  return std::filesystem::path(cfg.out_dir) / "manifest.json";
}

inline nlohmann::json read_manifest(const project_config& cfg) {
  std::ifstream is(manifest_path(cfg), std::ios::binary);
  if (!is)
    throw pipeline_error("no manifest under " + cfg.out_dir +
                         "; run verify first");
  nlohmann::json m = nlohmann::json::parse(is, nullptr, false);
  if (m.is_discarded())
    throw pipeline_error("manifest under " + cfg.out_dir + " is not JSON");
  return m;
}

inline void write_manifest(const project_config& cfg, const nlohmann::json& m) {
  detail::write_text_atomic(manifest_path(cfg), m.dump(2) + "\n");
}

// The stored hash ties every later stage to the exact config bytes it was
// verified against.
inline void require_same_config(const project_config& cfg,
                                const nlohmann::json& m) {
  if (!m.contains("config_hash") ||
      m["config_hash"].get<std::string>() != detail::hash_hex(cfg.raw))
    throw pipeline_error(
        "manifest was produced from a different config; re-run verify");
}

inline verify_outcome run_verify(const project_config& cfg) {
  verify_outcome out;
  barrier b = make_barrier(cfg.constraints, cfg.tau, cfg.sys.n);

  refute_options ropt;
  ropt.delta = cfg.delta;
  ropt.budget = static_cast<std::uint64_t>(cfg.budget);
  ropt.workers = cfg.workers;

  auto from_cases = [](const std::string& nm, const check_result& r) {
    check_report rep;
    rep.name = nm;
    rep.v = r.v;
    rep.note = r.note;
    for (std::size_t i = 0; i < r.runs.size(); ++i)
      if (r.runs[i].result == verdict::falsified) rep.witness = r.runs[i].witness;
    return rep;
  };

  check_result cbf = run_cases(build_cbf_cases(cfg.sys, b), ropt);
  out.checks.push_back(from_cases("cbf", cbf));

  std::vector<std::vector<double>> K(cfg.K_fb.size());
  for (std::size_t i = 0; i < K.size(); ++i) {
    K[i].resize(cfg.K_fb[i].size());
    for (std::size_t j = 0; j < K[i].size(); ++j) K[i][j] = -cfg.K_fb[i][j];
  }
  local_options lopt;
  lopt.refute = ropt;
  local_result loc = check_local(cfg.sys, cfg.P, K, cfg.c, lopt);
  {
    check_report rep;
    rep.name = "local";
    rep.v = loc.v;
    rep.note = loc.failing;
    rep.witness = loc.witness;
    out.checks.push_back(std::move(rep));
  }

  bnb_options bopt;
  bopt.rel_tol = cfg.bnb_rel_tol;
  bopt.hints = cfg.bnb_hints;

  check_report scale_rep{"scale", verdict::unknown, "", {}};
  check_report clf_rep{"clf", verdict::unknown, "blocked: no certified scale", {}};
  check_report compat_rep{"compat", verdict::unknown,
                          "blocked: no certified scale", {}};
  try {
    // the certified maximum is a property of V and the kept region alone, so
    // one search serves the whole band-width schedule
    scale_result sc =
        scale_to_sublevel(cfg.V, b, cfg.sys.domain,
                          cfg.eps_schedule.empty() ? 0.5 : cfg.eps_schedule[0],
                          bopt);
    out.level_upper = sc.level_max;
    out.scale_ok = true;
    scale_rep.v = verdict::verified;

    epsilon_result er = find_epsilon(cfg.eps_schedule, [&](double e) {
      double a = (1.0 - e) / out.level_upper;
      expr Vs = (expr::lit(a) * cfg.V).simplified();
      check_result clf =
          run_cases(build_clf_cases(cfg.sys, Vs, a * cfg.c, b), ropt);
      check_result compat =
          run_cases(build_compat_cases(cfg.sys, Vs, b, e, false), ropt);
      clf_rep = from_cases("clf", clf);
      compat_rep = from_cases("compat", compat);
      out.alpha = a;
      out.eps = e;
      return clf.v == verdict::verified && compat.v == verdict::verified;
    });
    if (!er.ok && clf_rep.v == verdict::unknown && !er.reason.empty() &&
        clf_rep.note.empty())
      clf_rep.note = er.reason;

    if (er.ok && cfg.crosscheck_unreduced) {
      // Re-run the band check in its original variables at the accepted band
      // width. The reduced form above is the one that decides; this probe
      // exists to catch a reduction bug, so only a counterexample here can
      // change the outcome. An exhausted budget on the higher-dimensional
      // encoding stays advisory.
      expr Vs = (expr::lit(out.alpha) * cfg.V).simplified();
      std::vector<labeled_condition> probe;
      for (auto& lc : build_compat_cases(cfg.sys, Vs, b, out.eps, true))
        if (lc.name.size() > 10 &&
            lc.name.rfind("_unreduced") == lc.name.size() - 10)
          probe.push_back(std::move(lc));
      if (!probe.empty()) {
        out.crosscheck_ran = true;
        out.crosscheck_case = probe.front().name;
        check_result cr = run_cases(std::move(probe), ropt);
        out.crosscheck = cr.v;
        if (cr.v == verdict::falsified) {
          compat_rep = from_cases("compat", cr);
          compat_rep.note = "reduced and original encodings disagree: " +
                            compat_rep.note;
        } else {
          compat_rep.note = "crosscheck " + std::string(to_string(cr.v));
        }
      }
    }
  } catch (const certificate_error& ex) {
    scale_rep.note = ex.what();
  }
  out.checks.push_back(std::move(clf_rep));
  out.checks.push_back(std::move(compat_rep));
  out.checks.push_back(std::move(scale_rep));

  bool any_fal = false, any_unk = false;
  for (const auto& r : out.checks) {
    if (r.v == verdict::falsified) any_fal = true;
    if (r.v == verdict::unknown) any_unk = true;
  }
  out.exit_code = any_fal ? 1 : (any_unk ? 2 : 0);
  return out;
}

inline void print_verify_report(const verify_outcome& out, std::ostream& os) {
  for (const auto& r : out.checks) {
    os << "check " << r.name << ": " << to_string(r.v);
    if (!r.note.empty()) os << " [" << r.note << "]";
    os << "\n";
    if (!r.witness.empty()) {
      os << "  witness:";
      for (double x : r.witness) os << " " << detail::g17(x);
      os << "\n";
    }
  }
  if (out.scale_ok) {
    os << "level_upper: " << detail::g17(out.level_upper) << "\n";
    os << "epsilon: " << detail::g17(out.eps) << "\n";
    os << "alpha: " << detail::g17(out.alpha) << "\n";
  }
  os << "verdict: "
     << (out.exit_code == 0 ? "Verified"
                            : (out.exit_code == 1 ? "Falsified" : "Unknown"))
     << "\n";
}

inline int cmd_verify(const project_config& cfg, std::ostream& os) {
  auto t0 = std::chrono::steady_clock::now();
  verify_outcome out = run_verify(cfg);
  double secs = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  print_verify_report(out, os);

  nlohmann::json m;
  m["config_hash"] = detail::hash_hex(cfg.raw);
  m["name"] = cfg.name;
  nlohmann::json v;
  for (const auto& r : out.checks) v["verdicts"][r.name] = to_string(r.v);
  v["epsilon"] = out.eps;
  v["alpha"] = out.alpha;
  v["level_upper"] = out.level_upper;
  v["exit_code"] = out.exit_code;
  if (out.crosscheck_ran) {
    v["crosscheck"]["case"] = out.crosscheck_case;
    v["crosscheck"]["verdict"] = to_string(out.crosscheck);
  }
  nlohmann::json w = nullptr;
  for (const auto& r : out.checks)
    if (!r.witness.empty()) w = r.witness;
  v["witness"] = w;
  m["verify"] = v;
  m["stats"]["verify_seconds"] = secs;
  write_manifest(cfg, m);
  return out.exit_code;
}

namespace detail {

inline void require_verified(const nlohmann::json& m) {
  if (!m.contains("verify") || m["verify"].value("exit_code", 2) != 0)
    throw pipeline_error(
        "the stored verification did not end Verified; nothing to build on");
}

inline nlohmann::json input_json(const input_set& u) {
  nlohmann::json j;
  if (u.type == input_set::kind::ball) {
    j["type"] = "ball";
    j["bound"] = u.bound;
  } else {
    j["type"] = "box";
    j["lower"] = u.lo;
    j["upper"] = u.hi;
  }
  return j;
}

// Two-axis sample sheet; any further state dimensions are pinned to zero.
inline std::string grid_csv(const std::function<double(
                                const std::vector<double>&)>& field,
                            const hyperbox& domain, int nx, int ny) {
  std::ostringstream os;
  os << "# x1 " << g17(domain[0].lo) << " " << g17(domain[0].hi) << " " << nx
     << "\n";
  os << "# x2 " << g17(domain[1].lo) << " " << g17(domain[1].hi) << " " << ny
     << "\n";
  std::vector<double> x(domain.size(), 0.0);
  for (int i = 0; i < nx; ++i) {
    x[0] = domain[0].lo +
           (domain[0].hi - domain[0].lo) * static_cast<double>(i) / (nx - 1);
    std::string line;
    for (int j = 0; j < ny; ++j) {
      x[1] = domain[1].lo +
             (domain[1].hi - domain[1].lo) * static_cast<double>(j) / (ny - 1);
      if (j) line += ",";
      line += g17(field(x));
    }
    os << line << "\n";
  }
  return os.str();
}

}  // namespace detail

inline int cmd_build(const project_config& cfg, std::ostream& os,
                     int grid_n = 400) {
  auto t0 = std::chrono::steady_clock::now();
  nlohmann::json m = read_manifest(cfg);
  require_same_config(cfg, m);
  detail::require_verified(m);

  double alpha = m["verify"]["alpha"].get<double>();
  double eps = m["verify"]["epsilon"].get<double>();
  barrier b = make_barrier(cfg.constraints, cfg.tau, cfg.sys.n);
  patched W = patched::build(b, cfg.V, alpha, eps, true);

  nlohmann::json cert;
  cert["name"] = cfg.name;
  cert["alpha"] = alpha;
  cert["epsilon"] = eps;
  cert["tau"] = cfg.tau;
  cert["c"] = cfg.c;
  cert["P"] = cfg.P;
  cert["K"] = cfg.K_fb;
  std::vector<std::string> terms;
  for (const auto& t : cfg.constraints) terms.push_back(t.sexpr());
  cert["constraints"] = terms;
  cert["V"] = cfg.V.sexpr();
  cert["input"] = detail::input_json(cfg.sys.input);
  {
    std::vector<double> lo, hi;
    for (const auto& d : cfg.sys.domain) {
      lo.push_back(d.lo);
      hi.push_back(d.hi);
    }
    cert["domain"]["lower"] = lo;
    cert["domain"]["upper"] = hi;
  }

  std::filesystem::path dir(cfg.out_dir);
  detail::write_text_atomic(dir / "certificate.json", cert.dump(2) + "\n");
  detail::write_text_atomic(
      dir / "w_grid.csv",
      detail::grid_csv([&](const std::vector<double>& x) { return W.value(x); },
                       cfg.sys.domain, grid_n, grid_n));
  detail::write_text_atomic(
      dir / "h_grid.csv",
      detail::grid_csv([&](const std::vector<double>& x) { return b.value(x); },
                       cfg.sys.domain, grid_n, grid_n));

  double secs = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  m["build"]["outputs"] = {"certificate.json", "w_grid.csv", "h_grid.csv"};
  m["build"]["grid"] = grid_n;
  m["stats"]["build_seconds"] = secs;
  write_manifest(cfg, m);
  os << "build: certificate.json, w_grid.csv, h_grid.csv under " << cfg.out_dir
     << "\n";
  return 0;
}

inline int cmd_simulate(const project_config& cfg, std::ostream& os) {
  auto t0 = std::chrono::steady_clock::now();
  nlohmann::json m = read_manifest(cfg);
  require_same_config(cfg, m);
  detail::require_verified(m);
  if (!m.contains("build"))
    throw pipeline_error("no build block in the manifest; run build first");

  double alpha = m["verify"]["alpha"].get<double>();
  double eps = m["verify"]["epsilon"].get<double>();
  barrier b = make_barrier(cfg.constraints, cfg.tau, cfg.sys.n);
  patched W = patched::build(b, cfg.V, alpha, eps, true);
  blended_law law{cfg.sys, W, cfg.K_fb, cfg.c};

  scalar_field h_of = [&b](const std::vector<double>& x) { return b.value(x); };
  auto starts = sample_in_C(h_of, cfg.sys.domain, cfg.sim_count, cfg.seed);

  std::filesystem::path dir(cfg.out_dir);
  std::filesystem::create_directories(dir / "traj");
  batch_summary sum = batch_report(
      cfg.sys, [&law](const std::vector<double>& x) { return law(x); }, starts,
      cfg.horizon, cfg.dt, h_of, &W, cfg.workers, (dir / "traj").string());

  nlohmann::json s;
  s["count"] = static_cast<int>(starts.size());
  s["worst_max_h"] = detail::finite_or_zero(sum.worst_max_h);
  s["worst_u_norm2"] = detail::finite_or_zero(sum.worst_u_norm2);
  s["worst_abs_u"] = sum.worst_abs_u;
  s["worst_final_norm"] = detail::finite_or_zero(sum.worst_final_norm);
  s["total_w_violations"] = sum.total_w_violations;
  s["domain_exits"] = sum.domain_exits;
  s["errors"] = sum.errors;
  nlohmann::json per = nlohmann::json::array();
  for (const auto& st : sum.per_traj) {
    nlohmann::json t;
    t["index"] = st.index;
    t["ok"] = st.ok;
    if (!st.ok) {
      t["error"] = st.error;
      t["error_time"] = st.error_time;
    }
    t["left_domain"] = st.left_domain;
    t["max_h"] = detail::finite_or_zero(st.max_h);
    t["max_u_norm2"] = detail::finite_or_zero(st.max_u_norm2);
    t["final_norm"] = detail::finite_or_zero(st.final_norm);
    t["worst_w_step"] = detail::finite_or_zero(st.worst_w_step);
    t["w_violations"] = st.w_violations;
    per.push_back(std::move(t));
  }
  s["per_traj"] = per;
  detail::write_text_atomic(dir / "sim_summary.json", s.dump(2) + "\n");

  double secs = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  m["simulate"]["outputs"] = {"sim_summary.json", "traj/"};
  nlohmann::json brief = s;
  brief.erase("per_traj");
  m["simulate"]["summary"] = brief;
  m["stats"]["sim_seconds"] = secs;
  write_manifest(cfg, m);

  os << "simulate: " << starts.size() << " runs, worst max h "
     << detail::g17(detail::finite_or_zero(sum.worst_max_h)) << ", errors "
     << sum.errors << ", domain exits " << sum.domain_exits << "\n";
  return sum.errors > 0 ? 4 : 0;
}

inline int cmd_emit_smt2(const project_config& cfg, std::ostream& os) {
  barrier b = make_barrier(cfg.constraints, cfg.tau, cfg.sys.n);

  double alpha = 0.0, eps = cfg.eps_schedule.empty() ? 0.5 : cfg.eps_schedule[0];
  bool have = false;
  try {
    nlohmann::json m = read_manifest(cfg);
    require_same_config(cfg, m);
    if (m.contains("verify") && m["verify"].value("exit_code", 2) == 0) {
      alpha = m["verify"]["alpha"].get<double>();
      eps = m["verify"]["epsilon"].get<double>();
      have = true;
    }
  } catch (const pipeline_error&) {
  }
  if (!have) {
    bnb_options bopt;
    bopt.rel_tol = cfg.bnb_rel_tol;
    bopt.hints = cfg.bnb_hints;
    scale_result sc = scale_to_sublevel(cfg.V, b, cfg.sys.domain, eps, bopt);
    alpha = (1.0 - eps) / sc.level_max;
  }

  expr Vs = (expr::lit(alpha) * cfg.V).simplified();
  std::vector<labeled_condition> cases = build_cbf_cases(cfg.sys, b);
  for (auto& lc : build_clf_cases(cfg.sys, Vs, alpha * cfg.c, b))
    cases.push_back(std::move(lc));
  for (auto& lc : build_compat_cases(cfg.sys, Vs, b, eps, false))
    cases.push_back(std::move(lc));
  std::vector<std::vector<double>> K(cfg.K_fb.size());
  for (std::size_t i = 0; i < K.size(); ++i) {
    K[i].resize(cfg.K_fb[i].size());
    for (std::size_t j = 0; j < K[i].size(); ++j) K[i][j] = -cfg.K_fb[i][j];
  }
  cases.push_back(build_local_outer(cfg.sys, cfg.P, K, cfg.c, 1e-5));

  std::filesystem::path dir = std::filesystem::path(cfg.out_dir) / "smt2";
  for (const auto& lc : cases)
    detail::write_text_atomic(dir / (lc.name + ".smt2"),
                              to_smt2(lc.cond, lc.name));
  os << "emit-smt2: " << cases.size() << " files under " << dir.string()
     << "\n";
  return 0;
}

}  // namespace clbf
