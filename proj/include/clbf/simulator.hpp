#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "clbf/certificates.hpp"
#include "clbf/controllers.hpp"
#include "clbf/system.hpp"

namespace clbf {

struct sim_error : std::runtime_error {
  double t = 0.0;
  std::vector<double> state;
  sim_error(const std::string& what, double when, std::vector<double> x)
      : std::runtime_error(what), t(when), state(std::move(x)) {}
};

using policy = std::function<std::vector<double>(const std::vector<double>&)>;
using scalar_field = std::function<double(const std::vector<double>&)>;

struct trajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  std::vector<std::vector<double>> inputs;
  std::vector<double> h_vals;
  std::vector<double> w_vals;
  bool left_domain = false;
};

// Fixed-step classical RK4 with the policy re-evaluated at every stage.
// Stops before logging any state that escapes the domain box.
inline trajectory simulate(const control_system& sys, const policy& kappa,
                           const std::vector<double>& x0, double T, double dt,
                           const scalar_field& h_of = {},
                           const scalar_field& w_of = {}) {
  if (dt <= 0.0) throw sim_error("step size must be positive", 0.0, x0);
  if (!sys.in_domain(x0)) throw sim_error("start outside the domain", 0.0, x0);
  auto steps = static_cast<long>(std::llround(T / dt));
  trajectory tr;
  tr.times.reserve(steps + 1);

  auto control = [&](const std::vector<double>& x, double t) {
    try {
      return kappa(x);
    } catch (const controller_error& e) {
      throw sim_error(std::string("controller failed: ") + e.what(), t,
                      e.state);
    }
  };
  auto log_state = [&](double t, const std::vector<double>& x,
                       const std::vector<double>& u) {
    tr.times.push_back(t);
    tr.states.push_back(x);
    tr.inputs.push_back(u);
    tr.h_vals.push_back(h_of ? h_of(x) : 0.0);
    tr.w_vals.push_back(w_of ? w_of(x) : 0.0);
  };

  std::vector<double> x = x0;
  for (long k = 0; k < steps; ++k) {
    double t = k * dt;
    auto u1 = control(x, t);
    log_state(t, x, u1);

    auto stage = [&](const std::vector<double>& base,
                     const std::vector<double>& dir, double scale) {
      std::vector<double> y(sys.n);
      for (int i = 0; i < sys.n; ++i) y[i] = base[i] + scale * dir[i];
      return y;
    };
    auto k1 = sys.xdot(x, u1);
    auto x2 = stage(x, k1, 0.5 * dt);
    auto k2 = sys.xdot(x2, control(x2, t));
    auto x3 = stage(x, k2, 0.5 * dt);
    auto k3 = sys.xdot(x3, control(x3, t));
    auto x4 = stage(x, k3, dt);
    auto k4 = sys.xdot(x4, control(x4, t));

    std::vector<double> xn(sys.n);
    for (int i = 0; i < sys.n; ++i)
      xn[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    if (!sys.in_domain(xn)) {
      tr.left_domain = true;
      return tr;
    }
    x = std::move(xn);
  }
  log_state(steps * dt, x, control(x, steps * dt));
  return tr;
}

// Uniform rejection sampling over {x in domain : h(x) <= 1 - margin}.
inline std::vector<std::vector<double>> sample_in_C(const scalar_field& h,
                                                    const hyperbox& domain,
                                                    int count,
                                                    std::uint64_t seed,
                                                    double margin = 1e-3) {
  std::vector<std::vector<double>> out;
  if (count <= 0) return out;
  std::mt19937_64 rng(seed);
  long attempts = 0;
  while (static_cast<int>(out.size()) < count) {
    std::vector<double> x(domain.size());
    for (std::size_t j = 0; j < domain.size(); ++j) {
      std::uniform_real_distribution<double> U(domain[j].lo, domain[j].hi);
      x[j] = U(rng);
    }
    ++attempts;
    if (h(x) <= 1.0 - margin) out.push_back(std::move(x));
    if (attempts >= 10000 &&
        static_cast<double>(out.size()) / attempts < 1e-4)
      throw std::runtime_error(
          "sampling the safe set: acceptance rate below 1e-4");
  }
  return out;
}

struct traj_stats {
  int index = 0;
  bool ok = true;
  std::string error;
  double error_time = 0.0;
  bool left_domain = false;
  double max_h = 0.0;
  double max_u_norm2 = 0.0;
  std::vector<double> max_abs_u;
  double final_norm = 0.0;
  double worst_w_step = -std::numeric_limits<double>::infinity();
  int w_violations = 0;
};

struct batch_summary {
  std::vector<traj_stats> per_traj;
  double worst_max_h = 0.0;
  double worst_u_norm2 = 0.0;
  std::vector<double> worst_abs_u;
  double worst_final_norm = 0.0;
  int total_w_violations = 0;
  int domain_exits = 0;
  int errors = 0;
};

namespace detail {

inline void print_g17(std::string& line, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  line += buf;
}

}  // namespace detail

inline void write_trajectory_csv(const trajectory& tr, int n, int m,
                                 std::ostream& os) {
  std::string line = "t";
  for (int i = 1; i <= n; ++i) line += ",x" + std::to_string(i);
  for (int j = 1; j <= m; ++j) line += ",u" + std::to_string(j);
  line += ",h,W\n";
  os << line;
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    line.clear();
    detail::print_g17(line, tr.times[k]);
    for (int i = 0; i < n; ++i) {
      line += ',';
      detail::print_g17(line, tr.states[k][i]);
    }
    for (int j = 0; j < m; ++j) {
      line += ',';
      detail::print_g17(line, tr.inputs[k][j]);
    }
    line += ',';
    detail::print_g17(line, tr.h_vals[k]);
    line += ',';
    detail::print_g17(line, tr.w_vals[k]);
    line += '\n';
    os << line;
  }
}

// Batch runner: independent trajectories on a small thread pool, stats and
// CSV bytes identical for any worker count.
inline batch_summary batch_report(const control_system& sys,
                                  const policy& kappa,
                                  const std::vector<std::vector<double>>& starts,
                                  double T, double dt,
                                  const scalar_field& h_of = {},
                                  const patched* W = nullptr,
                                  int workers = 1,
                                  const std::string& csv_dir = {}) {
  batch_summary sum;
  sum.per_traj.resize(starts.size());
  if (!csv_dir.empty()) std::filesystem::create_directories(csv_dir);

  scalar_field w_of;
  if (W) w_of = [W](const std::vector<double>& x) { return W->value(x); };

  auto run_one = [&](int idx) {
    traj_stats st;
    st.index = idx;
    st.max_abs_u.assign(sys.m, 0.0);
    trajectory tr;
    try {
      tr = simulate(sys, kappa, starts[idx], T, dt, h_of, w_of);
    } catch (const sim_error& e) {
      st.ok = false;
      st.error = e.what();
      st.error_time = e.t;
      sum.per_traj[idx] = std::move(st);
      return;
    }
    st.left_domain = tr.left_domain;
    for (std::size_t k = 0; k < tr.times.size(); ++k) {
      st.max_h = std::max(st.max_h, tr.h_vals[k]);
      double un2 = 0.0;
      for (int j = 0; j < sys.m; ++j) {
        double uj = tr.inputs[k][j];
        un2 += uj * uj;
        st.max_abs_u[j] = std::max(st.max_abs_u[j], std::abs(uj));
      }
      st.max_u_norm2 = std::max(st.max_u_norm2, std::sqrt(un2));
    }
    if (!tr.states.empty()) {
      double fn = 0.0;
      for (double xi : tr.states.back()) fn += xi * xi;
      st.final_norm = std::sqrt(fn);
    }
    if (W) {
      std::vector<double> gw;
      for (std::size_t k = 0; k + 1 < tr.times.size(); ++k) {
        double dW = tr.w_vals[k + 1] - tr.w_vals[k];
        st.worst_w_step = std::max(st.worst_w_step, dW);
        W->value_and_grad(tr.states[k], gw);
        auto xd = sys.xdot(tr.states[k], tr.inputs[k]);
        double gn = 0.0, xn = 0.0;
        for (int i = 0; i < sys.n; ++i) {
          gn += gw[i] * gw[i];
          xn += xd[i] * xd[i];
        }
        double lip = std::sqrt(gn) * std::sqrt(xn) + 1e-9;
        if (dW >= 10.0 * dt * dt * lip) ++st.w_violations;
      }
    }
    if (!csv_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof(name), "traj_%03d.csv", idx);
      std::ofstream os(std::filesystem::path(csv_dir) / name,
                       std::ios::binary);
      if (!os) {
        st.ok = false;
        st.error = "cannot write trajectory CSV";
      } else {
        write_trajectory_csv(tr, sys.n, sys.m, os);
      }
    }
    sum.per_traj[idx] = std::move(st);
  };

  int pool = std::max(1, workers);
  if (pool == 1) {
    for (std::size_t i = 0; i < starts.size(); ++i) run_one(static_cast<int>(i));
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> threads;
    for (int w = 0; w < pool; ++w)
      threads.emplace_back([&] {
        for (;;) {
          std::size_t i = next.fetch_add(1);
          if (i >= starts.size()) return;
          run_one(static_cast<int>(i));
        }
      });
    for (auto& th : threads) th.join();
  }

  sum.worst_abs_u.assign(sys.m, 0.0);
  for (const auto& st : sum.per_traj) {
    if (!st.ok) {
      ++sum.errors;
      continue;
    }
    sum.worst_max_h = std::max(sum.worst_max_h, st.max_h);
    sum.worst_u_norm2 = std::max(sum.worst_u_norm2, st.max_u_norm2);
    for (int j = 0; j < sys.m; ++j)
      sum.worst_abs_u[j] = std::max(sum.worst_abs_u[j], st.max_abs_u[j]);
    sum.worst_final_norm = std::max(sum.worst_final_norm, st.final_norm);
    sum.total_w_violations += st.w_violations;
    if (st.left_domain) ++sum.domain_exits;
  }
  return sum;
}

}  // namespace clbf
