#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <thread>
#include <vector>

#include "clbf/expr.hpp"
#include "clbf/interval.hpp"

namespace clbf {

enum class verdict { verified, falsified, unknown };

inline const char* to_string(verdict v) {
  switch (v) {
    case verdict::verified: return "Verified";
    case verdict::falsified: return "Falsified";
    case verdict::unknown: return "Unknown";
  }
  return "?";
}

// Universal claim over a hyperbox:
//   for all x in domain:  (le_i(x) <= 0 for all i) and (eq_j(x) = 0 for all j)
//                         implies  concl(x) < 0.
struct condition {
  int arity = 0;
  hyperbox domain;
  std::vector<expr> le;
  std::vector<expr> eq;
  expr concl;
};

struct refute_options {
  double delta = 1e-4;        // witness slack
  std::uint64_t budget = 10000000;  // max boxes before giving up
  int workers = 4;
  double width_floor = 1e-6;  // boxes narrower than this are not split further
};

struct refutation {
  verdict result = verdict::unknown;
  std::vector<double> witness;    // nonempty iff falsified
  std::uint64_t boxes = 0;
};

namespace detail {

enum class box_fate { pruned, split, floor_witness, floor_unknown };

// Decide one box. Does not recurse.
inline box_fate judge_box(const condition& c, const hyperbox& box,
                          double delta, double width_floor,
                          std::vector<double>* witness_out) {
  for (const auto& p : c.le) {
    auto r = p.eval_interval(box);
    if (r.domain_ok && r.v.lo > 0.0) return box_fate::pruned;  // infeasible
  }
  for (const auto& e : c.eq) {
    auto r = e.eval_interval(box);
    if (r.domain_ok && !r.v.contains(0.0)) return box_fate::pruned;
  }
  auto r = c.concl.eval_interval(box);
  if (r.domain_ok && r.v.hi < 0.0) return box_fate::pruned;  // holds here

  if (max_width(box) >= width_floor) return box_fate::split;

  // Floor box: the only way to falsify is a concrete point that satisfies the
  // premises to within delta and pushes the conclusion to >= -delta.
  std::vector<double> x = box_mid(box);
  try {
    for (const auto& p : c.le)
      if (p.eval(x) > delta) return box_fate::floor_unknown;
    for (const auto& e : c.eq)
      if (std::abs(e.eval(x)) > delta) return box_fate::floor_unknown;
    if (c.concl.eval(x) >= -delta) {
      if (witness_out) *witness_out = std::move(x);
      return box_fate::floor_witness;
    }
  } catch (const eval_error&) {
  }
  return box_fate::floor_unknown;
}

}  // namespace detail

// Re-checks a reported witness against the condition it is supposed to break.
inline bool replay_witness(const condition& c, const std::vector<double>& x,
                           double delta) {
  if (static_cast<int>(x.size()) != c.arity) return false;
  for (std::size_t i = 0; i < c.domain.size(); ++i) {
    if (x[i] < c.domain[i].lo - delta || x[i] > c.domain[i].hi + delta)
      return false;
  }
  try {
    for (const auto& p : c.le)
      if (p.eval(x) > delta) return false;
    for (const auto& e : c.eq)
      if (std::abs(e.eval(x)) > delta) return false;
    return c.concl.eval(x) >= -delta;
  } catch (const eval_error&) {
    return false;
  }
}

// Searches for a counterexample by branch and prune. Returns verified only
// when every leaf of the (deterministic) box tree was discharged by interval
// arithmetic; floor-width leaves that neither prune nor yield a witness, and
// budget exhaustion, give unknown.
inline refutation refute_forall(const condition& c, const refute_options& opt) {
  refutation out;
  std::deque<hyperbox> work{c.domain};
  std::mutex mtx;
  std::condition_variable cv;
  int in_flight = 0;
  std::uint64_t processed = 0;
  bool falsified = false, any_unknown = false, budget_hit = false;
  std::vector<double> witness;

  auto worker = [&]() {
    std::unique_lock<std::mutex> lk(mtx);
    while (true) {
      cv.wait(lk, [&] {
        return falsified || budget_hit || !work.empty() || in_flight == 0;
      });
      if (falsified || budget_hit) return;
      if (work.empty()) {
        if (in_flight == 0) return;
        continue;
      }
      hyperbox box = std::move(work.back());
      work.pop_back();
      ++in_flight;
      if (++processed > opt.budget) {
        budget_hit = true;
        --in_flight;
        cv.notify_all();
        return;
      }
      lk.unlock();

      std::vector<double> w;
      auto fate = detail::judge_box(c, box, opt.delta, opt.width_floor, &w);
      int split_dim = -1;
      hyperbox left, right;
      if (fate == detail::box_fate::split) {
        split_dim = widest_dim(box);
        left = box;
        right = box;
        double mid = box[split_dim].mid();
        left[split_dim] = interval(box[split_dim].lo, mid);
        right[split_dim] = interval(mid, box[split_dim].hi);
      }

      lk.lock();
      --in_flight;
      switch (fate) {
        case detail::box_fate::pruned:
          break;
        case detail::box_fate::split:
          work.push_back(std::move(left));
          work.push_back(std::move(right));
          break;
        case detail::box_fate::floor_witness:
          if (!falsified) {
            falsified = true;
            witness = std::move(w);
          }
          break;
        case detail::box_fate::floor_unknown:
          any_unknown = true;
          break;
      }
      cv.notify_all();
    }
  };

  int nw = opt.workers < 1 ? 1 : opt.workers;
  if (nw == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(nw);
    for (int i = 0; i < nw; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  out.boxes = processed;
  if (falsified) {
    out.result = verdict::falsified;
    out.witness = std::move(witness);
  } else if (budget_hit || any_unknown) {
    out.result = verdict::unknown;
  } else {
    out.result = verdict::verified;
  }
  return out;
}

}  // namespace clbf
