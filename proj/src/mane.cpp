#include "weakkam/mane.hpp"

#include "weakkam/error.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>

namespace weakkam {

namespace {

// body(i) for i in [0, n) across threads; the first exception is rethrown
// after the loop so none escapes the parallel region.
template <class Body>
void parallel_indices(std::size_t n, Body body) {
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
#pragma omp critical(weakkam_mane_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

struct IVecLess {
  bool operator()(const IVec& a, const IVec& b) const {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
  }
};

// Log-spaced times in [lo, hi] mapped to admissible times; duplicates removed.
std::vector<double> time_levels(const ActionSolver& solver, double lo, double hi, int count) {
  const auto& pol = solver.policy();
  lo = std::max(lo, pol.min_nodes * pol.dt);
  std::vector<double> out;
  for (int i = 0; i < count; ++i) {
    const double t = count == 1 ? lo : lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1));
    const double a = solver.admissible_time(t);
    if (out.empty() || a > out.back() * (1.0 + 1e-12)) out.push_back(a);
  }
  return out;
}

std::vector<Vec> base_grid(int dim, int per_dim) {
  std::vector<Vec> out;
  IVec idx = IVec::Zero(dim);
  while (true) {
    out.push_back(idx.cast<double>() / per_dim);
    int k = 0;
    while (k < dim && idx[k] == per_dim - 1) idx[k++] = 0;
    if (k == dim) break;
    ++idx[k];
  }
  return out;
}

bool on_boundary(const IVec& w, const IVec& center, int radius) {
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (std::abs(w[i] - center[i]) >= radius) return true;
  return false;
}

// Fixed-endpoint minimization over an increasing sequence of times, tracking
// each winding class and warm-starting from the previous rung.
class Continuation {
 public:
  Continuation(const ActionSolver& solver, Vec x, Vec y, int radius)
      : solver_(solver), x_(std::move(x)), y_(std::move(y)), radius_(radius) {}

  struct Level {
    double T = 0.0;
    IVec winding;
    PathResult best;
  };

  Level advance(double T, bool multistart) {
    IVec center;
    if (have_prev_) {
      const Vec disp = y_ + prev_best_w_.cast<double>() - x_;
      const Vec predicted = x_ + disp * (T / prev_T_) - y_;
      center = IVec(predicted.size());
      for (Eigen::Index i = 0; i < predicted.size(); ++i) center[i] = static_cast<int>(std::lround(predicted[i]));
    } else {
      const int N = solver_.policy().segments_for(T);
      center = proxy_best_winding(solver_.shifted(), x_, y_, T, N, nearest_winding(x_, y_));
    }
    std::map<IVec, PathResult, IVecLess> results;
    Level lvl;
    lvl.T = T;
    for (int walk = 0; walk < 16; ++walk) {
      std::vector<IVec> todo;
      for (const IVec& w : winding_box(center, radius_))
        if (!results.count(w)) todo.push_back(w);
      std::vector<PathResult> solved(todo.size());
      parallel_indices(todo.size(), [&](std::size_t i) { solved[i] = solve_class(todo[i], T, multistart); });
      for (std::size_t i = 0; i < todo.size(); ++i) results.emplace(todo[i], std::move(solved[i]));
      const PathResult* best = nullptr;
      for (const auto& [w, r] : results) {
        if (best == nullptr || r.action < best->action) {
          best = &r;
          lvl.winding = w;
        }
      }
      lvl.best = *best;
      if (!on_boundary(lvl.winding, center, radius_)) break;
      center = lvl.winding;
    }
    prev_.clear();
    for (auto& [w, r] : results) prev_.emplace(w, std::move(r.path));
    prev_best_path_ = lvl.best.path;
    prev_best_w_ = lvl.winding;
    prev_T_ = T;
    have_prev_ = true;
    return lvl;
  }

  PathResult solve_class(const IVec& w, double T, bool multistart) const {
    std::vector<LiftedPath> warm;
    const int N = solver_.policy().segments_for(T);
    const Vec end = y_ + w.cast<double>();
    if (have_prev_) {
      auto it = prev_.find(w);
      if (it != prev_.end()) warm.push_back(extend_path_at_rest(it->second, N));
      warm.push_back(extend_periodic(prev_best_path_, N, end));
    }
    return solver_.solve(x_, y_, w, T, warm, multistart || warm.empty());
  }

  const LiftedPath& last_best_path() const { return prev_best_path_; }

 private:
  const ActionSolver& solver_;
  Vec x_, y_;
  int radius_;
  bool have_prev_ = false;
  double prev_T_ = 0.0;
  IVec prev_best_w_;
  LiftedPath prev_best_path_;
  std::map<IVec, LiftedPath, IVecLess> prev_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Loop table

LoopTable::LoopTable(const ActionSolver& solver, const LoopTableOptions& opts) {
  const int d = solver.dim();
  const auto bases = base_grid(d, opts.base_points_per_dim);
  const auto windings = winding_box(IVec::Zero(d), opts.winding_radius);
  const auto times = time_levels(solver, opts.t_min, opts.t_max, opts.time_samples);
  const std::size_t classes = bases.size() * windings.size();
  std::vector<std::vector<LoopEntry>> rows(classes);
  parallel_indices(classes, [&](std::size_t c) {
    const Vec& z = bases[c / windings.size()];
    const IVec& w = windings[c % windings.size()];
    const Vec end = z + w.cast<double>();
    LiftedPath prev;
    for (std::size_t i = 0; i < times.size(); ++i) {
      const double T = times[i];
      const int N = solver.policy().segments_for(T);
      std::vector<LiftedPath> warm;
      if (!prev.nodes.empty()) {
        warm.push_back(extend_path_at_rest(prev, N));
        warm.push_back(extend_periodic(prev, N, end));
      }
      const PathResult r = solver.solve(z, z, w, T, warm, i % 8 == 0);
      rows[c].push_back({z, w, T, r.action});
      prev = r.path;
    }
  });
  for (auto& r : rows)
    for (auto& e : r) entries_.push_back(std::move(e));
}

const LoopEntry& LoopTable::most_negative(double k) const {
  const LoopEntry* best = &entries_.front();
  for (const auto& e : entries_)
    if (e.action + k * e.T < best->action + k * best->T) best = &e;
  return *best;
}

double LoopTable::sup_ratio() const {
  double s = -std::numeric_limits<double>::infinity();
  for (const auto& e : entries_) s = std::max(s, -e.action / e.T);
  return s;
}

// ---------------------------------------------------------------------------
// Mane potential

ManePotential::ManePotential(const Model& model, const OneForm& form, DiscretizationPolicy policy,
                             PotentialOptions opts, PathMinimizerOptions path_opts)
    : solver_(model, form, policy, path_opts), opts_(opts) {}

const LoopTable& ManePotential::loops() const {
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  if (!loops_) {
    LoopTableOptions lo = opts_.loops;
    lo.winding_radius = opts_.winding_radius;
    loops_ = std::make_shared<LoopTable>(solver_, lo);
  }
  return *loops_;
}

PotentialValue ManePotential::operator()(double k, const Vec& x, const Vec& y) const {
  if (x.size() != solver_.dim() || y.size() != solver_.dim()) throw Error(ErrorKind::BadInput, "point dimension");
  PotentialValue out;
  const LoopEntry& worst = loops().most_negative(k);
  const double per_loop = worst.action + k * worst.T;
  if (per_loop < -opts_.loop_tolerance) {
    LoopWitness wit;
    wit.base = worst.base;
    wit.winding = worst.winding;
    wit.T = worst.T;
    wit.loop_action = per_loop;
    const double t1 = solver_.admissible_time(1.0);
    const double connect = solver_.solve(x, wit.base, nearest_winding(x, wit.base), t1).action +
                           solver_.solve(wit.base, y, nearest_winding(wit.base, y), t1).action + 2.0 * k * t1;
    const double need = std::abs(opts_.divergence_threshold) + std::max(0.0, connect);
    wit.repetitions = static_cast<long>(std::ceil(need / -per_loop)) + 1;
    wit.iterated_value = connect + static_cast<double>(wit.repetitions) * per_loop;
    out.minus_infinity = true;
    out.value = -std::numeric_limits<double>::infinity();
    out.witness = wit;
    return out;
  }

  const auto times = time_levels(solver_, opts_.t_min, opts_.t_max, opts_.scan_points);
  Continuation scan(solver_, x, y, opts_.winding_radius);
  std::vector<Continuation::Level> levels;
  std::size_t arg = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < times.size(); ++i) {
    const bool ms = opts_.multistart_every > 0 && i % static_cast<std::size_t>(opts_.multistart_every) == 0;
    levels.push_back(scan.advance(times[i], ms));
    const double v = levels.back().best.action + k * times[i];
    out.certificate.emplace_back(times[i], v);
    if (v < best) {
      best = v;
      arg = i;
    }
  }

  // Refine between the neighbours of the best rung in the best class.
  IVec w = levels[arg].winding;
  double argT = times[arg];
  if (times.size() >= 3) {
    const double lo_t = times[arg == 0 ? 0 : arg - 1];
    const double hi_t = times[std::min(arg + 1, times.size() - 1)];
    const LiftedPath seed = levels[arg].best.path;
    auto f = [&](double T) {
      const int N = solver_.policy().segments_for(T);
      std::vector<LiftedPath> warm{extend_path_at_rest(seed, N), extend_periodic(seed, N, y + w.cast<double>())};
      const double t = solver_.admissible_time(T);
      const double v = solver_.solve(x, y, w, t, warm, false).action + k * t;
      out.certificate.emplace_back(t, v);
      return v;
    };
    if (!solver_.policy().richardson) {
      // Integer ternary search over the segment count.
      const double dt = solver_.policy().dt;
      int a = solver_.policy().segments_for(lo_t), b = solver_.policy().segments_for(hi_t);
      std::map<int, double> memo;
      auto g = [&](int N) {
        auto it = memo.find(N);
        if (it != memo.end()) return it->second;
        return memo[N] = f(N * dt);
      };
      while (b - a > 3) {
        const int m1 = a + (b - a) / 3, m2 = b - (b - a) / 3;
        if (g(m1) <= g(m2)) b = m2; else a = m1;
      }
      for (int N = a; N <= b; ++N) {
        const double v = g(N);
        if (v < best) {
          best = v;
          argT = N * dt;
        }
      }
    } else {
      const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
      double a = lo_t, b = hi_t;
      double c = b - invphi * (b - a), d = a + invphi * (b - a);
      double fc = f(c), fd = f(d);
      for (int it = 0; it < 30 && b - a > 1e-4 * (1.0 + a); ++it) {
        if (fc <= fd) {
          b = d;
          d = c;
          fd = fc;
          c = b - invphi * (b - a);
          fc = f(c);
        } else {
          a = c;
          c = d;
          fc = fd;
          d = a + invphi * (b - a);
          fd = f(d);
        }
      }
      if (std::min(fc, fd) < best) {
        best = std::min(fc, fd);
        argT = fc <= fd ? c : d;
      }
    }
  }
  out.value = best;
  out.argmin_T = argT;
  out.winding = w;
  // The T -> 0 limit of a loop at a single point.
  if (torus_distance(x, y) == 0.0 && 0.0 < out.value) {
    out.value = 0.0;
    out.argmin_T = 0.0;
    out.winding = IVec::Zero(solver_.dim());
  }
  return out;
}

PotentialValue mane_potential(const Model& model, const OneForm& form, double k, const Vec& x, const Vec& y) {
  return ManePotential(model, form)(k, x, y);
}

// ---------------------------------------------------------------------------
// Critical value

namespace {

double loop_ratio(const ActionSolver& s, const Vec& z, const IVec& w, double T, std::vector<LiftedPath>& warm) {
  const PathResult r = s.solve(z, z, w, T, warm, false);
  warm.assign(1, r.path);
  return -r.action / s.admissible_time(T);
}

template <class F>
double golden_max(F&& f, double a, double b, double tol, double* arg) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  *arg = fc >= fd ? c : d;
  return std::max(fc, fd);
}

}  // namespace

CriticalValueResult mane_critical_value(const ActionSolver& solver, const CriticalValueOptions& opts) {
  const LoopTable table(solver, opts.loops);
  const auto& es = table.entries();
  const int d = solver.dim();

  // Best few distinct (base, winding) classes by -A/T.
  std::vector<std::size_t> order(es.size());
  for (std::size_t i = 0; i < es.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return -es[a].action / es[a].T > -es[b].action / es[b].T; });
  std::vector<std::size_t> picks;
  for (std::size_t i : order) {
    bool dup = false;
    for (std::size_t j : picks)
      if (es[j].base == es[i].base && es[j].winding == es[i].winding) dup = true;
    if (!dup) picks.push_back(i);
    if (static_cast<int>(picks.size()) >= opts.refine_candidates) break;
  }

  // Refined loops: T by golden search between neighbouring samples, then the
  // base point coordinatewise within half a grid cell, then T again.
  std::vector<LoopEntry> refined(picks.size());
  const double cell = 1.0 / opts.loops.base_points_per_dim;
  const double tmin = solver.policy().min_nodes * solver.policy().dt;
  parallel_indices(picks.size(), [&](std::size_t p) {
    LoopEntry e = es[picks[p]];
    std::vector<LiftedPath> warm;
    double ratio = -e.action / e.T;
    auto refine_T = [&]() {
      const double a = std::max(tmin, e.T / 1.6), b = e.T * 1.6;
      double arg = e.T;
      const double tol = solver.policy().richardson ? 1e-5 : solver.policy().dt;
      const double r = golden_max([&](double T) { return loop_ratio(solver, e.base, e.winding, T, warm); }, a, b, tol,
                                  &arg);
      if (r > ratio) {
        ratio = r;
        e.T = solver.admissible_time(arg);
      }
    };
    refine_T();
    for (int k = 0; k < d; ++k) {
      double arg = e.base[k];
      const double r = golden_max(
          [&](double zk) {
            Vec z = e.base;
            z[k] = zk;
            return loop_ratio(solver, z, e.winding, e.T, warm);
          },
          e.base[k] - 0.5 * cell, e.base[k] + 0.5 * cell, 1e-5, &arg);
      if (r > ratio) {
        ratio = r;
        e.base[k] = arg;
      }
    }
    refine_T();
    e.action = -ratio * e.T;
    refined[p] = e;
  });

  std::vector<LoopEntry> loops = es;
  loops.insert(loops.end(), refined.begin(), refined.end());
  // Negative loop exists at k  <=>  k is below the critical value.
  auto negative_loop = [&](double k) {
    for (const auto& e : loops)
      if (e.action + k * e.T < 0.0) return true;
    return false;
  };

  CriticalValueResult res;
  double lo = opts.bracket_lo, hi = opts.bracket_hi;
  int doublings = 0;
  while (!(negative_loop(lo) && !negative_loop(hi))) {
    if (++doublings > opts.max_bracket_doublings)
      throw Error(ErrorKind::BracketNotFound,
                  "critical value bracket not found in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    const double mid = 0.5 * (lo + hi), half = hi - lo;
    lo = mid - half;
    hi = mid + half;
  }
  // Bisection runs well past the requested width; the predicate is cheap.
  int steps = 0;
  while (hi - lo > std::min(opts.width, 1e-12 * (1.0 + std::abs(hi)))) {
    const double mid = 0.5 * (lo + hi);
    (negative_loop(mid) ? lo : hi) = mid;
    ++steps;
  }
  res.value = 0.5 * (lo + hi);
  res.bracket_lo = lo;
  res.bracket_hi = hi;
  res.bisection_steps = steps;
  const LoopEntry* best = &loops.front();
  for (const auto& e : loops)
    if (-e.action / e.T > -best->action / best->T) best = &e;
  res.best_loop = *best;
  return res;
}

double mane_critical_value(const Model& model, const OneForm& form) {
  const ActionSolver solver(model, form, accurate_policy());
  return mane_critical_value(solver).value;
}

// ---------------------------------------------------------------------------
// Peierls barrier

BarrierResult peierls_ladder(const ActionSolver& solver, double alpha_c, const Vec& x, const Vec& y,
                             const BarrierOptions& opts) {
  if (!(opts.t0 > 0.0) || opts.t_max < opts.t0) throw Error(ErrorKind::BadInput, "bad barrier ladder");
  BarrierResult res;
  Continuation ladder(solver, x, y, opts.winding_radius);
  for (double t = opts.t0; t <= opts.t_max * (1.0 + 1e-12); t *= 2.0) {
    const double T = solver.admissible_time(t);
    const auto lvl = ladder.advance(T, res.ladder.empty());
    res.ladder.emplace_back(T, lvl.best.action + alpha_c * T);
    res.winding = lvl.winding;
    const std::size_t n = res.ladder.size();
    if (opts.stable_rungs > 0 && n > static_cast<std::size_t>(opts.stable_rungs)) {
      bool flat = true;
      for (std::size_t i = n - opts.stable_rungs; i < n; ++i)
        flat = flat && std::abs(res.ladder[i].second - res.ladder[i - 1].second) <= opts.tolerance;
      if (flat) break;
    }
  }
  res.path = ladder.last_best_path();
  res.value = res.ladder.back().second;
  res.stabilized = res.ladder.size() < 2 ||
                   std::abs(res.ladder.back().second - res.ladder[res.ladder.size() - 2].second) <= opts.tolerance;
  return res;
}

BarrierResult peierls_barrier(const ActionSolver& solver, double alpha_c, const Vec& x, const Vec& y,
                              const BarrierOptions& opts) {
  BarrierResult r = peierls_ladder(solver, alpha_c, x, y, opts);
  if (!r.stabilized) {
    std::string msg = "barrier ladder did not stabilize:";
    for (const auto& [t, v] : r.ladder) msg += " (" + std::to_string(t) + ", " + std::to_string(v) + ")";
    throw Error(ErrorKind::NotStabilized, msg);
  }
  return r;
}

double peierls_barrier(const Model& model, const OneForm& form, double alpha_c, const Vec& x, const Vec& y) {
  const ActionSolver solver(model, form, exact_discrete_policy());
  return peierls_barrier(solver, alpha_c, x, y).value;
}

double delta_pseudometric(const ActionSolver& solver, double alpha_c, const Vec& x, const Vec& y,
                          const BarrierOptions& opts) {
  return peierls_barrier(solver, alpha_c, x, y, opts).value + peierls_barrier(solver, alpha_c, y, x, opts).value;
}

}  // namespace weakkam
