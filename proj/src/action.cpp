#include "weakkam/action.hpp"

#include "weakkam/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

namespace weakkam {

int DiscretizationPolicy::segments_for(double T) const {
  if (!(T > 0.0)) throw Error(ErrorKind::BadInput, "travel time must be positive");
  if (min_nodes < 2 || max_nodes < min_nodes) throw Error(ErrorKind::BadInput, "node bounds");
  const double n = std::round(T / dt);
  return static_cast<int>(std::clamp(n, static_cast<double>(min_nodes), static_cast<double>(max_nodes)));
}

LiftedPath straight_path(const Vec& from, const Vec& to, double T, int N) {
  LiftedPath p;
  p.T = T;
  p.nodes.resize(static_cast<std::size_t>(N) + 1);
  for (int i = 0; i <= N; ++i) {
    const double s = static_cast<double>(i) / N;
    p.nodes[i] = (1.0 - s) * from + s * to;
  }
  return p;
}

LiftedPath resample_path(const LiftedPath& path, int N) {
  const int M = path.segments();
  if (N == M) return path;
  LiftedPath out;
  out.T = path.T;
  out.nodes.resize(static_cast<std::size_t>(N) + 1);
  for (int i = 0; i <= N; ++i) {
    const double s = static_cast<double>(i) * M / N;
    const int k = std::min(static_cast<int>(s), M - 1);
    const double f = s - k;
    out.nodes[i] = (1.0 - f) * path.nodes[k] + f * path.nodes[k + 1];
  }
  out.nodes.front() = path.nodes.front();
  out.nodes.back() = path.nodes.back();
  return out;
}

LiftedPath extend_path_at_rest(const LiftedPath& path, int N) {
  const int M = path.segments();
  if (N <= M) return N == M ? path : resample_path(path, N);
  int slow = 0;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < M; ++i) {
    const double s = (path.nodes[i + 1] - path.nodes[i]).squaredNorm();
    if (s < best) {
      best = s;
      slow = i;
    }
  }
  LiftedPath out;
  out.T = path.T * N / M;
  out.nodes.reserve(static_cast<std::size_t>(N) + 1);
  for (int i = 0; i <= slow; ++i) out.nodes.push_back(path.nodes[i]);
  const Vec rest = path.segment_midpoint(slow);
  for (int i = 0; i < N - M; ++i) out.nodes.push_back(rest);
  for (int i = slow + 1; i <= M; ++i) out.nodes.push_back(path.nodes[i]);
  return out;
}

double discrete_action(const Lagrangian& model, const LiftedPath& path) {
  const double h = path.step();
  double s = 0.0;
  for (int i = 0; i < path.segments(); ++i) s += model.value(path.segment_midpoint(i), path.segment_velocity(i));
  return h * s;
}

namespace {

// Gradient and block-tridiagonal Hessian of the discrete action with respect
// to the interior nodes 1..N-1 (stored at index i-1). Fixed block size D keeps
// every block on the stack.
template <int D>
struct Assembly {
  using V = Eigen::Matrix<double, D, 1>;
  using M = Eigen::Matrix<double, D, D>;
  double action = 0.0;
  std::vector<V> grad;
  std::vector<M> diag;
  std::vector<M> upper;  // upper[j] = d2S / dx_j dx_{j+1}
};

template <int D>
void assemble(const Lagrangian& model, const std::vector<Eigen::Matrix<double, D, 1>>& nodes, double h,
              Assembly<D>& a) {
  using V = typename Assembly<D>::V;
  using M = typename Assembly<D>::M;
  const int N = static_cast<int>(nodes.size()) - 1;
  const int n = N - 1;
  a.action = 0.0;
  a.grad.assign(static_cast<std::size_t>(n), V::Zero());
  a.diag.assign(static_cast<std::size_t>(n), M::Zero());
  a.upper.assign(static_cast<std::size_t>(std::max(n - 1, 0)), M::Zero());
  Vec mid(D), vel(D);
  for (int i = 0; i < N; ++i) {
    mid = 0.5 * (nodes[i] + nodes[i + 1]);
    vel = (nodes[i + 1] - nodes[i]) / h;
    const LagrangianJet j = model.jet(mid, vel);
    a.action += h * j.value;
    const M hxv = j.hxv;
    const M sym = 0.5 * (hxv + hxv.transpose());
    const M skew = 0.5 * (hxv - hxv.transpose());
    const M quarter = (0.25 * h) * M(j.hxx);
    const M kin = M(j.hvv) / h;
    const V gx = j.gx;
    const V gv = j.gv;
    const int L = i - 1;  // interior index of the left node
    const int R = i;      // interior index of the right node
    if (L >= 0) {
      a.grad[L] += 0.5 * h * gx - gv;
      a.diag[L] += quarter - sym + kin;
    }
    if (R < n) {
      a.grad[R] += 0.5 * h * gx + gv;
      a.diag[R] += quarter + sym + kin;
    }
    if (L >= 0 && R < n) a.upper[L] += quarter + skew - kin;
  }
}

template <int D>
double action_of(const Lagrangian& model, const std::vector<Eigen::Matrix<double, D, 1>>& nodes, double h) {
  Vec mid(D), vel(D);
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    mid = 0.5 * (nodes[i] + nodes[i + 1]);
    vel = (nodes[i + 1] - nodes[i]) / h;
    s += model.value(mid, vel);
  }
  return h * s;
}

template <class V>
double inf_norm(const std::vector<V>& g) {
  double m = 0.0;
  for (const auto& v : g) m = std::max(m, v.cwiseAbs().maxCoeff());
  return m;
}

// Block Cholesky of the tridiagonal matrix diag + lambda I. Returns false if a
// pivot block is not positive definite.
template <int D>
class BlockTridiagonalSolver {
  using V = typename Assembly<D>::V;
  using M = typename Assembly<D>::M;

 public:
  bool factor(const Assembly<D>& a, double lambda) {
    const std::size_t n = a.diag.size();
    pivots_.resize(n);
    upper_ = &a.upper;
    for (std::size_t j = 0; j < n; ++j) {
      M S = a.diag[j];
      S.diagonal().array() += lambda;
      if (j > 0) S -= a.upper[j - 1].transpose() * pivots_[j - 1].solve(a.upper[j - 1]);
      pivots_[j].compute(S);
      if (pivots_[j].info() != Eigen::Success) return false;
      const M& Lm = pivots_[j].matrixLLT();
      for (int k = 0; k < D; ++k)
        if (!(Lm(k, k) > 0.0) || !std::isfinite(Lm(k, k))) return false;
    }
    return true;
  }

  void solve(const std::vector<V>& rhs, std::vector<V>& z) const {
    const std::size_t n = rhs.size();
    y_.resize(n);
    z.resize(n);
    const auto& up = *upper_;
    for (std::size_t j = 0; j < n; ++j) {
      y_[j] = rhs[j];
      if (j > 0) y_[j] -= up[j - 1].transpose() * pivots_[j - 1].solve(y_[j - 1]);
    }
    for (std::size_t j = n; j-- > 0;) {
      V r = y_[j];
      if (j + 1 < n) r -= up[j] * z[j + 1];
      z[j] = pivots_[j].solve(r);
    }
  }

 private:
  std::vector<Eigen::LLT<M>> pivots_;
  const std::vector<M>* upper_ = nullptr;
  mutable std::vector<V> y_;
};

template <int D>
double quadratic_form(const Assembly<D>& a, const std::vector<typename Assembly<D>::V>& p) {
  double q = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    q += p[j].dot(a.diag[j] * p[j]);
    if (j + 1 < p.size()) q += 2.0 * p[j].dot(a.upper[j] * p[j + 1]);
  }
  return q;
}

template <int D>
PathResult refine_fixed(const Lagrangian& shifted, LiftedPath path, const PathMinimizerOptions& opts) {
  using V = typename Assembly<D>::V;
  PathResult res;
  const int N = path.segments();
  const double h = path.step();
  std::vector<V> x(path.nodes.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = path.nodes[i];

  Assembly<D> a, ta;
  BlockTridiagonalSolver<D> solver;
  assemble<D>(shifted, x, h, a);
  // Levenberg-Marquardt damping, in units of the kinetic diagonal 1/h, adapted
  // from the ratio of actual to predicted decrease.
  const double unit = 1.0 / h;
  const double floor_lambda = 1e-10 * unit;
  double lambda = 0.0;
  int it = 0;
  int stalls = 0;
  int creeping = 0;
  std::vector<V> trial = x;
  std::vector<V> p;
  for (; it < opts.max_iterations; ++it) {
    res.gradient_norm = inf_norm(a.grad);
    if (res.gradient_norm <= opts.gradient_tolerance) break;
    while (!solver.factor(a, lambda)) lambda = std::max(lambda * 10.0, 1e-6 * unit);
    solver.solve(a.grad, p);
    double gp = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      p[j] = -p[j];
      gp += a.grad[j].dot(p[j]);
    }
    const double predicted = -(gp + 0.5 * quadratic_form<D>(a, p));
    for (int j = 1; j < N; ++j) trial[j] = x[j] + p[j - 1];
    const double s = action_of<D>(shifted, trial, h);
    const double actual = a.action - s;
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(a.action)) * std::sqrt(N);
    bool accept = false;
    double rho = 0.0;
    if (std::isfinite(s)) {
      if (predicted > noise) {
        rho = actual / predicted;
        accept = rho > 1e-4;
      } else if (actual > -noise) {
        // Decrease is below resolution: judge by the gradient instead.
        assemble<D>(shifted, trial, h, ta);
        accept = inf_norm(ta.grad) < res.gradient_norm;
        rho = accept ? 1.0 : 0.0;
      }
    }
    if (accept) {
      if (predicted > noise) assemble<D>(shifted, trial, h, ta);
      std::swap(x, trial);
      std::swap(a, ta);
      trial = x;
      stalls = 0;
    } else {
      for (int j = 1; j < N; ++j) trial[j] = x[j];
      ++stalls;
    }
    // Creeping along a nearly flat valley: the value has converged even though
    // the gradient has not.
    if (accept && predicted < opts.value_tolerance * (1.0 + std::abs(a.action))) {
      if (++creeping >= 3) {
        ++it;
        break;
      }
    } else if (accept) {
      creeping = 0;
    }
    if (rho > 0.75) {
      lambda = lambda / 4.0 < floor_lambda ? 0.0 : lambda / 4.0;
    } else if (rho < 0.25) {
      lambda = std::max(lambda * 4.0, 1e-6 * unit);
    }
    if (stalls > 60) {
      if (res.gradient_norm <= 1e3 * opts.gradient_tolerance) break;
      throw Error(ErrorKind::NoConvergence,
                  "path minimizer stalled at gradient " + std::to_string(res.gradient_norm));
    }
  }
  res.gradient_norm = inf_norm(a.grad);
  res.converged = res.gradient_norm <= opts.gradient_tolerance;
  res.iterations = it;
  res.saddle = a.grad.empty() ? false : !solver.factor(a, 0.0);
  res.action = a.action;
  for (std::size_t i = 0; i < x.size(); ++i) path.nodes[i] = x[i];
  res.path = std::move(path);
  return res;
}

}  // namespace

PathResult refine_path(const Lagrangian& shifted, LiftedPath path, const PathMinimizerOptions& opts) {
  if (path.segments() < 2) throw Error(ErrorKind::BadInput, "path needs at least two segments");
  if (!(path.T > 0.0)) throw Error(ErrorKind::BadInput, "travel time must be positive");
  switch (path.nodes.front().size()) {
    case 1:
      return refine_fixed<1>(shifted, std::move(path), opts);
    case 2:
      return refine_fixed<2>(shifted, std::move(path), opts);
    case 3:
      return refine_fixed<3>(shifted, std::move(path), opts);
    default:
      throw Error(ErrorKind::BadInput, "unsupported dimension");
  }
}

namespace {

bool better(const PathResult& a, const PathResult& b) {
  // Stationary non-saddles first, then lower action.
  const bool ga = a.converged && !a.saddle;
  const bool gb = b.converged && !b.saddle;
  if (ga != gb) return ga;
  return a.action < b.action;
}

}  // namespace

PathResult minimize_fixed_time(const Lagrangian& shifted, const Vec& x, const Vec& y, const IVec& winding, double T,
                               int N, const PathMinimizerOptions& opts, const LiftedPath* warm) {
  if (!(T > 0.0)) throw Error(ErrorKind::BadInput, "travel time must be positive");
  if (N < 2) throw Error(ErrorKind::BadInput, "need at least two segments");
  const int d = shifted.dim();
  const Vec from = x;
  const Vec to = y + winding.cast<double>();

  std::vector<LiftedPath> starts;
  if (warm != nullptr) {
    LiftedPath w = warm->segments() == N ? *warm : resample_path(*warm, N);
    w.T = T;
    w.nodes.front() = from;
    w.nodes.back() = to;
    starts.push_back(std::move(w));
  }
  starts.push_back(straight_path(from, to, T, N));
  if (opts.extra_starts > 0) {
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec dir(d);
    if (d == 1) {
      dir[0] = 1.0;
    } else {
      for (int k = 0; k < d; ++k) dir[k] = gauss(rng);
      dir /= dir.norm();
    }
    const double A = opts.start_amplitude;
    for (int s = 0; s < opts.extra_starts; ++s) {
      LiftedPath p = straight_path(from, to, T, N);
      const double sign = (s % 2 == 0) ? 1.0 : -1.0;
      const double freq = s < 2 ? 1.0 : 2.0;
      for (int i = 1; i < N; ++i) {
        const double u = static_cast<double>(i) / N;
        Vec jitter(d);
        for (int k = 0; k < d; ++k) jitter[k] = 1e-3 * gauss(rng);
        p.nodes[i] += sign * A * std::sin(M_PI * freq * u) * dir + jitter;
      }
      starts.push_back(std::move(p));
    }
  }

  return minimize_from_starts(shifted, std::move(starts), opts);
}

PathResult minimize_from_starts(const Lagrangian& shifted, std::vector<LiftedPath> starts,
                                const PathMinimizerOptions& opts) {
  if (starts.empty()) throw Error(ErrorKind::BadInput, "no starting paths");
  PathResult best;
  for (auto& s : starts) {
    PathResult r = refine_path(shifted, std::move(s), opts);
    if (best.path.nodes.empty() || better(r, best)) best = std::move(r);
  }
  return best;
}

LiftedPath retarget_path(LiftedPath path, const Vec& end) {
  const Vec delta = end - path.nodes.back();
  const int N = path.segments();
  for (int i = 1; i <= N; ++i) path.nodes[i] += (static_cast<double>(i) / N) * delta;
  path.nodes.back() = end;
  return path;
}

LiftedPath extend_periodic(const LiftedPath& path, int N, const Vec& end) {
  const int M = path.segments();
  if (N <= M) return retarget_path(resample_path(path, N), end);
  const Vec disp = path.nodes.back() - path.nodes.front();
  LiftedPath out;
  out.T = path.T * N / M;
  out.nodes.reserve(static_cast<std::size_t>(N) + 1);
  Vec offset = Vec::Zero(disp.size());
  out.nodes.push_back(path.nodes.front());
  for (int i = 1; i <= N; ++i) {
    const int k = (i - 1) % M + 1;
    if (k == 1 && i > 1) offset += disp;
    out.nodes.push_back(path.nodes[k] + offset);
  }
  return retarget_path(std::move(out), end);
}

double straight_line_action(const Lagrangian& shifted, const Vec& from, const Vec& to, double T, int N) {
  const Vec v = (to - from) / T;
  const double h = T / N;
  double s = 0.0;
  for (int i = 0; i < N; ++i) s += shifted.value(from + ((i + 0.5) / N) * (to - from), v);
  return h * s;
}

IVec proxy_best_winding(const Lagrangian& shifted, const Vec& x, const Vec& y, double T, int N, IVec w) {
  // Coarser quadrature is enough for ranking.
  const int M = std::min(N, 256);
  auto cost = [&](const IVec& c) { return straight_line_action(shifted, x, y + c.cast<double>(), T, M); };
  double best = cost(w);
  for (int guard = 0; guard < 100000; ++guard) {
    bool moved = false;
    for (Eigen::Index k = 0; k < w.size(); ++k) {
      for (int s : {1, -1}) {
        IVec c = w;
        c[k] += s;
        const double v = cost(c);
        if (v < best) {
          best = v;
          w = c;
          moved = true;
          break;
        }
      }
    }
    if (!moved) break;
  }
  return w;
}

PathResult minimize_action_fixed_time(const Model& model, const OneForm& form, const Vec& x, const Vec& y,
                                      const IVec& winding, double T, int N, const PathMinimizerOptions& opts) {
  if (N < 8) throw Error(ErrorKind::BadInput, "need at least 8 segments");
  const Model shifted = shift_by_one_form(model, form);
  return minimize_fixed_time(*shifted, x, y, winding, T, N, opts);
}

std::vector<IVec> winding_box(const IVec& center, int radius) {
  const int d = static_cast<int>(center.size());
  std::vector<IVec> out;
  IVec w = IVec::Constant(d, -radius);
  while (true) {
    out.push_back(center + w);
    int k = 0;
    while (k < d && w[k] == radius) w[k++] = -radius;
    if (k == d) break;
    ++w[k];
  }
  return out;
}

IVec nearest_winding(const Vec& x, const Vec& y) {
  IVec w(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) w[i] = static_cast<int>(std::lround(x[i] - y[i]));
  return w;
}

namespace {

struct IVecLess {
  bool operator()(const IVec& a, const IVec& b) const {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
  }
};

bool on_box_boundary(const IVec& w, const IVec& center, int radius) {
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (std::abs(w[i] - center[i]) == radius) return true;
  return false;
}

template <class Solve>
WindingResult walk_windings(const Vec& x, const Vec& y, int radius, Solve&& solve) {
  if (radius < 1) throw Error(ErrorKind::BadInput, "winding radius must be at least 1");
  std::map<IVec, PathResult, IVecLess> seen;
  IVec center = nearest_winding(x, y);
  WindingResult out;
  for (int walk = 0; walk < 8; ++walk) {
    for (const IVec& w : winding_box(center, radius)) {
      if (seen.count(w)) continue;
      seen.emplace(w, solve(w));
    }
    // Deterministic selection: map order is lexicographic in the winding.
    const PathResult* best = nullptr;
    IVec arg;
    for (const auto& [w, r] : seen) {
      if (best == nullptr || r.action < best->action) {
        best = &r;
        arg = w;
      }
    }
    out.action = best->action;
    out.winding = arg;
    out.best = *best;
    if (!on_box_boundary(arg, center, radius)) break;
    center = arg;
  }
  return out;
}

}  // namespace

WindingResult min_action_over_windings(const Model& model, const OneForm& form, const Vec& x, const Vec& y,
                                       double T, int N, int winding_radius, const PathMinimizerOptions& opts) {
  const Model shifted = shift_by_one_form(model, form);
  return walk_windings(x, y, winding_radius,
                       [&](const IVec& w) { return minimize_fixed_time(*shifted, x, y, w, T, N, opts); });
}

ActionSolver::ActionSolver(const Model& model, const OneForm& form, DiscretizationPolicy policy,
                           PathMinimizerOptions opts)
    : shifted_(shift_by_one_form(model, form)), policy_(policy), opts_(opts) {}

double ActionSolver::admissible_time(double T) const {
  const int N = policy_.segments_for(T);
  return policy_.richardson ? T : N * policy_.dt;
}

PathResult ActionSolver::solve(const Vec& x, const Vec& y, const IVec& winding, double T,
                               const std::vector<LiftedPath>& warm, bool multistart) const {
  const int N = policy_.segments_for(T);
  if (!policy_.richardson) T = N * policy_.dt;
  const Vec to = y + winding.cast<double>();
  std::vector<LiftedPath> starts;
  starts.reserve(warm.size() + 1);
  for (const auto& w : warm) {
    LiftedPath p = w.segments() == N ? w : resample_path(w, N);
    p.T = T;
    p.nodes.front() = x;
    starts.push_back(retarget_path(std::move(p), to));
  }
  PathMinimizerOptions o = opts_;
  if (!multistart) o.extra_starts = 0;
  // minimize_fixed_time adds the straight line and the perturbed family.
  PathResult coarse;
  if (starts.empty()) {
    coarse = minimize_fixed_time(*shifted_, x, y, winding, T, N, o);
  } else {
    coarse = minimize_from_starts(*shifted_, std::move(starts), o);
    // Warm starts alone suffice unless they failed to reach a local minimum.
    if (multistart || !coarse.converged || coarse.saddle) {
      PathResult b = minimize_fixed_time(*shifted_, x, y, winding, T, N, o);
      if (better(b, coarse)) coarse = std::move(b);
    }
  }
  if (!policy_.richardson) return coarse;
  std::vector<LiftedPath> fine_start{resample_path(coarse.path, 2 * N)};
  PathMinimizerOptions fine_opts = opts_;
  fine_opts.extra_starts = 0;
  PathResult fine = minimize_from_starts(*shifted_, std::move(fine_start), fine_opts);
  fine.action = (4.0 * fine.action - coarse.action) / 3.0;
  return fine;
}

WindingResult ActionSolver::over_windings(const Vec& x, const Vec& y, double T, int radius) const {
  return walk_windings(x, y, radius, [&](const IVec& w) { return solve(x, y, w, T); });
}

}  // namespace weakkam
