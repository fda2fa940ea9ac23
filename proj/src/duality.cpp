#include "weakkam/duality.hpp"

#include "weakkam/error.hpp"
#include "weakkam/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

namespace weakkam {

std::string_view to_string(AlphaRoute r) {
  switch (r) {
    case AlphaRoute::CriticalValue:
      return "critical-value";
    case AlphaRoute::ClosedMeasureLP:
      return "closed-measure-lp";
    case AlphaRoute::InfMaxSubsolution:
      return "inf-max-subsolution";
  }
  return "?";
}

AlphaRoute alpha_route_from_string(std::string_view s) {
  if (s == "critical-value") return AlphaRoute::CriticalValue;
  if (s == "closed-measure-lp") return AlphaRoute::ClosedMeasureLP;
  if (s == "inf-max-subsolution") return AlphaRoute::InfMaxSubsolution;
  throw Error(ErrorKind::BadInput, "unknown alpha route '" + std::string(s) + "'");
}

namespace {

// Frequencies 1 <= |k|_inf <= order whose first nonzero entry is positive, so
// cos and sin of 2 pi k.x over this set span the nonconstant polynomials.
std::vector<IVec> half_lattice(int d, int order) {
  std::vector<IVec> out;
  const std::vector<IVec> box = winding_box(IVec::Zero(d), order);
  for (const IVec& k : box) {
    int first = 0;
    for (int i = 0; i < d; ++i)
      if (k[i] != 0) {
        first = k[i];
        break;
      }
    if (first > 0) out.push_back(k);
  }
  return out;
}

// Points of the uniform tensor grid with n points per axis on [0,1)^d.
std::vector<Vec> torus_grid(int d, int n) {
  std::vector<Vec> pts;
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  while (true) {
    Vec x(d);
    for (int i = 0; i < d; ++i) x[i] = static_cast<double>(idx[i]) / n;
    pts.push_back(x);
    int a = 0;
    while (a < d && idx[a] == n - 1) idx[a++] = 0;
    if (a == d) break;
    ++idx[a];
  }
  return pts;
}

std::vector<Vec> velocity_grid(int d, const LPGridSpec& g) {
  std::vector<Vec> out;
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  const double step = g.v_points > 1 ? (g.v_max - g.v_min) / (g.v_points - 1) : 0.0;
  while (true) {
    Vec v(d);
    for (int i = 0; i < d; ++i) v[i] = g.v_min + idx[i] * step;
    out.push_back(v);
    int a = 0;
    while (a < d && idx[a] == g.v_points - 1) idx[a++] = 0;
    if (a == d) break;
    ++idx[a];
  }
  return out;
}

}  // namespace

LPMeasureResult solve_holonomic_lp(const Model& model, const OneForm& form, const LPGridSpec& grid) {
  const int d = model->dim();
  if (grid.x_points < 1 || grid.v_points < 1 || grid.fourier_order < 0 || !(grid.v_max >= grid.v_min))
    throw Error(ErrorKind::BadInput, "invalid LP grid");
  const std::vector<Vec> xs = torus_grid(d, grid.x_points);
  const std::vector<Vec> vs = velocity_grid(d, grid);
  const std::vector<IVec> modes = half_lattice(d, grid.fourier_order);
  const int nx = static_cast<int>(xs.size());
  const int nv = static_cast<int>(vs.size());
  const int n = nx * nv;
  const int m = 1 + 2 * static_cast<int>(modes.size());

  LinearProgram lp;
  lp.A.resize(m, n);
  lp.b = Eigen::VectorXd::Zero(m);
  lp.b[0] = 1.0;
  lp.c.resize(n);
  const Model shifted = shift_by_one_form(model, form);
  for (int i = 0; i < nx; ++i) {
    // Closedness rows use grad f / (2 pi |k|), which keeps every row O(1).
    std::vector<Vec> grads;
    for (const IVec& k : modes) {
      const Vec kv = k.cast<double>();
      const double th = kTwoPi * kv.dot(xs[i]);
      const Vec unit = kv / kv.norm();
      grads.push_back(-std::sin(th) * unit);
      grads.push_back(std::cos(th) * unit);
    }
    for (int j = 0; j < nv; ++j) {
      const int col = i * nv + j;
      lp.A(0, col) = 1.0;
      for (std::size_t r = 0; r < grads.size(); ++r) lp.A(1 + static_cast<int>(r), col) = grads[r].dot(vs[j]);
      lp.c[col] = shifted->value(xs[i], vs[j]);
    }
  }
  const LPSolution sol = solve_lp(lp);
  LPMeasureResult out;
  out.value = sol.value;
  out.pivots = sol.pivots;
  out.measure.dim = d;
  for (int col = 0; col < n; ++col)
    if (sol.x[col] > 0.0) out.measure.atoms.push_back({xs[col / nv], vs[col % nv], sol.x[col]});
  return out;
}

OccupationMeasure mather_measure_lp(const Model& model, const OneForm& form, const LPGridSpec& grid) {
  return solve_holonomic_lp(model, form, grid).measure;
}

namespace {

// Soft-max objective of the inf-max route, with exact gradient and Hessian in
// the Fourier coefficients of u.
class InfMaxObjective {
 public:
  InfMaxObjective(const Lagrangian& model, const Vec& c, const std::vector<IVec>& modes, const std::vector<Vec>& xs)
      : model_(model), c_(c), xs_(xs) {
    const int d = static_cast<int>(c.size());
    const int P = 2 * static_cast<int>(modes.size());
    jac_.reserve(xs.size());
    for (const Vec& x : xs) {
      Eigen::MatrixXd J(d, P);
      for (std::size_t m = 0; m < modes.size(); ++m) {
        const Vec kv = modes[m].cast<double>();
        const double th = kTwoPi * kv.dot(x);
        const Vec unit = kv / kv.norm();
        J.col(2 * m) = -std::sin(th) * unit;
        J.col(2 * m + 1) = std::cos(th) * unit;
      }
      jac_.push_back(std::move(J));
    }
  }

  int parameters() const { return jac_.empty() ? 0 : static_cast<int>(jac_.front().cols()); }

  // H(x_i, c + J_i theta) at every grid point.
  std::vector<double> values(const Eigen::VectorXd& theta) const {
    std::vector<double> h(xs_.size());
    for (std::size_t i = 0; i < xs_.size(); ++i) h[i] = fenchel_hamiltonian(model_, {xs_[i], momentum(i, theta)});
    return h;
  }

  double soft_max(const Eigen::VectorXd& theta, double tau) const { return soft_max_of(values(theta), tau); }

  double eval(const Eigen::VectorXd& theta, double tau, Eigen::VectorXd& grad, Eigen::MatrixXd& hess) const {
    const int P = parameters();
    const std::size_t n = xs_.size();
    std::vector<double> h(n);
    std::vector<Eigen::VectorXd> g(n);
    hess = Eigen::MatrixXd::Zero(P, P);
    std::vector<double> w(n);
    std::vector<Eigen::MatrixXd> curv(n);
    for (std::size_t i = 0; i < n; ++i) {
      const FenchelResult f = fenchel_maximizer(model_, {xs_[i], momentum(i, theta)});
      h[i] = f.value;
      g[i] = jac_[i].transpose() * f.velocity;
      const Mat hpp = model_.hess_vv(xs_[i], f.velocity).inverse();
      curv[i] = jac_[i].transpose() * hpp * jac_[i];
    }
    const double hmax = *std::max_element(h.begin(), h.end());
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) z += (w[i] = std::exp(tau * (h[i] - hmax)));
    grad = Eigen::VectorXd::Zero(P);
    for (std::size_t i = 0; i < n; ++i) {
      w[i] /= z;
      grad += w[i] * g[i];
      hess += w[i] * curv[i];
    }
    for (std::size_t i = 0; i < n; ++i) hess += tau * w[i] * (g[i] - grad) * (g[i] - grad).transpose();
    return hmax + std::log(z / static_cast<double>(n)) / tau;
  }

 private:
  Vec momentum(std::size_t i, const Eigen::VectorXd& theta) const {
    Vec p = c_;
    if (theta.size() > 0) p += jac_[i] * theta;
    return p;
  }

  static double soft_max_of(const std::vector<double>& h, double tau) {
    const double hmax = *std::max_element(h.begin(), h.end());
    double z = 0.0;
    for (double v : h) z += std::exp(tau * (v - hmax));
    return hmax + std::log(z / static_cast<double>(h.size())) / tau;
  }

  const Lagrangian& model_;
  Vec c_;
  std::vector<Vec> xs_;
  std::vector<Eigen::MatrixXd> jac_;
};

}  // namespace

InfMaxResult inf_max_alpha(const Model& model, const Vec& c, const InfMaxOptions& opts) {
  const int d = model->dim();
  if (c.size() != d) throw Error(ErrorKind::BadInput, "cohomology dimension mismatch");
  const int order = d == 1 ? opts.fourier_order : opts.fourier_order_multi;
  const int npts = d == 1 ? opts.x_points : opts.x_points_multi;
  const std::vector<IVec> modes = half_lattice(d, order);
  const InfMaxObjective obj(*model, c, modes, torus_grid(d, npts));
  const int P = obj.parameters();

  InfMaxResult res;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(P);
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  const int stages = std::max(opts.stages, 1);
  for (int s = 0; s < stages; ++s) {
    const double tau =
        stages == 1 ? opts.tau_end : opts.tau_start * std::pow(opts.tau_end / opts.tau_start, double(s) / (stages - 1));
    for (int it = 0; it < opts.newton_iterations; ++it) {
      const double f = obj.eval(theta, tau, grad, hess);
      ++res.iterations;
      if (P == 0 || grad.norm() <= 1e-12) break;
      const double ridge = 1e-10 * (1.0 + hess.diagonal().cwiseAbs().maxCoeff());
      hess.diagonal().array() += ridge;
      const Eigen::VectorXd step = -hess.ldlt().solve(grad);
      const double slope = grad.dot(step);
      if (!(slope < 0.0)) break;
      double t = 1.0;
      bool moved = false;
      for (int bt = 0; bt < 40; ++bt, t *= 0.5) {
        const Eigen::VectorXd trial = theta + t * step;
        const double ft = obj.soft_max(trial, tau);
        if (ft <= f + 1e-4 * t * slope) {
          moved = f - ft > 1e-15 * (1.0 + std::abs(f));
          theta = trial;
          break;
        }
      }
      if (!moved) break;
    }
  }
  res.soft_value = obj.soft_max(theta, opts.tau_end);

  // Report the true max of H(x, c + du) on a finer grid.
  const InfMaxObjective check(*model, c, modes, torus_grid(d, npts * std::max(opts.check_refinement, 1)));
  const std::vector<double> h = check.values(theta);
  res.value = *std::max_element(h.begin(), h.end());
  res.u = FourierSeries(d);
  for (std::size_t m = 0; m < modes.size(); ++m) {
    // d/dx of (a cos + b sin)(2 pi k.x) / (2 pi |k|) gives the unit columns.
    const double scale = 1.0 / (kTwoPi * modes[m].cast<double>().norm());
    res.u.add_mode(modes[m], theta[2 * m] * scale, theta[2 * m + 1] * scale);
  }
  return res;
}

AlphaSample alpha(const Model& model, const Vec& c, AlphaRoute route, const AlphaOptions& opts) {
  if (c.size() != model->dim()) throw Error(ErrorKind::BadInput, "cohomology dimension mismatch");
  for (Eigen::Index i = 0; i < c.size(); ++i)
    if (!std::isfinite(c[i])) throw Error(ErrorKind::BadInput, "cohomology class must be finite");
  AlphaSample s;
  s.c = c;
  s.route = route;
  switch (route) {
    case AlphaRoute::CriticalValue: {
      const ActionSolver solver(model, OneForm(c), accurate_policy());
      const CriticalValueResult r = mane_critical_value(solver, opts.critical);
      s.value = r.value;
      s.diagnostics["bracket_width"] = r.bracket_hi - r.bracket_lo;
      s.diagnostics["bisection_steps"] = r.bisection_steps;
      s.diagnostics["loop_T"] = r.best_loop.T;
      break;
    }
    case AlphaRoute::ClosedMeasureLP: {
      const LPMeasureResult r = solve_holonomic_lp(model, OneForm(c), opts.lp);
      s.value = -r.value;
      s.diagnostics["pivots"] = static_cast<double>(r.pivots);
      s.diagnostics["atoms"] = static_cast<double>(r.measure.atoms.size());
      break;
    }
    case AlphaRoute::InfMaxSubsolution: {
      const InfMaxResult r = inf_max_alpha(model, c, opts.inf_max);
      s.value = r.value;
      s.diagnostics["soft_max"] = r.soft_value;
      s.diagnostics["newton_iterations"] = r.iterations;
      break;
    }
  }
  return s;
}

AlphaTable::AlphaTable(std::vector<std::vector<double>> axes, std::vector<double> values, Evaluator eval)
    : axes_(std::move(axes)), values_(std::move(values)), eval_(std::move(eval)) {
  std::size_t n = 1;
  for (const auto& a : axes_) {
    if (a.empty()) throw Error(ErrorKind::BadInput, "empty alpha table axis");
    if (!std::is_sorted(a.begin(), a.end())) throw Error(ErrorKind::BadInput, "alpha table axis must be increasing");
    n *= a.size();
  }
  if (axes_.empty() || values_.size() != n) throw Error(ErrorKind::BadInput, "alpha table shape mismatch");
}

AlphaTable AlphaTable::build(const Model& model, std::vector<std::vector<double>> axes, AlphaRoute route,
                             const AlphaOptions& opts) {
  std::size_t n = 1;
  for (const auto& a : axes) n *= a.size();
  AlphaTable shape(axes, std::vector<double>(n, 0.0));
  std::vector<double> values(n);
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < static_cast<long>(n); ++i) {
    try {
      values[static_cast<std::size_t>(i)] = alpha(model, shape.node(static_cast<std::size_t>(i)), route, opts).value;
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  Evaluator eval = [model, route, opts](const Vec& c) { return alpha(model, c, route, opts).value; };
  return AlphaTable(std::move(axes), std::move(values), std::move(eval));
}

std::vector<int> AlphaTable::index(std::size_t flat) const {
  std::vector<int> idx(axes_.size());
  for (std::size_t a = 0; a < axes_.size(); ++a) {
    idx[a] = static_cast<int>(flat % axes_[a].size());
    flat /= axes_[a].size();
  }
  return idx;
}

std::size_t AlphaTable::flat(const std::vector<int>& idx) const {
  std::size_t f = 0;
  for (std::size_t a = axes_.size(); a-- > 0;) f = f * axes_[a].size() + static_cast<std::size_t>(idx[a]);
  return f;
}

Vec AlphaTable::node(std::size_t f) const {
  const std::vector<int> idx = index(f);
  Vec c(dim());
  for (int a = 0; a < dim(); ++a) c[a] = axes_[static_cast<std::size_t>(a)][static_cast<std::size_t>(idx[a])];
  return c;
}

double AlphaTable::evaluate(const Vec& c) const {
  if (!eval_) throw Error(ErrorKind::BadInput, "alpha table has no evaluator");
  return eval_(c);
}

namespace {

// For concave samples g the maximum near node i is at most the crossing of the
// secants through nodes (i-2, i-1) and (i+1, i+2). Unlike the fitted parabola
// this stays exact at a corner of g, which beta has at the ends of a flat.
double secant_bound(const AlphaTable& table, const std::vector<double>& g, int i) {
  const auto& c = table.axes()[0];
  const int n = static_cast<int>(c.size());
  if (i < 2 || i + 2 >= n) return std::numeric_limits<double>::infinity();
  const double s1 = (g[i - 1] - g[i - 2]) / (c[i - 1] - c[i - 2]);
  const double s2 = (g[i + 2] - g[i + 1]) / (c[i + 2] - c[i + 1]);
  if (!(s1 > s2)) return std::max({g[i - 1], g[i], g[i + 1]});
  const double x = (g[i + 1] - s2 * c[i + 1] - g[i - 1] + s1 * c[i - 1]) / (s1 - s2);
  return g[i - 1] + s1 * (x - c[i - 1]);
}

}  // namespace

BetaSample beta(const AlphaTable& table, const Vec& h) {
  const int d = table.dim();
  if (h.size() != d) throw Error(ErrorKind::BadInput, "rotation vector dimension mismatch");
  const std::size_t n = table.size();
  std::vector<double> g(n);
  double gmax = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = table.node(i).dot(h) - table.values()[i];
    gmax = std::max(gmax, g[i]);
  }
  // On a flat stretch of alpha the maximum is attained on many nodes; take the
  // middle one so its stencil stays inside the flat.
  std::vector<std::size_t> ties;
  const double tie_tol = 1e-12 * (1.0 + std::abs(gmax));
  for (std::size_t i = 0; i < n; ++i)
    if (g[i] >= gmax - tie_tol) ties.push_back(i);
  const std::size_t best = ties[ties.size() / 2];
  const std::vector<int> idx = table.index(best);
  for (int a = 0; a < d; ++a)
    if (idx[a] == 0 || idx[a] + 1 == static_cast<int>(table.axes()[a].size()))
      throw Error(ErrorKind::SupOnBoundary, "sup of c.h - alpha(c) lies on the table boundary");

  BetaSample out;
  out.h = h;
  out.value = g[best];
  out.supporting_c = table.node(best);

  // Quadratic model q(delta) = a + b.delta + 1/2 delta^T Q delta on the 3^d stencil.
  const int params = 1 + d + d * (d + 1) / 2;
  std::vector<std::vector<int>> stencil;
  {
    std::vector<int> off(static_cast<std::size_t>(d), -1);
    while (true) {
      stencil.push_back(off);
      int a = 0;
      while (a < d && off[a] == 1) off[a++] = -1;
      if (a == d) break;
      ++off[a];
    }
  }
  Eigen::MatrixXd X(static_cast<Eigen::Index>(stencil.size()), params);
  Eigen::VectorXd y(static_cast<Eigen::Index>(stencil.size()));
  Vec spacing(d);
  for (int a = 0; a < d; ++a) {
    const auto& ax = table.axes()[a];
    spacing[a] = 0.5 * (ax[idx[a] + 1] - ax[idx[a] - 1]);
  }
  for (std::size_t s = 0; s < stencil.size(); ++s) {
    std::vector<int> j = idx;
    for (int a = 0; a < d; ++a) j[a] += stencil[s][a];
    const std::size_t f = table.flat(j);
    const Vec delta = table.node(f) - out.supporting_c;
    int col = 0;
    X(s, col++) = 1.0;
    for (int a = 0; a < d; ++a) X(s, col++) = delta[a];
    for (int a = 0; a < d; ++a)
      for (int b = a; b < d; ++b) X(s, col++) = (a == b ? 0.5 : 1.0) * delta[a] * delta[b];
    y[s] = g[f];
  }
  const Eigen::VectorXd coef = X.colPivHouseholderQr().solve(y);
  Vec b(d);
  Mat Q(d, d);
  int col = 1;
  for (int a = 0; a < d; ++a) b[a] = coef[col++];
  for (int a = 0; a < d; ++a)
    for (int bb = a; bb < d; ++bb) Q(a, bb) = Q(bb, a) = coef[col++];
  Eigen::SelfAdjointEigenSolver<Mat> es(Q);
  const double curvature_floor = 1e-9;
  if (es.eigenvalues().maxCoeff() < -curvature_floor) {
    const Vec delta = -Q.ldlt().solve(b);
    bool inside = true;
    for (int a = 0; a < d; ++a) inside = inside && std::abs(delta[a]) <= spacing[a];
    double q = coef[0] + b.dot(delta) + 0.5 * delta.dot(Q * delta);
    if (d == 1) q = std::min(q, secant_bound(table, g, idx[0]));
    if (inside && q >= out.value) {
      out.value = q;
      out.supporting_c = out.supporting_c + delta;
    }
  }
  return out;
}

namespace {

int node_index(const std::vector<double>& axis, double c) {
  for (std::size_t i = 0; i < axis.size(); ++i)
    if (std::abs(axis[i] - c) <= 1e-9 * (1.0 + std::abs(c))) return static_cast<int>(i);
  return -1;
}

}  // namespace

std::vector<Interval> subderivative_interval(const AlphaTable& table, const Vec& c, double flat_tolerance) {
  const int d = table.dim();
  if (c.size() != d) throw Error(ErrorKind::BadInput, "cohomology dimension mismatch");
  std::vector<int> idx(static_cast<std::size_t>(d));
  for (int a = 0; a < d; ++a) {
    idx[a] = node_index(table.axes()[a], c[a]);
    if (idx[a] < 0) throw Error(ErrorKind::BadInput, "subderivative requested off the table nodes");
  }
  const double a0 = table.at(idx);
  std::vector<Interval> out;
  for (int a = 0; a < d; ++a) {
    const auto& ax = table.axes()[a];
    if (idx[a] < 2 || idx[a] + 2 >= static_cast<int>(ax.size()))
      throw Error(ErrorKind::BadInput, "subderivative needs two table nodes on each side");
    auto side = [&](int dir) {
      std::vector<int> j1 = idx, j2 = idx;
      j1[a] += dir;
      j2[a] += 2 * dir;
      const double d1 = std::abs(ax[j1[a]] - ax[idx[a]]);
      const double d2 = std::abs(ax[j2[a]] - ax[idx[a]]);
      const double r1 = table.at(j1) - a0;
      const double r2 = table.at(j2) - a0;
      if (std::abs(r1) <= flat_tolerance && std::abs(r2) <= flat_tolerance) return 0.0;
      // Quotients carry a first-order error in the step; eliminate it.
      const double q1 = dir * r1 / d1;
      const double q2 = dir * r2 / d2;
      return (d2 * q1 - d1 * q2) / (d2 - d1);
    };
    const double left = side(-1);
    const double right = side(1);
    out.push_back({std::min(left, right), std::max(left, right)});
  }
  return out;
}

Interval beta_subderivative_at_zero(const AlphaTable& table, double tolerance, double edge_width) {
  if (table.dim() != 1) throw Error(ErrorKind::BadInput, "flat detection needs a one-dimensional table");
  const auto& ax = table.axes()[0];
  const int z = node_index(ax, 0.0);
  if (z < 0) throw Error(ErrorKind::BadInput, "alpha table must contain c = 0");
  const double a0 = table.values()[static_cast<std::size_t>(z)];
  auto flat = [&](double value) { return value <= a0 + tolerance; };
  auto edge = [&](int dir) {
    int last = z;
    while (true) {
      const int next = last + dir;
      if (next < 0 || next >= static_cast<int>(ax.size()))
        throw Error(ErrorKind::SupOnBoundary, "alpha flat reaches the table boundary");
      if (!flat(table.values()[static_cast<std::size_t>(next)])) break;
      last = next;
    }
    double in = ax[last], out = ax[last + dir];
    if (!table.can_evaluate()) return in;
    while (std::abs(out - in) > edge_width) {
      const double mid = 0.5 * (in + out);
      (flat(table.evaluate(vec1(mid))) ? in : out) = mid;
    }
    return 0.5 * (in + out);
  };
  const double lo = edge(-1);
  const double hi = edge(1);
  return {lo, hi};
}

}  // namespace weakkam
