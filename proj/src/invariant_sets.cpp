#include "weakkam/invariant_sets.hpp"

#include "weakkam/csv.hpp"
#include "weakkam/error.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

namespace weakkam {

std::string_view to_string(SetLabel s) {
  switch (s) {
    case SetLabel::Mather: return "mather";
    case SetLabel::Aubry: return "aubry";
    case SetLabel::Mane: return "mane";
  }
  return "mather";
}

SetLabel set_label_from_string(std::string_view s) {
  if (s == "mather") return SetLabel::Mather;
  if (s == "aubry") return SetLabel::Aubry;
  if (s == "mane") return SetLabel::Mane;
  throw Error(ErrorKind::BadInput, "unknown set label '" + std::string(s) + "'");
}

std::vector<Vec> PhasePointSet::projection() const {
  std::vector<Vec> xs;
  for (const auto& p : points) xs.push_back(p.x);
  auto less = [](const Vec& a, const Vec& b) {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
  };
  std::sort(xs.begin(), xs.end(), less);
  std::vector<Vec> out;
  for (const auto& x : xs)
    if (out.empty() || torus_distance(out.back(), x) > 1e-12) out.push_back(x);
  return out;
}

// ---------------------------------------------------------------------------
// Mather set

PhasePointSet mather_set(const Model& model, const Vec& c, const MatherSetOptions& opts) {
  if (c.size() != model->dim()) throw Error(ErrorKind::BadInput, "cohomology dimension");
  const LPMeasureResult lp = solve_holonomic_lp(model, OneForm(c), opts.grid);
  PhasePointSet out;
  out.label = SetLabel::Mather;
  out.c = c;
  out.tolerance.grid_step = 1.0 / opts.grid.x_points;
  out.tolerance.velocity_step = (opts.grid.v_max - opts.grid.v_min) / std::max(1, opts.grid.v_points - 1);
  out.tolerance.threshold = opts.weight_threshold;
  for (const auto& a : lp.measure.atoms)
    if (a.weight > opts.weight_threshold) out.points.push_back({a.x, a.v, energy(*model, a.x, a.v)});
  return out;
}

// ---------------------------------------------------------------------------
// Energy shell

namespace {

// Root of E(x, dir * s) = alpha in s > 0; E(x, s u) increases in s for a
// Tonelli Lagrangian. Zero when the shell touches v = 0 within tolerance.
double shell_root(const Lagrangian& model, double x, double alpha, double dir, double tolerance) {
  const Vec xv = vec1(x);
  auto excess = [&](double s) { return energy(model, xv, vec1(dir * s)) - alpha; };
  const double e0 = excess(0.0);
  if (e0 >= -tolerance * (1.0 + std::abs(alpha))) return 0.0;
  double hi = 1.0;
  double ehi = excess(hi);
  for (int doublings = 0; ehi < 0.0; ++doublings) {
    if (doublings > 60) throw Error(ErrorKind::NoConvergence, "energy shell not bracketed");
    hi *= 2.0;
    ehi = excess(hi);
  }
  std::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve(excess, 0.0, hi, e0, ehi,
                                                   boost::math::tools::eps_tolerance<double>(50), iters);
  return dir * 0.5 * (r.first + r.second);
}

}  // namespace

std::vector<double> energy_shell_velocities(const Lagrangian& model, double x, double alpha, double tolerance) {
  if (model.dim() != 1) throw Error(ErrorKind::BadInput, "energy shell sampling needs d = 1");
  const double e0 = energy(model, vec1(x), vec1(0.0)) - alpha;
  if (e0 > tolerance * (1.0 + std::abs(alpha))) return {};
  if (e0 >= -tolerance * (1.0 + std::abs(alpha))) return {0.0};
  return {shell_root(model, x, alpha, -1.0, tolerance), shell_root(model, x, alpha, 1.0, tolerance)};
}

// ---------------------------------------------------------------------------
// Orbit tests

OrbitTester::OrbitTester(const Model& model, const Vec& c, double alpha_c, const ShellSetOptions& opts)
    : model_(model),
      form_(c),
      alpha_(alpha_c),
      opts_(opts),
      phi_(model, OneForm(c), opts.policy, opts.potential) {
  if (model->dim() != 1 || c.size() != 1) throw Error(ErrorKind::BadInput, "shell sets need d = 1");
  if (opts.windows.empty()) throw Error(ErrorKind::BadInput, "no test windows");
  phi_.loops();
  alpha_discrete_ = mane_critical_value(phi_.solver()).value;
}

// In d = 1 the shell is a union of graphs v = v_+(x), v = v_-(x), and the
// orbit through a shell point solves x' = v_branch(x). Integrating that
// reduced flow keeps separatrix orbits on the separatrix, where the full flow
// amplifies roundoff like exp(lambda t) near the hyperbolic points.
WindowTest OrbitTester::window(double x, double v, double W, bool with_forward, bool with_backward) const {
  if (!(W > 0.0)) throw Error(ErrorKind::BadInput, "window length");
  const double dir = v > 0.0 ? 1.0 : -1.0;
  const bool at_rest = v == 0.0;
  auto vel = [&](double y) { return at_rest ? 0.0 : shell_root(*model_, y, alpha_, dir, kShellTolerance); };
  auto density = [&](double y, double w) {
    return model_->value(vec1(y), vec1(w)) - form_.eval(vec1(y)).dot(vec1(w)) + alpha_;
  };
  const int steps = std::max(1, static_cast<int>(std::ceil(0.5 * W / opts_.orbit_dt)));
  // RK4 on the branch ODE over half the window in time direction sgn.
  auto run = [&](double sgn, double& end) {
    const double h = sgn * 0.5 * W / steps;
    double y = x, w = vel(y), a = 0.0, prev = density(y, w);
    for (int i = 0; i < steps; ++i) {
      const double k1 = w;
      const double k2 = vel(y + 0.5 * h * k1);
      const double k3 = vel(y + 0.5 * h * k2);
      const double k4 = vel(y + h * k3);
      y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      w = vel(y);
      const double cur = density(y, w);
      a += 0.5 * std::abs(h) * (prev + cur);
      prev = cur;
    }
    end = y;
    return a;
  };
  double xa = x, xb = x;
  WindowTest t;
  t.window = W;
  t.action = run(-1.0, xa) + run(1.0, xb);
  const Vec a = wrap_unit(vec1(xa));
  const Vec b = wrap_unit(vec1(xb));
  const double nan = std::numeric_limits<double>::quiet_NaN();
  t.forward = with_forward ? phi_(alpha_discrete_, a, b).value : nan;
  t.backward = with_backward ? phi_(alpha_discrete_, b, a).value : nan;
  return t;
}

bool OrbitTester::within(double action, double phi) const {
  return std::isfinite(phi) && std::abs(action - phi) <= opts_.semi_static_tolerance * (1.0 + std::abs(phi));
}

// Longest window first: it rejects most often.
bool OrbitTester::semi_static(double x, double v) const {
  for (auto it = opts_.windows.rbegin(); it != opts_.windows.rend(); ++it) {
    const WindowTest t = window(x, v, *it, true, false);
    if (!within(t.action, t.forward)) return false;
  }
  return true;
}

bool OrbitTester::is_static(double x, double v) const {
  for (auto it = opts_.windows.rbegin(); it != opts_.windows.rend(); ++it) {
    const WindowTest t = window(x, v, *it, false, true);
    if (!within(t.action, -t.backward)) return false;
  }
  return true;
}

namespace {

PhasePointSet shell_set_skeleton(SetLabel label, const Vec& c, const ShellSetOptions& opts, double alpha_c,
                                 double threshold) {
  if (opts.x_points < 1) throw Error(ErrorKind::BadInput, "x grid");
  PhasePointSet out;
  out.label = label;
  out.c = c;
  out.tolerance.grid_step = 1.0 / opts.x_points;
  out.tolerance.threshold = threshold;
  out.tolerance.energy = kShellTolerance * (1.0 + std::abs(alpha_c));
  return out;
}

// Runs accept(i) for every grid index concurrently and concatenates the
// per-index point lists in index order.
template <class Accept>
void fold_grid(int n, PhasePointSet& out, Accept accept) {
  std::vector<std::vector<PhasePoint>> per(n);
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    try {
      per[i] = accept(i);
    } catch (...) {
#pragma omp critical(weakkam_shell_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  for (auto& pts : per)
    for (auto& p : pts) out.points.push_back(std::move(p));
}

}  // namespace

PhasePointSet mane_set(const Model& model, const Vec& c, double alpha_c, const ShellSetOptions& opts) {
  PhasePointSet out = shell_set_skeleton(SetLabel::Mane, c, opts, alpha_c, opts.semi_static_tolerance);
  const OrbitTester tester(model, c, alpha_c, opts);
  fold_grid(opts.x_points, out, [&](int i) {
    const double x = static_cast<double>(i) / opts.x_points;
    std::vector<PhasePoint> pts;
    for (double v : energy_shell_velocities(*model, x, alpha_c, kShellTolerance))
      if (tester.semi_static(x, v)) pts.push_back({vec1(x), vec1(v), energy(*model, vec1(x), vec1(v))});
    return pts;
  });
  return out;
}

PhasePointSet aubry_set(const Model& model, const Vec& c, double alpha_c, const ShellSetOptions& opts) {
  PhasePointSet out = shell_set_skeleton(SetLabel::Aubry, c, opts, alpha_c, opts.aubry_threshold);
  const OrbitTester tester(model, c, alpha_c, opts);
  fold_grid(opts.x_points, out, [&](int i) {
    const double x = static_cast<double>(i) / opts.x_points;
    std::vector<PhasePoint> pts;
    const Vec xv = vec1(x);
    const BarrierResult h = peierls_barrier(tester.potential().solver(), tester.discrete_alpha(), xv, xv, opts.barrier);
    if (h.value > opts.aubry_threshold) return pts;
    for (double v : energy_shell_velocities(*model, x, alpha_c, kShellTolerance))
      if (tester.is_static(x, v)) pts.push_back({xv, vec1(v), energy(*model, xv, vec1(v))});
    return pts;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Comparisons

namespace {

double phase_distance(const PhasePoint& a, const PhasePoint& b) {
  return std::hypot(torus_distance(a.x, b.x), (a.v - b.v).norm());
}

nlohmann::json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

nlohmann::json point_json(const PhasePoint& p) { return {{"x", vec_json(p.x)}, {"v", vec_json(p.v)}, {"E", p.energy}}; }

// JSON has no infinity; an empty target set is reported as null.
nlohmann::json finite_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

}  // namespace

double one_sided_hausdorff(const PhasePointSet& a, const PhasePointSet& b) {
  double worst = 0.0;
  for (const auto& p : a.points) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : b.points) best = std::min(best, phase_distance(p, q));
    worst = std::max(worst, best);
  }
  return worst;
}

double hausdorff(const PhasePointSet& a, const PhasePointSet& b) {
  return std::max(one_sided_hausdorff(a, b), one_sided_hausdorff(b, a));
}

InclusionReport check_inclusions(const PhasePointSet& mather, const PhasePointSet& aubry, const PhasePointSet& mane,
                                 double alpha_c) {
  if (mather.c.size() != aubry.c.size() || aubry.c.size() != mane.c.size() ||
      (mather.c - aubry.c).norm() > 1e-12 || (aubry.c - mane.c).norm() > 1e-12)
    throw Error(ErrorKind::BadInput, "sets at different cohomology classes");
  InclusionReport r;
  r.mather_to_aubry = one_sided_hausdorff(mather, aubry);
  r.aubry_to_mane = one_sided_hausdorff(aubry, mane);
  r.aubry_to_mather = one_sided_hausdorff(aubry, mather);
  r.mane_to_aubry = one_sided_hausdorff(mane, aubry);
  r.mather_aubry_tolerance = mather.tolerance.resolution() + aubry.tolerance.resolution();
  r.aubry_mane_tolerance = aubry.tolerance.resolution() + mane.tolerance.resolution();
  for (const auto& p : mane.points) r.max_energy_defect = std::max(r.max_energy_defect, std::abs(p.energy - alpha_c));
  r.energy_tolerance = 2.0 * mane.tolerance.energy;
  r.pass = r.mather_to_aubry <= r.mather_aubry_tolerance && r.aubry_to_mane <= r.aubry_mane_tolerance &&
           r.max_energy_defect <= r.energy_tolerance;
  return r;
}

nlohmann::json InclusionReport::to_json() const {
  return {{"check", "inclusions"},
          {"pass", pass},
          {"mather_to_aubry", finite_or_null(mather_to_aubry)},
          {"mather_aubry_tolerance", mather_aubry_tolerance},
          {"aubry_to_mane", finite_or_null(aubry_to_mane)},
          {"aubry_mane_tolerance", aubry_mane_tolerance},
          {"max_energy_defect", max_energy_defect},
          {"energy_tolerance", energy_tolerance},
          {"aubry_to_mather", finite_or_null(aubry_to_mather)},
          {"mane_to_aubry", finite_or_null(mane_to_aubry)}};
}

GraphReport check_graph_property(const PhasePointSet& set, double max_slope) {
  if (set.empty()) throw Error(ErrorKind::BadInput, "graph check on an empty set");
  GraphReport r;
  const double reach = set.tolerance.grid_step * (1.0 + 1e-9);
  const double slack = set.tolerance.velocity_step + 1e-9;
  double worst_excess = 0.0;
  for (std::size_t i = 0; i < set.points.size(); ++i) {
    for (std::size_t j = i + 1; j < set.points.size(); ++j) {
      const auto& p = set.points[i];
      const auto& q = set.points[j];
      const double dx = torus_distance(p.x, q.x);
      if (dx > reach) continue;
      const double dv = (p.v - q.v).norm();
      if (dx > 1e-12) r.lipschitz = std::max(r.lipschitz, dv / dx);
      const double excess = dv - (max_slope * dx + slack);
      if (excess > worst_excess) {
        worst_excess = excess;
        r.pass = false;
        r.violation = std::make_pair(p, q);
      }
    }
  }
  return r;
}

nlohmann::json GraphReport::to_json() const {
  nlohmann::json j = {{"check", "graph"}, {"pass", pass}, {"lipschitz", lipschitz}};
  if (violation) j["violation"] = {point_json(violation->first), point_json(violation->second)};
  return j;
}

EquivarianceReport check_fiber_translation_equivariance(const Model& model, const Vec& base_c, const OneForm& eta,
                                                        const MatherSetOptions& opts, double tolerance) {
  if (eta.dim() != model->dim() || base_c.size() != model->dim()) throw Error(ErrorKind::BadInput, "form dimension");
  const Model shifted_model = shift_by_one_form(model, eta);
  EquivarianceReport r;
  r.tolerance = tolerance;
  r.shifted = mather_set(shifted_model, base_c, opts);
  const PhasePointSet original = mather_set(model, base_c + eta.cohomology(), opts);
  r.mapped = original;
  r.mapped.c = base_c;
  for (auto& p : r.mapped.points) {
    CotangentPoint q = legendre_transform(*model, p.x, p.v);
    q.p -= eta.eval(p.x);
    p.v = inverse_legendre(*shifted_model, q).v;
    p.energy = energy(*shifted_model, p.x, p.v);
  }
  r.distance = hausdorff(r.shifted, r.mapped);
  r.pass = r.distance <= tolerance;
  return r;
}

nlohmann::json EquivarianceReport::to_json() const {
  return {{"check", "fiber_translation"},
          {"pass", pass},
          {"distance", finite_or_null(distance)},
          {"tolerance", tolerance},
          {"shifted_points", shifted.size()},
          {"mapped_points", mapped.size()}};
}

// ---------------------------------------------------------------------------
// Export

void write_set_csv(std::ostream& os, const PhasePointSet& set) {
  const int d = static_cast<int>(set.c.size());
  std::vector<std::string> head;
  for (int i = 0; i < d; ++i) head.push_back("x" + std::to_string(i + 1));
  for (int i = 0; i < d; ++i) head.push_back("v" + std::to_string(i + 1));
  head.push_back("E");
  head.push_back("label");
  for (int i = 0; i < d; ++i) head.push_back("c" + std::to_string(i + 1));
  write_csv_row(os, head);
  for (const auto& p : set.points) {
    std::vector<std::string> row;
    for (int i = 0; i < d; ++i) row.push_back(fmt12(p.x[i]));
    for (int i = 0; i < d; ++i) row.push_back(fmt12(p.v[i]));
    row.push_back(fmt12(p.energy));
    row.emplace_back(to_string(set.label));
    for (int i = 0; i < d; ++i) row.push_back(fmt12(set.c[i]));
    write_csv_row(os, row);
  }
}

nlohmann::json set_to_json(const PhasePointSet& set) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : set.points) pts.push_back(point_json(p));
  return {{"label", to_string(set.label)},
          {"c", vec_json(set.c)},
          {"tolerance",
           {{"grid_step", set.tolerance.grid_step},
            {"velocity_step", set.tolerance.velocity_step},
            {"threshold", set.tolerance.threshold},
            {"energy", set.tolerance.energy}}},
          {"points", pts}};
}

}  // namespace weakkam
