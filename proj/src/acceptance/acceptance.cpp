#include "weakkam/acceptance.hpp"

#include "weakkam/duality.hpp"
#include "weakkam/error.hpp"
#include "weakkam/invariant_sets.hpp"
#include "weakkam/testing/pendulum_oracle.hpp"
#include "weakkam/weak_kam.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <random>

namespace weakkam {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(lo + (hi - lo) * i / (n - 1));
  return out;
}

std::string_view kind_name(AcceptanceCheck::Kind k) {
  switch (k) {
    case AcceptanceCheck::Kind::Near: return "near";
    case AcceptanceCheck::Kind::AtMost: return "at_most";
    case AcceptanceCheck::Kind::AtLeast: return "at_least";
    case AcceptanceCheck::Kind::Holds: return "holds";
  }
  return "near";
}

nlohmann::json number(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

// Runs body(i) for i < n in parallel; the first exception is rethrown.
void parallel_for(int n, const std::function<void(int)>& body) {
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
#pragma omp critical(weakkam_acceptance_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

double circle_distance(double a, double b) { return std::abs(minimal_image(vec1(a - b))[0]); }

}  // namespace

// ---------------------------------------------------------------------------
// Checks

nlohmann::json AcceptanceCheck::to_json() const {
  return {{"name", name},     {"kind", kind_name(kind)}, {"measured", number(measured)},
          {"target", target}, {"tolerance", tolerance},  {"pass", pass}};
}

AcceptanceCheck near_check(std::string name, double measured, double target, double tolerance) {
  return {std::move(name), AcceptanceCheck::Kind::Near, measured, target, tolerance,
          std::isfinite(measured) && std::abs(measured - target) <= tolerance};
}

AcceptanceCheck at_most_check(std::string name, double measured, double bound) {
  return {std::move(name), AcceptanceCheck::Kind::AtMost, measured, bound, 0.0, measured <= bound};
}

AcceptanceCheck at_least_check(std::string name, double measured, double bound) {
  return {std::move(name), AcceptanceCheck::Kind::AtLeast, measured, bound, 0.0, measured >= bound};
}

AcceptanceCheck holds_check(std::string name, bool holds) {
  return {std::move(name), AcceptanceCheck::Kind::Holds, holds ? 1.0 : 0.0, 1.0, 0.0, holds};
}

const std::vector<CriterionInfo>& acceptance_criteria() {
  static const std::vector<CriterionInfo> list{
      {1, "pendulum alpha flat and its edge"},
      {2, "alpha routes agree"},
      {3, "alpha beyond the flat"},
      {4, "beta duality"},
      {5, "Mane potential"},
      {6, "Peierls barrier"},
      {7, "sets and inclusions"},
      {8, "doubled pendulum discriminator"},
      {9, "weak KAM solution"},
      {10, "integrable sanity"},
      {11, "fiber-translation equivariance"},
      {12, "property suites"},
  };
  return list;
}

bool CriterionResult::pass() const {
  if (!error.empty() || checks.empty()) return false;
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

nlohmann::json CriterionResult::to_json() const {
  nlohmann::json j{{"id", id}, {"title", title}, {"pass", pass()}, {"seconds", seconds}};
  j["checks"] = nlohmann::json::array();
  for (const auto& c : checks) j["checks"].push_back(c.to_json());
  if (!error.empty()) j["error"] = error;
  return j;
}

std::string summary_line(const CriterionResult& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "criterion %2d %s  %s (%.1f s)", r.id, r.pass() ? "PASS" : "FAIL", r.title.c_str(),
                r.seconds);
  std::string line = buf;
  if (!r.error.empty()) line += "  error: " + r.error;
  for (const auto& c : r.checks)
    if (!c.pass) {
      std::snprintf(buf, sizeof buf, "  [%s measured %.6g target %.6g tol %.3g]", c.name.c_str(), c.measured,
                    c.target, c.tolerance);
      line += buf;
    }
  return line;
}

nlohmann::json acceptance_report(const std::vector<CriterionResult>& results, const AcceptanceOptions& opts) {
  nlohmann::json j;
  j["criteria"] = nlohmann::json::array();
  bool pass = !results.empty();
  for (const auto& r : results) {
    j["criteria"].push_back(r.to_json());
    pass = pass && r.pass();
  }
  j["pass"] = pass;
  j["options"] = {{"grid", opts.grid ? nlohmann::json(*opts.grid) : nlohmann::json(nullptr)}, {"seed", opts.seed}};
  return j;
}

// ---------------------------------------------------------------------------
// Shared quantities

struct AcceptanceSuite::Shared {
  Model pendulum = make_pendulum();
  std::unique_ptr<ManePotential> phi;
  std::optional<Interval> flat;
  // Critical potential on ten random points, row = source.
  std::vector<double> points;
  std::vector<std::vector<double>> phi_table;

  const ManePotential& potential() {
    if (!phi) {
      phi = std::make_unique<ManePotential>(pendulum, OneForm::constant(0.0));
      phi->loops();
    }
    return *phi;
  }

  const Interval& alpha_flat() {
    if (!flat) {
      const AlphaTable t = AlphaTable::build(pendulum, {linspace(-2.0, 2.0, 9)}, AlphaRoute::CriticalValue);
      flat = beta_subderivative_at_zero(t);
    }
    return *flat;
  }

  void potential_table(std::uint64_t seed) {
    if (!phi_table.empty()) return;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 10; ++i) points.push_back(u(rng));
    const int n = static_cast<int>(points.size());
    phi_table.assign(n, std::vector<double>(n));
    const ManePotential& p = potential();
    parallel_for(n * n, [&](int ij) {
      const int i = ij / n, j = ij % n;
      const PotentialValue v = p(0.0, vec1(points[i]), vec1(points[j]));
      if (!v.finite()) throw Error(ErrorKind::BadInput, "critical potential diverged");
      phi_table[i][j] = v.value;
    });
  }
};

AcceptanceSuite::AcceptanceSuite(AcceptanceOptions opts) : opts_(std::move(opts)), shared_(std::make_unique<Shared>()) {}
AcceptanceSuite::~AcceptanceSuite() = default;

std::vector<CriterionResult> AcceptanceSuite::run_all(const std::vector<int>& ids) {
  std::vector<CriterionResult> out;
  if (ids.empty()) {
    for (const auto& c : acceptance_criteria()) out.push_back(run(c.id));
  } else {
    for (int id : ids) out.push_back(run(id));
  }
  return out;
}

namespace {

using Checks = std::vector<AcceptanceCheck>;

ShellSetOptions set_options(const AcceptanceOptions& o) {
  ShellSetOptions s;
  s.x_points = o.grid.value_or(32);
  return s;
}

AlphaOptions alpha_options(const AcceptanceOptions& o) {
  AlphaOptions a;
  if (o.grid) {
    a.lp.x_points = *o.grid;
    a.inf_max.x_points = *o.grid;
  }
  return a;
}

std::string fmt(const char* pattern, double x) {
  char buf[96];
  std::snprintf(buf, sizeof buf, pattern, x);
  return buf;
}

void criterion_flat(AcceptanceSuite::Shared& sh, Checks& out) {
  for (double c : {0.0, 0.5, -0.5, 1.0, -1.0, 1.2, -1.2}) {
    const double a = alpha(sh.pendulum, vec1(c), AlphaRoute::CriticalValue).value;
    out.push_back(near_check(fmt("alpha(%g)", c), a, 0.0, 5e-3));
  }
  const Interval& f = sh.alpha_flat();
  const double edge = oracle::flat_edge();
  out.push_back(near_check("flat upper edge", f.hi, edge, 5e-3));
  out.push_back(near_check("flat lower edge", f.lo, -edge, 5e-3));
}

void criterion_routes(AcceptanceSuite::Shared& sh, const AcceptanceOptions& o, Checks& out) {
  const AlphaOptions opts = alpha_options(o);
  for (double c : {0.0, 1.0, 2.0, 3.0}) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (AlphaRoute r : {AlphaRoute::CriticalValue, AlphaRoute::ClosedMeasureLP, AlphaRoute::InfMaxSubsolution}) {
      const double a = alpha(sh.pendulum, vec1(c), r, opts).value;
      lo = std::min(lo, a);
      hi = std::max(hi, a);
    }
    out.push_back(at_most_check(fmt("route spread at c=%g", c), hi - lo, 5e-3));
  }
}

void criterion_beyond(AcceptanceSuite::Shared& sh, Checks& out) {
  const double a = alpha(sh.pendulum, vec1(2.0), AlphaRoute::CriticalValue).value;
  out.push_back(near_check("alpha(2)", a, oracle::energy_for_momentum(2.0), 5e-3));
}

void criterion_beta(AcceptanceSuite::Shared& sh, const AcceptanceOptions& o, Checks& out) {
  const AlphaTable t =
      AlphaTable::build(sh.pendulum, {linspace(-3.0, 3.0, 61)}, AlphaRoute::ClosedMeasureLP, alpha_options(o));
  out.push_back(near_check("beta(0)", beta(t, vec1(0.0)).value, 0.0, 2e-3));
  const Interval& f = sh.alpha_flat();
  const double edge = oracle::flat_edge();
  out.push_back(near_check("subdifferential of beta at 0, upper", f.hi, edge, 5e-3));
  out.push_back(near_check("subdifferential of beta at 0, lower", f.lo, -edge, 5e-3));
  // beta(h) = c(E) h - E at h = 1 / T(E), E = 1.
  const double h = 1.0 / oracle::rotation_period(1.0);
  out.push_back(near_check("beta(1/T(1))", beta(t, vec1(h)).value, oracle::rotation_momentum(1.0) * h - 1.0, 5e-3));
}

void criterion_potential(AcceptanceSuite::Shared& sh, const AcceptanceOptions& o, Checks& out) {
  const ManePotential& phi = sh.potential();
  const PotentialValue half = phi(0.0, vec1(0.0), vec1(0.5));
  out.push_back(near_check("Phi(0, 1/2)", half.finite() ? half.value : -INFINITY, oracle::critical_potential(0.0, 0.5),
                           1e-3));
  const PotentialValue below = phi(-0.5, vec1(0.3), vec1(0.8));
  out.push_back(holds_check("Phi below the critical value is -infinity", below.minus_infinity));
  out.push_back(holds_check("divergence has a negative loop witness",
                            below.witness.has_value() && below.witness->loop_action < 0.0));
  sh.potential_table(o.seed);
  const auto& P = sh.phi_table;
  const std::size_t n = P.size();
  double worst = -INFINITY;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, P[i][j] - P[i][k] - P[k][j]);
  out.push_back(at_most_check("largest triangle violation over 1000 triples", worst, 1e-6));
}

void criterion_barrier(AcceptanceSuite::Shared& sh, const AcceptanceOptions& o, Checks& out) {
  const ActionSolver& s = sh.potential().solver();
  out.push_back(near_check("h(0, 0)", peierls_barrier(s, 0.0, vec1(0.0), vec1(0.0)).value, 0.0, 1e-3));
  const double two_sided = oracle::critical_potential(0.5, 0.0) + oracle::critical_potential(0.0, 0.5);
  out.push_back(near_check("h(1/2, 1/2)", peierls_barrier(s, 0.0, vec1(0.5), vec1(0.5)).value, two_sided, 5e-3));
  sh.potential_table(o.seed);
  const auto& P = sh.phi_table;
  const int n = static_cast<int>(P.size());
  std::vector<double> gap(n * n);
  BarrierOptions bo;
  bo.stable_rungs = 2;
  parallel_for(n * n, [&](int ij) {
    const int i = ij / n, j = ij % n;
    gap[ij] = peierls_barrier(s, 0.0, vec1(sh.points[i]), vec1(sh.points[j]), bo).value - P[i][j];
  });
  out.push_back(at_least_check("min of h - Phi over 100 pairs", *std::min_element(gap.begin(), gap.end()), -1e-6));
}

void criterion_sets(AcceptanceSuite::Shared& sh, const AcceptanceOptions& o, Checks& out) {
  const ShellSetOptions so = set_options(o);
  for (double c : {0.0, 4.0 / kPi, 2.0}) {
    const double a = oracle::alpha(c);
    const PhasePointSet m = mather_set(sh.pendulum, vec1(c));
    const PhasePointSet au = aubry_set(sh.pendulum, vec1(c), a, so);
    const PhasePointSet mn = mane_set(sh.pendulum, vec1(c), a, so);
    const InclusionReport r = check_inclusions(m, au, mn, a);
    const std::string at = fmt(" at c=%.5g", c);
    out.push_back(at_most_check("Mather in Aubry" + at, r.mather_to_aubry, r.mather_aubry_tolerance));
    out.push_back(at_most_check("Aubry in Mane" + at, r.aubry_to_mane, r.aubry_mane_tolerance));
    out.push_back(at_most_check("Mane on the energy shell" + at, r.max_energy_defect, r.energy_tolerance));
    out.push_back(holds_check("sets nonempty" + at, !m.empty() && !au.empty() && !mn.empty()));
    if (c > 1.0 && c < 1.5) out.push_back(at_least_check("Aubry to Mather gap" + at, r.aubry_to_mather, 0.3));
  }
}

void criterion_doubled(const AcceptanceOptions& o, Checks& out) {
  const Model m = make_pendulum(1, 1.0, 2);
  const ShellSetOptions so = set_options(o);
  const double step = 1.0 / so.x_points;
  const PhasePointSet au = aubry_set(m, vec1(0.0), 0.0, so);
  const PhasePointSet mn = mane_set(m, vec1(0.0), 0.0, so);
  const std::vector<Vec> pa = au.projection();
  out.push_back(near_check("projected Aubry set size", static_cast<double>(pa.size()), 2.0, 0.0));
  for (double target : {0.0, 0.5}) {
    double best = INFINITY;
    for (const Vec& x : pa) best = std::min(best, circle_distance(x[0], target));
    out.push_back(at_most_check(fmt("Aubry point near %g", target), best, step));
  }
  out.push_back(near_check("projected Mane set covers the grid", static_cast<double>(mn.projection().size()),
                           so.x_points, 0.0));
  out.push_back(holds_check("graph check fails for the Mane set", !check_graph_property(mn).pass));
  out.push_back(holds_check("graph check passes for the Aubry set", check_graph_property(au).pass));
}

void criterion_weak_kam(AcceptanceSuite::Shared& sh, const AcceptanceOptions& o, Checks& out) {
  KernelSpec spec;
  spec.points_per_axis = o.grid.value_or(256);
  const OneForm form = OneForm::constant(0.0);
  const Kernel k = load_or_compute_kernel(sh.pendulum, form, spec, o.cache_dir);
  WeakKamOptions wo;
  wo.kernel = spec;
  const WeakKamSolution s = solve_weak_kam(k, wo);
  const std::size_t half = static_cast<std::size_t>(spec.points_per_axis / 2);
  out.push_back(at_most_check("fixed-point residual", s.residual, 1e-3));
  out.push_back(near_check("alpha estimate", s.alpha_estimate, 0.0, 2e-3));
  out.push_back(near_check("u(1/2) - u(0)", s.u[half] - s.u[0], oracle::critical_potential(0.0, 0.5), 5e-3));
  const ResidualField r = subsolution_residual(sh.pendulum, form, s.u, s.alpha_estimate);
  out.push_back(at_most_check("subsolution residual off kinks", r.max_residual, 2e-2));
  const CalibratedOrbit co = extract_calibrated_orbit(sh.pendulum, form, k, s, vec1(0.25), 3);
  bool monotone = true;
  for (std::size_t i = 1; i < co.orbit.size(); ++i)
    monotone = monotone && co.orbit.positions[i][0] >= co.orbit.positions[i - 1][0] - 1e-12;
  out.push_back(holds_check("backward orbit is monotone", monotone));
  out.push_back(at_most_check("backward orbit approaches 0", std::abs(co.orbit.positions.front()[0]), 0.05));
}

void criterion_integrable(Checks& out) {
  const Model f1 = make_free_particle(1), f2 = make_free_particle(2);
  for (double c : {-1.0, 0.3, 1.5})
    out.push_back(near_check(fmt("free1d alpha(%g)", c), alpha(f1, vec1(c), AlphaRoute::InfMaxSubsolution).value,
                             0.5 * c * c, 1e-3));
  const Vec c2 = make_vec({0.5, -1.0});
  out.push_back(near_check("free2d alpha, inf-max", alpha(f2, c2, AlphaRoute::InfMaxSubsolution).value, 0.625, 1e-3));
  AlphaOptions lp2;
  lp2.lp = LPGridSpec{8, -2.0, 2.0, 9, 2};
  out.push_back(near_check("free2d alpha, LP", alpha(f2, c2, AlphaRoute::ClosedMeasureLP, lp2).value, 0.625, 1e-3));

  const AlphaTable t1 = AlphaTable::build(f1, {linspace(-2.0, 2.0, 41)}, AlphaRoute::InfMaxSubsolution);
  out.push_back(near_check("free1d beta(0.7)", beta(t1, vec1(0.7)).value, 0.245, 1e-3));
  const AlphaTable t2 =
      AlphaTable::build(f2, {linspace(-1.5, 1.5, 7), linspace(-1.5, 1.5, 7)}, AlphaRoute::InfMaxSubsolution);
  out.push_back(near_check("free2d beta(0.6, -0.2)", beta(t2, make_vec({0.6, -0.2})).value, 0.2, 1e-3));

  MatherSetOptions m1;
  m1.grid = LPGridSpec{32, -2.8, 2.8, 57, 8};
  double worst = 0.0;
  for (const PhasePoint& p : mather_set(f1, vec1(0.7), m1).points) worst = std::max(worst, std::abs(p.v[0] - 0.7));
  out.push_back(at_most_check("free1d Mather set off v = c", worst, 0.02));
  MatherSetOptions m2;
  m2.grid = LPGridSpec{8, -2.0, 2.0, 9, 2};
  const PhasePointSet s2 = mather_set(f2, c2, m2);
  worst = s2.empty() ? INFINITY : 0.0;
  for (const PhasePoint& p : s2.points) worst = std::max(worst, (p.v - c2).lpNorm<Eigen::Infinity>());
  out.push_back(at_most_check("free2d Mather set off v = c", worst, 0.02));
}

void criterion_equivariance(AcceptanceSuite::Shared& sh, Checks& out) {
  const EquivarianceReport r = check_fiber_translation_equivariance(sh.pendulum, vec1(0.0), OneForm::constant(2.0));
  out.push_back(at_most_check("Hausdorff distance", r.distance, 0.05));
  out.push_back(holds_check("both sets nonempty", !r.shifted.empty() && !r.mapped.empty()));
}

void criterion_properties(AcceptanceSuite::Shared& sh, const AcceptanceOptions& o, Checks& out) {
  std::mt19937_64 rng(o.seed + 12);
  std::uniform_real_distribution<double> ux(0.0, 1.0), uv(-4.0, 4.0);
  FourierSeries field(1, 0.1);
  field.add_mode(IVec::Constant(1, 2), 0.0, 0.4);
  const Model mane = make_mane({field});

  double fenchel = INFINITY, legendre = 0.0;
  for (const Model& m : {sh.pendulum, mane})
    for (int i = 0; i < 200; ++i) {
      const Vec x = vec1(ux(rng)), v = vec1(uv(rng)), p = vec1(uv(rng));
      const double H = fenchel_hamiltonian(*m, {x, p});
      fenchel = std::min(fenchel, m->value(x, v) + H - p.dot(v));
      const TangentPoint back = inverse_legendre(*m, legendre_transform(*m, x, v));
      legendre = std::max(legendre, (back.v - v).norm());
    }
  out.push_back(at_least_check("Fenchel inequality slack", fenchel, -1e-9));
  out.push_back(at_most_check("Legendre round trip error", legendre, 1e-9));

  const Orbit orb = integrate_el_flow(*sh.pendulum, vec1(0.1), vec1(1.0), 100.0, 1e-3);
  out.push_back(at_most_check("energy drift", orb.max_energy_drift(), 1e-6));

  FourierSeries f(1);
  f.add_mode(IVec::Constant(1, 1), 0.0, 0.1);
  const Model shifted = shift_by_one_form(sh.pendulum, OneForm(vec1(0.0), f));
  const Orbit a = integrate_el_flow(*sh.pendulum, vec1(0.3), vec1(0.7), 5.0, 1e-3);
  const Orbit b = integrate_el_flow(*shifted, vec1(0.3), vec1(0.7), 5.0, 1e-3);
  double shift = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    shift = std::max({shift, (a.positions[i] - b.positions[i]).norm(), (a.velocities[i] - b.velocities[i]).norm()});
  out.push_back(at_most_check("flow change under an exact shift", shift, 1e-8));

  KernelSpec spec;
  spec.points_per_axis = 32;
  const Kernel k = compute_kernel(sh.pendulum, OneForm::constant(0.5), spec);
  std::uniform_real_distribution<double> uf(-1.0, 1.0);
  const auto random_field = [&] {
    GridField u(1, spec.points_per_axis);
    for (double& x : u.values) x = uf(rng);
    return u;
  };
  double commute = 0.0, expand = -INFINITY;
  bool monotone = true;
  for (int t = 0; t < 20; ++t) {
    const GridField u = random_field(), w = random_field();
    GridField up = u, above = u;
    for (std::size_t i = 0; i < u.size(); ++i) {
      up[i] += 0.25;
      above[i] += std::abs(w[i]);
    }
    const GridField tu = lax_oleinik_step(k, u), tw = lax_oleinik_step(k, w);
    const GridField tp = lax_oleinik_step(k, up), ta = lax_oleinik_step(k, above);
    double in = 0.0, outd = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      commute = std::max(commute, std::abs(tp[i] - tu[i] - 0.25));
      monotone = monotone && ta[i] >= tu[i];
      in = std::max(in, std::abs(u[i] - w[i]));
      outd = std::max(outd, std::abs(tu[i] - tw[i]));
    }
    expand = std::max(expand, outd - in);
  }
  out.push_back(at_most_check("Lax-Oleinik constant commutation", commute, 1e-12));
  out.push_back(holds_check("Lax-Oleinik monotonicity", monotone));
  out.push_back(at_most_check("Lax-Oleinik expansion", expand, 1e-12));

  FourierSeries s(1);
  s.add_mode(IVec::Constant(1, 1), 0.0, 1.0);
  double scaled = 0.0;
  for (double T : {10.3, 40.3, 160.3}) {
    const OccupationMeasure m = occupation_measure(integrate_el_flow(*sh.pendulum, vec1(0.0), vec1(2.2), T, 1e-3));
    scaled = std::max(scaled, closedness_defect(m, s) * T);
  }
  out.push_back(at_most_check("closedness defect times T", scaled, 2.0));
}

}  // namespace

CriterionResult AcceptanceSuite::run(int id) {
  CriterionResult r;
  r.id = id;
  for (const auto& c : acceptance_criteria())
    if (c.id == id) r.title = c.title;
  if (r.title.empty()) throw Error(ErrorKind::BadInput, "no criterion " + std::to_string(id));
  const auto start = std::chrono::steady_clock::now();
  Shared& sh = *shared_;
  try {
    switch (id) {
      case 1: criterion_flat(sh, r.checks); break;
      case 2: criterion_routes(sh, opts_, r.checks); break;
      case 3: criterion_beyond(sh, r.checks); break;
      case 4: criterion_beta(sh, opts_, r.checks); break;
      case 5: criterion_potential(sh, opts_, r.checks); break;
      case 6: criterion_barrier(sh, opts_, r.checks); break;
      case 7: criterion_sets(sh, opts_, r.checks); break;
      case 8: criterion_doubled(opts_, r.checks); break;
      case 9: criterion_weak_kam(sh, opts_, r.checks); break;
      case 10: criterion_integrable(r.checks); break;
      case 11: criterion_equivariance(sh, r.checks); break;
      case 12: criterion_properties(sh, opts_, r.checks); break;
    }
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace weakkam
