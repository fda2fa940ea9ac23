#include "weakkam/dynamics.hpp"

#include "weakkam/csv.hpp"
#include "weakkam/error.hpp"

#include <cmath>

namespace weakkam {

double Orbit::max_energy_drift() const {
  double m = 0.0;
  for (double e : energies) m = std::max(m, std::abs(e - energies.front()));
  return m;
}

Vec el_acceleration(const Lagrangian& model, const Vec& x, const Vec& v) {
  const LagrangianJet j = model.jet(x, v);
  Eigen::LLT<Mat> llt(j.hvv);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::SingularHessian, "hess_vv is not positive definite");
  return llt.solve(j.gx - j.hxv.transpose() * v);
}

namespace {

Orbit integrate(const Lagrangian& model, const Vec& x0, const Vec& v0, double t_end, double dt, double direction,
                const FlowOptions& opts) {
  if (!(dt > 0.0) || !(t_end > 0.0)) throw Error(ErrorKind::BadInput, "integration needs dt > 0 and t_end > 0");
  if (x0.size() != model.dim() || v0.size() != model.dim())
    throw Error(ErrorKind::BadInput, "initial condition has wrong dimension");
  Orbit orb;
  orb.dim = model.dim();
  const auto steps = static_cast<long>(std::ceil(t_end / dt - 1e-9));
  const int stride = std::max(1, opts.store_every);
  orb.times.reserve(static_cast<std::size_t>(steps / stride + 2));

  Vec x = x0, v = v0;
  const double e0 = energy(model, x, v);
  const double drift_bound = opts.energy_drift_tolerance * std::max(1.0, std::abs(e0));
  auto store = [&](double t) {
    orb.times.push_back(t);
    orb.positions.push_back(x);
    orb.velocities.push_back(v);
    orb.energies.push_back(energy(model, x, v));
    if (std::abs(orb.energies.back() - e0) > drift_bound)
      throw Error(ErrorKind::EnergyDriftExceeded,
                  "energy drift " + std::to_string(std::abs(orb.energies.back() - e0)) + " at t=" + std::to_string(t));
  };
  store(0.0);
  double t = 0.0;
  for (long s = 0; s < steps; ++s) {
    const double h = direction * std::min(dt, t_end - std::abs(t));
    const Vec k1x = v;
    const Vec k1v = el_acceleration(model, x, v);
    const Vec k2x = v + 0.5 * h * k1v;
    const Vec k2v = el_acceleration(model, x + 0.5 * h * k1x, k2x);
    const Vec k3x = v + 0.5 * h * k2v;
    const Vec k3v = el_acceleration(model, x + 0.5 * h * k2x, k3x);
    const Vec k4x = v + h * k3v;
    const Vec k4v = el_acceleration(model, x + h * k3x, k4x);
    x += (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x);
    v += (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v);
    t += h;
    if ((s + 1) % stride == 0 || s + 1 == steps) store(t);
  }
  return orb;
}

}  // namespace

Orbit integrate_el_flow(const Lagrangian& model, const Vec& x0, const Vec& v0, double t_end, double dt,
                        const FlowOptions& opts) {
  return integrate(model, x0, v0, t_end, dt, 1.0, opts);
}

Orbit integrate_el_flow_backward(const Lagrangian& model, const Vec& x0, const Vec& v0, double t_end, double dt,
                                 const FlowOptions& opts) {
  return integrate(model, x0, v0, t_end, dt, -1.0, opts);
}

Vec rotation_vector_of_orbit(const Orbit& orbit) {
  if (orbit.size() < 2 || orbit.duration() <= 0.0) throw Error(ErrorKind::BadInput, "orbit spans no time");
  const double sign = orbit.times.back() >= orbit.times.front() ? 1.0 : -1.0;
  return sign * (orbit.positions.back() - orbit.positions.front()) / orbit.duration();
}

double orbit_action(const Orbit& orbit, const Lagrangian& model, const OneForm& form, double k) {
  double a = 0.0;
  auto density = [&](std::size_t i) {
    const Vec& x = orbit.positions[i];
    const Vec& v = orbit.velocities[i];
    return model.value(x, v) - form.eval(x).dot(v) + k;
  };
  double prev = density(0);
  for (std::size_t i = 1; i < orbit.size(); ++i) {
    const double cur = density(i);
    a += 0.5 * (orbit.times[i] - orbit.times[i - 1]) * (prev + cur);
    prev = cur;
  }
  return orbit.times.back() >= orbit.times.front() ? a : -a;
}

double OccupationMeasure::total_weight() const {
  double s = 0.0;
  for (const auto& a : atoms) s += a.weight;
  return s;
}

Vec OccupationMeasure::rotation_vector() const {
  Vec r = Vec::Zero(dim);
  for (const auto& a : atoms) r += a.weight * a.v;
  return r;
}

namespace {
// Samples closer than this are one atom; far below v * dt for any moving orbit.
constexpr double kAtomMergeTolerance = 1e-12;
}  // namespace

OccupationMeasure occupation_measure(const Orbit& orbit) {
  if (orbit.size() == 0) throw Error(ErrorKind::BadInput, "empty orbit");
  OccupationMeasure m;
  m.dim = orbit.dim;
  const std::size_t n = orbit.size();
  if (n == 1 || orbit.duration() <= 0.0) {
    m.atoms.push_back({wrap_unit(orbit.positions[0]), orbit.velocities[0], 1.0});
    return m;
  }
  const double T = orbit.duration();
  for (std::size_t i = 0; i < n; ++i) {
    double w = 0.0;
    if (i > 0) w += 0.5 * std::abs(orbit.times[i] - orbit.times[i - 1]);
    if (i + 1 < n) w += 0.5 * std::abs(orbit.times[i + 1] - orbit.times[i]);
    w /= T;
    const Vec x = wrap_unit(orbit.positions[i]);
    if (!m.atoms.empty() && torus_distance(m.atoms.back().x, x) <= kAtomMergeTolerance &&
        (m.atoms.back().v - orbit.velocities[i]).norm() <= kAtomMergeTolerance) {
      m.atoms.back().weight += w;
    } else {
      m.atoms.push_back({x, orbit.velocities[i], w});
    }
  }
  return m;
}

OccupationMeasure convex_combination(const OccupationMeasure& a, const OccupationMeasure& b, double lambda) {
  if (a.dim != b.dim) throw Error(ErrorKind::BadInput, "measure dimension mismatch");
  OccupationMeasure m;
  m.dim = a.dim;
  for (const auto& at : a.atoms) m.atoms.push_back({at.x, at.v, lambda * at.weight});
  for (const auto& at : b.atoms) m.atoms.push_back({at.x, at.v, (1.0 - lambda) * at.weight});
  return m;
}

double average_action(const OccupationMeasure& measure, const Lagrangian& model, const OneForm& form) {
  double s = 0.0;
  for (const auto& a : measure.atoms) s += a.weight * (model.value(a.x, a.v) - form.eval(a.x).dot(a.v));
  return s;
}

double closedness_defect(const OccupationMeasure& measure, const FourierSeries& f) {
  double s = 0.0;
  for (const auto& a : measure.atoms) s += a.weight * f.gradient(a.x).dot(a.v);
  return std::abs(s);
}

void write_orbit_csv(std::ostream& os, const Orbit& orbit) {
  std::vector<std::string> header{"t"};
  for (int i = 0; i < orbit.dim; ++i) header.push_back("x_" + std::to_string(i + 1));
  for (int i = 0; i < orbit.dim; ++i) header.push_back("v_" + std::to_string(i + 1));
  header.push_back("E");
  write_csv_row(os, header);
  for (std::size_t k = 0; k < orbit.size(); ++k) {
    std::vector<std::string> row{fmt12(orbit.times[k])};
    for (int i = 0; i < orbit.dim; ++i) row.push_back(fmt12(orbit.positions[k][i]));
    for (int i = 0; i < orbit.dim; ++i) row.push_back(fmt12(orbit.velocities[k][i]));
    row.push_back(fmt12(orbit.energies[k]));
    write_csv_row(os, row);
  }
}

}  // namespace weakkam
