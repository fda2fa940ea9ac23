#include "weakkam/testing/pendulum_oracle.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace weakkam::oracle {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

double potential(double x, const PendulumParams& p) {
  return p.amplitude * (1.0 - std::cos(2.0 * kPi * p.frequency * x));
}

// Integrand has period 1/n and is symmetric, so integrate on [0, 1/(2n)].
template <class F>
double cell_integral(F&& f, const PendulumParams& p, bool singular) {
  const double half = 0.5 / p.frequency;
  double v;
  if (singular) {
    boost::math::quadrature::tanh_sinh<double> ts;
    v = ts.integrate(f, 0.0, half);
  } else {
    v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, half, 15, 1e-14);
  }
  return 2.0 * p.frequency * v;
}

}  // namespace

double rotation_period(double E, const PendulumParams& p) {
  if (!(E > 0.0)) throw std::domain_error("rotation_period needs E > 0");
  auto f = [&](double x) { return 1.0 / std::sqrt(2.0 * (E + potential(x, p))); };
  return cell_integral(f, p, E < 1e-2);
}

double rotation_momentum(double E, const PendulumParams& p) {
  if (E < 0.0) throw std::domain_error("rotation_momentum needs E >= 0");
  auto f = [&](double x) { return std::sqrt(2.0 * (E + potential(x, p))); };
  return cell_integral(f, p, E < 1e-2);
}

double flat_edge(const PendulumParams& p) { return rotation_momentum(0.0, p); }

double energy_for_momentum(double c, const PendulumParams& p) {
  const double target = std::abs(c);
  const double edge = flat_edge(p);
  if (target < edge) throw std::domain_error("momentum inside the flat");
  if (target == edge) return 0.0;
  double hi = 1.0;
  while (rotation_momentum(hi, p) < target) hi *= 2.0;
  boost::math::tools::eps_tolerance<double> tol(50);
  std::uintmax_t it = 200;
  auto r = boost::math::tools::bisect([&](double E) { return rotation_momentum(E, p) - target; }, 0.0, hi, tol, it);
  return 0.5 * (r.first + r.second);
}

double energy_for_rotation(double h, const PendulumParams& p) {
  if (h == 0.0) throw std::domain_error("energy_for_rotation needs h != 0");
  const double period = 1.0 / std::abs(h);
  double lo = 1e-14, hi = 1.0;
  while (rotation_period(hi, p) > period) hi *= 2.0;
  boost::math::tools::eps_tolerance<double> tol(50);
  std::uintmax_t it = 200;
  auto r = boost::math::tools::bisect([&](double E) { return rotation_period(E, p) - period; }, lo, hi, tol, it);
  return 0.5 * (r.first + r.second);
}

double alpha(double c, const PendulumParams& p) {
  if (std::abs(c) <= flat_edge(p)) return 0.0;
  return energy_for_momentum(c, p);
}

double beta(double h, const PendulumParams& p) {
  if (h == 0.0) return 0.0;
  const double E = energy_for_rotation(h, p);
  return rotation_momentum(E, p) * std::abs(h) - E;
}

double critical_potential(double x, double y, const PendulumParams& p) {
  auto speed = [&](double s) { return std::sqrt(2.0 * potential(s, p)); };
  double a = x - std::floor(x);
  double b = y - std::floor(y);
  if (b < a) b += 1.0;
  const double forward = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(speed, a, b, 15, 1e-14);
  const double total = flat_edge(p);
  return std::min(forward, total - forward);
}

}  // namespace weakkam::oracle
