#include "doctest.h"

#include "weakkam/dynamics.hpp"
#include "weakkam/error.hpp"
#include "weakkam/testing/pendulum_oracle.hpp"

#include <cmath>
#include <sstream>

using namespace weakkam;

namespace {

// Initial velocity at x = 0 for the rotation orbit of energy E.
double rotation_speed(double E) { return std::sqrt(2.0 * E); }

FourierSeries sine(int k, double amp = 1.0) {
  FourierSeries f(1, 0.0);
  f.add_mode(IVec::Constant(1, k), 0.0, amp);
  return f;
}

}  // namespace

TEST_CASE("fixed point stays put") {
  auto pend = make_pendulum();
  auto orb = integrate_el_flow(*pend, vec1(0.5), vec1(0.0), 10.0, 1e-3);
  for (std::size_t i = 0; i < orb.size(); ++i) {
    CHECK(std::abs(orb.positions[i][0] - 0.5) < 1e-14);
    CHECK(std::abs(orb.velocities[i][0]) < 1e-14);
  }
  auto m = occupation_measure(orb);
  REQUIRE(m.atoms.size() == 1);
  CHECK(m.atoms[0].weight == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(average_action(m, *pend, OneForm::constant(0.0)) == doctest::Approx(2.0));
  CHECK(closedness_defect(m, sine(1)) == 0.0);
}

TEST_CASE("free particle moves on a line") {
  auto free1 = make_free_particle(1);
  auto orb = integrate_el_flow(*free1, vec1(0.0), vec1(0.7), 10.0, 1e-3);
  CHECK(std::abs(orb.positions.back()[0] - 7.0) < 1e-9);
  CHECK(rotation_vector_of_orbit(orb)[0] == doctest::Approx(0.7).epsilon(1e-12));
  auto m = occupation_measure(orb);
  CHECK(std::abs(m.rotation_vector()[0] - 0.7) < 1e-12);
  CHECK(std::abs(m.total_weight() - 1.0) < 1e-12);

  auto orb2 = integrate_el_flow(*free1, vec1(0.0), vec1(0.7), 10.5, 1e-3);
  const double defect = closedness_defect(occupation_measure(orb2), sine(1));
  CHECK(defect <= 0.1);
  CHECK(defect > 1e-4);
}

TEST_CASE("separatrix orbit approaches the next copy of the hyperbolic point") {
  auto pend = make_pendulum();
  // t_end is capped: roundoff grows like exp(2 pi t) near the hyperbolic point.
  auto orb = integrate_el_flow(*pend, vec1(0.5), vec1(2.0), 2.0, 1e-3);
  double worst = 0.0;
  for (std::size_t i = 0; i < orb.size(); ++i) {
    const double x = orb.positions[i][0];
    worst = std::max(worst, std::abs(orb.velocities[i][0] - 2.0 * std::abs(std::sin(kTwoPi * 0.5 * x))));
  }
  CHECK(worst < 1e-6);
  // velocity decreases monotonically on the way to x = 1
  for (std::size_t i = 1; i < orb.size(); ++i) CHECK(orb.velocities[i][0] <= orb.velocities[i - 1][0] + 1e-12);
  CHECK(orb.positions.back()[0] < 1.0);
  CHECK(orb.positions.back()[0] > 1.0 - 1e-4);
}

TEST_CASE("rotation orbit of energy one") {
  auto pend = make_pendulum();
  const double T1 = oracle::rotation_period(1.0);
  auto orb = integrate_el_flow(*pend, vec1(0.0), vec1(rotation_speed(1.0)), 100.0, 1e-3);
  CHECK(std::abs(rotation_vector_of_orbit(orb)[0] - 1.0 / T1) < 1e-3);

  auto one = integrate_el_flow(*pend, vec1(0.0), vec1(rotation_speed(1.0)), T1, 1e-3);
  auto m = occupation_measure(one);
  CHECK(std::abs(m.rotation_vector()[0] - 1.0 / T1) < 1e-3);
  CHECK(closedness_defect(m, sine(1)) <= 1e-6);
  const double cplus = oracle::rotation_momentum(1.0);
  CHECK(std::abs(average_action(m, *pend, OneForm::constant(cplus)) + 1.0) < 2e-3);
}

TEST_CASE("libration orbit has zero rotation") {
  auto pend = make_pendulum();
  // E = -1 at x = 0.5 means 1/2 v^2 = 1.
  auto orb = integrate_el_flow(*pend, vec1(0.5), vec1(std::sqrt(2.0)), 200.0, 1e-3);
  CHECK(std::abs(rotation_vector_of_orbit(orb)[0]) < 1e-2);
}

TEST_CASE("energy drift stays small and large steps are rejected") {
  auto pend = make_pendulum();
  auto orb = integrate_el_flow(*pend, vec1(0.1), vec1(1.0), 100.0, 1e-3);
  CHECK(orb.max_energy_drift() <= 1e-6);
  CHECK_THROWS_AS(integrate_el_flow(*pend, vec1(0.1), vec1(1.0), 100.0, 0.2), Error);
  CHECK_THROWS_AS(integrate_el_flow(*pend, vec1(0.1), vec1(1.0), 1.0, 0.0), Error);
}

TEST_CASE("exact shift does not change trajectories") {
  auto pend = make_pendulum();
  auto shifted = shift_by_one_form(pend, OneForm(vec1(0.0), sine(1, 0.1)));
  auto a = integrate_el_flow(*pend, vec1(0.3), vec1(0.7), 5.0, 1e-3);
  auto b = integrate_el_flow(*shifted, vec1(0.3), vec1(0.7), 5.0, 1e-3);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a.positions[i][0] - b.positions[i][0]));
    worst = std::max(worst, std::abs(a.velocities[i][0] - b.velocities[i][0]));
  }
  CHECK(worst < 1e-8);

  auto pend2 = make_pendulum(2);
  auto shifted2 = shift_by_one_form(pend2, OneForm(make_vec({0.3, -0.2})));
  auto c = integrate_el_flow(*pend2, make_vec({0.1, 0.2}), make_vec({0.5, -0.3}), 5.0, 1e-3);
  auto d = integrate_el_flow(*shifted2, make_vec({0.1, 0.2}), make_vec({0.5, -0.3}), 5.0, 1e-3);
  CHECK((c.positions.back() - d.positions.back()).norm() < 1e-8);
}

TEST_CASE("Legendre image of an orbit solves Hamilton's equations") {
  FourierSeries X(1, 0.2);
  X.add_mode(IVec::Constant(1, 1), 0.3, 0.0);
  auto mane = make_mane({X});
  auto orb = integrate_el_flow(*mane, vec1(0.1), vec1(0.8), 2.0, 1e-3);
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < orb.size(); i += 97) {
    auto qm = legendre_transform(*mane, orb.positions[i - 1], orb.velocities[i - 1]);
    auto q = legendre_transform(*mane, orb.positions[i], orb.velocities[i]);
    auto qp = legendre_transform(*mane, orb.positions[i + 1], orb.velocities[i + 1]);
    const double dt = orb.times[i + 1] - orb.times[i];
    const double xdot = (qp.x[0] - qm.x[0]) / (2 * dt);
    const double pdot = (qp.p[0] - qm.p[0]) / (2 * dt);
    auto H = [&](double x, double p) { return fenchel_hamiltonian(*mane, {vec1(x), vec1(p)}); };
    const double Hp = (H(q.x[0], q.p[0] + h) - H(q.x[0], q.p[0] - h)) / (2 * h);
    const double Hx = (H(q.x[0] + h, q.p[0]) - H(q.x[0] - h, q.p[0])) / (2 * h);
    worst = std::max({worst, std::abs(xdot - Hp), std::abs(pdot + Hx)});
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("rotation vector is affine under convex combination") {
  auto pend = make_pendulum();
  auto a = occupation_measure(integrate_el_flow(*pend, vec1(0.0), vec1(2.0), 10.0, 1e-3));
  auto b = occupation_measure(integrate_el_flow(*pend, vec1(0.5), vec1(0.5), 10.0, 1e-3));
  for (double lam : {0.0, 0.25, 0.6, 1.0}) {
    auto m = convex_combination(a, b, lam);
    const double expect = lam * a.rotation_vector()[0] + (1 - lam) * b.rotation_vector()[0];
    CHECK(m.rotation_vector()[0] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(std::abs(m.total_weight() - 1.0) < 1e-12);
  }
}

TEST_CASE("closedness defect decays like 1/T") {
  auto pend = make_pendulum();
  const auto f = sine(1);
  for (double T : {10.3, 40.3, 160.3}) {
    auto m = occupation_measure(integrate_el_flow(*pend, vec1(0.0), vec1(2.2), T, 1e-3));
    const double d = closedness_defect(m, f);
    CHECK(d * T <= 2.0 + 1e-6);
  }
}

TEST_CASE("orbit csv") {
  auto free1 = make_free_particle(1);
  auto orb = integrate_el_flow(*free1, vec1(0.0), vec1(1.0), 0.002, 1e-3);
  std::ostringstream os;
  write_orbit_csv(os, orb);
  CHECK(os.str() == "t,x_1,v_1,E\n0,0,1,0.5\n0.001,0.001,1,0.5\n0.002,0.002,1,0.5\n");
}

TEST_CASE("backward flow retraces forward flow") {
  auto pend = make_pendulum();
  auto fwd = integrate_el_flow(*pend, vec1(0.2), vec1(1.3), 3.0, 1e-3);
  auto bwd = integrate_el_flow_backward(*pend, fwd.positions.back(), fwd.velocities.back(), 3.0, 1e-3);
  CHECK(std::abs(bwd.positions.back()[0] - 0.2) < 1e-9);
  CHECK(std::abs(bwd.velocities.back()[0] - 1.3) < 1e-9);
  CHECK(bwd.times.back() == doctest::Approx(-3.0));
}
