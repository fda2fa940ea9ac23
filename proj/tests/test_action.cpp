#include "doctest.h"
#include "lattice_oracle.hpp"
#include "weakkam/action.hpp"
#include "weakkam/error.hpp"
#include "weakkam/mane.hpp"
#include "weakkam/testing/pendulum_oracle.hpp"

#include <cmath>
#include <random>

using namespace weakkam;

namespace {

const Model& pendulum() {
  static const Model m = make_pendulum();
  return m;
}
const Model& free1d() {
  static const Model m = make_free_particle(1);
  return m;
}

// One shared potential per (model, c); the loop table is the expensive part.
const ManePotential& pendulum_phi() {
  static const ManePotential phi(pendulum(), OneForm::constant(0.0));
  return phi;
}

double circle_distance(double a, double b) { return std::abs(minimal_image(vec1(a - b))[0]); }

}  // namespace

TEST_CASE("fixed-time minimizer of the free particle is the straight line") {
  const PathResult r = minimize_action_fixed_time(free1d(), OneForm::constant(0.0), vec1(0.0), vec1(0.5), IVec::Zero(1),
                                                  1.0, 64);
  CHECK(r.converged);
  CHECK(r.gradient_norm <= 1e-8);
  CHECK(r.action == doctest::Approx(0.125).epsilon(1e-12));
  for (int i = 0; i <= 64; ++i) CHECK(r.path.nodes[i][0] == doctest::Approx(0.5 * i / 64.0).epsilon(1e-9));

  const PathResult s = minimize_action_fixed_time(free1d(), OneForm::constant(1.0), vec1(0.0), vec1(0.5), IVec::Zero(1),
                                                  1.0, 64);
  CHECK(s.action == doctest::Approx(-0.375).epsilon(1e-12));
}

TEST_CASE("fixed-time minimizer rejects bad input") {
  CHECK_THROWS_AS(minimize_action_fixed_time(free1d(), OneForm::constant(0.0), vec1(0.0), vec1(0.5), IVec::Zero(1),
                                             -1.0, 64),
                  Error);
  CHECK_THROWS_AS(minimize_action_fixed_time(free1d(), OneForm::constant(0.0), vec1(0.0), vec1(0.5), IVec::Zero(1),
                                             1.0, 4),
                  Error);
}

TEST_CASE("pendulum minimizer agrees with the lattice shortest path") {
  const PathResult r = minimize_action_fixed_time(pendulum(), OneForm::constant(0.0), vec1(0.0), vec1(0.5),
                                                  IVec::Zero(1), 3.0, 256);
  CHECK(r.converged);
  CHECK_FALSE(r.saddle);
  const double lattice = testing::lattice_min_action(*pendulum(), 0.0, 0.5, 3.0, -0.25, 0.75, 400, 400);
  CHECK(std::abs(r.action - lattice) <= 1e-2);
}

TEST_CASE("discrete Euler-Lagrange residual shrinks like dt^2") {
  // Second differences against the continuous acceleration -2 pi sin(2 pi x).
  auto residual = [](int N) {
    const PathResult r = minimize_action_fixed_time(pendulum(), OneForm::constant(0.0), vec1(0.1), vec1(0.4),
                                                    IVec::Zero(1), 1.0, N);
    const double h = r.path.step();
    double m = 0.0;
    for (int i = 1; i < N; ++i) {
      const double x = r.path.nodes[i][0];
      const double acc = (r.path.nodes[i + 1][0] - 2 * x + r.path.nodes[i - 1][0]) / (h * h);
      m = std::max(m, std::abs(acc - kTwoPi * std::sin(kTwoPi * x)));
    }
    return m;
  };
  const double coarse = residual(32);
  const double fine = residual(64);
  CHECK(coarse < 1.0);
  CHECK(fine < coarse / 3.0);
}

TEST_CASE("minimum over windings") {
  const WindingResult a = min_action_over_windings(free1d(), OneForm::constant(0.0), vec1(0.0), vec1(0.9), 1.0, 64, 1);
  CHECK(a.action == doctest::Approx(0.005).epsilon(1e-9));
  CHECK(a.winding[0] == -1);

  const WindingResult b = min_action_over_windings(free1d(), OneForm::constant(2.0), vec1(0.0), vec1(0.0), 1.0, 64, 2);
  CHECK(b.action == doctest::Approx(-2.0).epsilon(1e-9));
  CHECK(b.winding[0] == 2);

  const WindingResult p = min_action_over_windings(pendulum(), OneForm::constant(0.0), vec1(0.0), vec1(0.0), 5.0, 500, 1);
  CHECK(p.action <= 1e-12);
  CHECK(p.action >= -1e-9);  // alpha(0) = 0 bounds h_T from below
  const double lattice = testing::lattice_min_action(*pendulum(), 0.0, 0.0, 5.0, -0.5, 0.5, 201, 200);
  CHECK(std::abs(p.action - lattice) <= 1e-2);
}

TEST_CASE("path warm-start helpers keep endpoints and step") {
  const LiftedPath p = straight_path(vec1(0.0), vec1(1.0), 1.0, 10);
  const LiftedPath r = resample_path(p, 25);
  CHECK(r.segments() == 25);
  CHECK(r.nodes.back()[0] == 1.0);
  const LiftedPath e = extend_path_at_rest(p, 20);
  CHECK(e.segments() == 20);
  CHECK(e.step() == doctest::Approx(p.step()));
  CHECK(e.nodes.back()[0] == 1.0);
  const LiftedPath q = extend_periodic(p, 30, vec1(2.5));
  CHECK(q.segments() == 30);
  CHECK(q.step() == doctest::Approx(p.step()));
  CHECK(q.nodes.back()[0] == 2.5);
  const LiftedPath t = retarget_path(p, vec1(2.0));
  CHECK(t.nodes.front()[0] == 0.0);
  CHECK(t.nodes[5][0] == doctest::Approx(1.0));
}

TEST_CASE("Mane potential of the free particle") {
  const PotentialValue v = mane_potential(free1d(), OneForm::constant(0.0), 0.5, vec1(0.0), vec1(0.25));
  REQUIRE(v.finite());
  CHECK(v.value == doctest::Approx(0.25).epsilon(1e-3));
  REQUIRE(v.argmin_T.has_value());
  CHECK(*v.argmin_T == doctest::Approx(0.25).epsilon(0.05));
}

TEST_CASE("pendulum Mane potential at the critical level") {
  const PotentialValue v = pendulum_phi()(0.0, vec1(0.0), vec1(0.5));
  REQUIRE(v.finite());
  CHECK(std::abs(v.value - 2.0 / M_PI) <= 1e-3);
  CHECK_FALSE(v.certificate.empty());
}

TEST_CASE("short hops through fast regions are resolved") {
  // Optimal travel time from 0.5 to 0.45 is about 0.025, three time steps.
  const PotentialValue v = pendulum_phi()(0.0, vec1(0.5), vec1(0.45));
  REQUIRE(v.finite());
  CHECK(std::abs(v.value - oracle::critical_potential(0.5, 0.45)) <= 3e-3);
  CHECK(v.argmin_T.value() < 0.05);
}

TEST_CASE("discretization policies need at least two segments") {
  DiscretizationPolicy p;
  p.min_nodes = 1;
  CHECK_THROWS_AS(p.segments_for(1.0), Error);
}

TEST_CASE("pendulum Mane potential below the critical value diverges with a witness") {
  const PotentialValue v = pendulum_phi()(-0.5, vec1(0.3), vec1(0.8));
  CHECK(v.minus_infinity);
  REQUIRE(v.witness.has_value());
  CHECK(v.witness->loop_action < 0.0);
  CHECK(v.witness->iterated_value < -1e6);
  CHECK(v.witness->repetitions > 0);
}

TEST_CASE("Mane potential properties on a point table") {
  const ManePotential& phi = pendulum_phi();
  const std::vector<double> pts{0.0, 0.2, 0.45, 0.7};
  const int n = static_cast<int>(pts.size());
  std::vector<std::vector<double>> P(n, std::vector<double>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const PotentialValue v = phi(0.0, vec1(pts[i]), vec1(pts[j]));
      REQUIRE(v.finite());
      P[i][j] = v.value;
    }
  const double Q = 2.5;  // max of L over unit speeds
  for (int i = 0; i < n; ++i) {
    CHECK(std::abs(P[i][i]) <= 1e-6);
    for (int j = 0; j < n; ++j) {
      CHECK(P[i][j] + P[j][i] >= -1e-6);
      for (int k = 0; k < n; ++k) CHECK(P[i][j] <= P[i][k] + P[k][j] + 1e-6);
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          const double lip = Q * (circle_distance(pts[i], pts[a]) + circle_distance(pts[j], pts[b]));
          CHECK(std::abs(P[i][j] - P[a][b]) <= lip + 1e-6);
        }
    }
  }
}

TEST_CASE("Mane potential is strictly positive on the diagonal sum above criticality") {
  const ManePotential& phi = pendulum_phi();
  const PotentialValue a = phi(0.1, vec1(0.1), vec1(0.6));
  const PotentialValue b = phi(0.1, vec1(0.6), vec1(0.1));
  REQUIRE(a.finite());
  REQUIRE(b.finite());
  CHECK(a.value + b.value > 0.0);
}

TEST_CASE("Mane critical values") {
  CHECK(std::abs(mane_critical_value(pendulum(), OneForm::constant(0.0))) <= 1e-3);
  CHECK(std::abs(mane_critical_value(free1d(), OneForm::constant(1.0)) - 0.5) <= 1e-3);
  const double target = oracle::alpha(2.0);
  CHECK(std::abs(mane_critical_value(pendulum(), OneForm::constant(2.0)) - target) <= 2e-3);
}

TEST_CASE("critical value bracket failure is reported") {
  ActionSolver s(free1d(), OneForm::constant(1.0), accurate_policy());
  CriticalValueOptions o;
  o.bracket_lo = 5.0;
  o.bracket_hi = 6.0;
  o.max_bracket_doublings = 0;
  CHECK_THROWS_AS(mane_critical_value(s, o), Error);
}

TEST_CASE("Peierls barrier and delta pseudometric on the pendulum") {
  const ActionSolver& s = pendulum_phi().solver();
  const BarrierResult h00 = peierls_barrier(s, 0.0, vec1(0.0), vec1(0.0));
  CHECK(std::abs(h00.value) <= 1e-3);
  const BarrierResult hh = peierls_barrier(s, 0.0, vec1(0.5), vec1(0.5));
  CHECK(std::abs(hh.value - 4.0 / M_PI) <= 5e-3);
  CHECK(hh.stabilized);
  CHECK(hh.ladder.size() == 6);

  CHECK(std::abs(delta_pseudometric(s, 0.0, vec1(0.0), vec1(0.0))) <= 2e-3);
  const double d = delta_pseudometric(s, 0.0, vec1(0.0), vec1(0.5));
  CHECK(std::abs(d - 4.0 / M_PI) <= 1e-2);
  CHECK(d == doctest::Approx(delta_pseudometric(s, 0.0, vec1(0.5), vec1(0.0))).epsilon(1e-9));
}

TEST_CASE("Peierls barrier dominates the critical potential") {
  const ManePotential& phi = pendulum_phi();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 3; ++i) {
    const Vec x = vec1(u(rng)), y = vec1(u(rng));
    const double h = peierls_barrier(phi.solver(), 0.0, x, y).value;
    const PotentialValue p = phi(0.0, x, y);
    REQUIRE(p.finite());
    CHECK(h >= p.value - 1e-6);
    CHECK(std::abs(p.value - oracle::critical_potential(x[0], y[0])) <= 2e-3);
  }
}

TEST_CASE("changing the representative by an exact form shifts the barrier by a coboundary") {
  // eta' = eta + df with f = 0.05 sin(2 pi x); the extra term integrates to
  // f(y) - f(x) and enters L_eta' with a minus sign.
  FourierSeries f(1);
  f.add_mode(IVec::Ones(1), 0.0, 0.05);
  const OneForm eta(vec1(0.0));
  const OneForm eta2(vec1(0.0), f);
  const Vec x = vec1(0.1), y = vec1(0.35);
  // The midpoint rule integrates df along a path with O(dt^2) error, so the
  // identity is checked on a finer grid and a shorter ladder.
  const ActionSolver a(pendulum(), eta, exact_discrete_policy(0.005));
  const ActionSolver b(pendulum(), eta2, exact_discrete_policy(0.005));
  BarrierOptions o;
  o.t_max = 40.0;
  const double ha = peierls_barrier(a, 0.0, x, y, o).value;
  const double hb = peierls_barrier(b, 0.0, x, y, o).value;
  CHECK(std::abs(hb - (ha - (f.value(y) - f.value(x)))) <= 1e-6);
}
