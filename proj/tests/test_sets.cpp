#include "doctest.h"
#include "weakkam/error.hpp"
#include "weakkam/invariant_sets.hpp"
#include "weakkam/testing/pendulum_oracle.hpp"

#include <cmath>
#include <map>
#include <sstream>

using namespace weakkam;

namespace {

const double kEdge = 4.0 / M_PI;
constexpr int kGrid = 16;

const Model& pendulum() {
  static const Model m = make_pendulum();
  return m;
}
const Model& doubled() {
  static const Model m = make_pendulum(1, 1.0, 2);
  return m;
}

ShellSetOptions shell_options() {
  ShellSetOptions o;
  o.x_points = kGrid;
  return o;
}

struct Triple {
  PhasePointSet mather, aubry, mane;
  double alpha = 0.0;
};

// Sets are expensive; each class is computed once per run.
const Triple& sets(int frequency, double c) {
  static std::map<std::pair<int, double>, Triple> cache;
  auto it = cache.find({frequency, c});
  if (it != cache.end()) return it->second;
  const Model& m = frequency == 1 ? pendulum() : doubled();
  Triple t;
  t.alpha = oracle::alpha(c, {1.0, frequency});
  t.mather = mather_set(m, vec1(c));
  t.aubry = aubry_set(m, vec1(c), t.alpha, shell_options());
  t.mane = mane_set(m, vec1(c), t.alpha, shell_options());
  return cache[{frequency, c}] = t;
}

double separatrix(double x, int frequency = 1) { return 2.0 * std::abs(std::sin(M_PI * frequency * x)); }

bool near_grid_point(const std::vector<Vec>& xs, double target, double step) {
  for (const Vec& x : xs)
    if (std::abs(minimal_image(vec1(x[0] - target))[0]) <= step) return true;
  return false;
}

PhasePointSet synthetic(std::vector<std::pair<double, double>> xv, double step) {
  PhasePointSet s;
  s.label = SetLabel::Mane;
  s.c = vec1(0.0);
  s.tolerance.grid_step = step;
  for (auto [x, v] : xv) s.points.push_back({vec1(x), vec1(v), 0.0});
  return s;
}

}  // namespace

TEST_CASE("set labels round trip") {
  for (SetLabel l : {SetLabel::Mather, SetLabel::Aubry, SetLabel::Mane})
    CHECK(set_label_from_string(to_string(l)) == l);
  CHECK_THROWS_AS(set_label_from_string("chaos"), Error);
}

TEST_CASE("energy shell velocities") {
  auto v = energy_shell_velocities(*pendulum(), 0.0, 0.0);
  REQUIRE(v.size() == 1);
  CHECK(v[0] == 0.0);
  v = energy_shell_velocities(*pendulum(), 0.25, 0.0);
  REQUIRE(v.size() == 2);
  CHECK(v[0] == doctest::Approx(-std::sqrt(2.0)).epsilon(1e-12));
  CHECK(v[1] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(energy_shell_velocities(*pendulum(), 0.5, -3.0).empty());
  v = energy_shell_velocities(*make_free_particle(1), 0.3, 0.5);
  REQUIRE(v.size() == 2);
  CHECK(v[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(energy_shell_velocities(*make_free_particle(2), 0.3, 0.5), Error);
}

TEST_CASE("Mather set of the pendulum inside the flat is the bottom fixed point") {
  for (double c : {0.0, 1.2}) {
    const PhasePointSet s = mather_set(pendulum(), vec1(c));
    REQUIRE_FALSE(s.empty());
    for (const auto& p : s.points) {
      CHECK(std::hypot(minimal_image(p.x)[0], p.v[0]) <= 0.05);
    }
  }
}

TEST_CASE("Mather set of the free particle is the graph v = c") {
  MatherSetOptions o;
  o.grid = LPGridSpec{32, -2.8, 2.8, 57, 8};  // velocity step 0.1 resolves 0.7
  const PhasePointSet s = mather_set(make_free_particle(1), vec1(0.7), o);
  REQUIRE_FALSE(s.empty());
  for (const auto& p : s.points) CHECK(std::abs(p.v[0] - 0.7) <= 0.02);
  CHECK(s.tolerance.velocity_step == doctest::Approx(0.1));
}

TEST_CASE("pendulum sets at c = 0") {
  const Triple& t = sets(1, 0.0);
  REQUIRE(t.aubry.size() == 1);
  CHECK(t.aubry.points[0].x[0] == 0.0);
  CHECK(t.aubry.points[0].v[0] == 0.0);
  REQUIRE(t.mane.size() == 1);
  CHECK(t.mane.points[0].v[0] == 0.0);
  const InclusionReport r = check_inclusions(t.mather, t.aubry, t.mane, t.alpha);
  CHECK(r.pass);
  CHECK(r.mather_to_aubry <= 0.05);
  CHECK(r.aubry_to_mane <= 0.05);
  CHECK(r.max_energy_defect <= r.energy_tolerance);
}

TEST_CASE("pendulum sets at the flat edge: upper separatrix, Mather set strictly smaller") {
  const Triple& t = sets(1, kEdge);
  CHECK(t.mane.size() == kGrid);
  for (const auto& p : t.mane.points) CHECK(p.v[0] == doctest::Approx(separatrix(p.x[0])).epsilon(1e-9));
  CHECK(t.aubry.size() == kGrid);
  for (const auto& p : t.aubry.points) CHECK(p.v[0] >= 0.0);
  const InclusionReport r = check_inclusions(t.mather, t.aubry, t.mane, t.alpha);
  CHECK(r.pass);
  CHECK(r.aubry_to_mather >= 0.3);
  const GraphReport g = check_graph_property(t.aubry);
  CHECK(g.pass);
  CHECK(std::isfinite(g.lipschitz));
  CHECK(g.lipschitz == doctest::Approx(2.0 * M_PI).epsilon(0.05));
}

TEST_CASE("pendulum sets beyond the flat are the rotation graph") {
  const Triple& t = sets(1, 2.0);
  CHECK(t.mane.size() == kGrid);
  CHECK(t.aubry.size() == kGrid);
  for (const auto& p : t.mane.points) {
    const double expect = std::sqrt(2.0 * (1.0 + t.alpha - std::cos(2.0 * M_PI * p.x[0])));
    CHECK(p.v[0] == doctest::Approx(expect).epsilon(1e-9));
  }
  const InclusionReport r = check_inclusions(t.mather, t.aubry, t.mane, t.alpha);
  CHECK(r.pass);
  // Measure-support duality: LP atoms lie on the graph the shell tests find,
  // within half a velocity step.
  for (const auto& p : t.mather.points) {
    const double graph = std::sqrt(2.0 * (1.0 + t.alpha - std::cos(2.0 * M_PI * p.x[0])));
    CHECK(std::abs(p.v[0] - graph) <= 0.5 * t.mather.tolerance.velocity_step + 1e-9);
  }
  CHECK(check_graph_property(t.mane).pass);
}

TEST_CASE("doubled pendulum discriminates Aubry from Mane") {
  const Triple& t = sets(2, 0.0);
  const std::vector<Vec> a = t.aubry.projection();
  REQUIRE(a.size() == 2);
  CHECK(near_grid_point(a, 0.0, 1.0 / kGrid));
  CHECK(near_grid_point(a, 0.5, 1.0 / kGrid));
  CHECK(t.mane.projection().size() == static_cast<std::size_t>(kGrid));
  for (const auto& p : t.mane.points) CHECK(std::abs(p.v[0]) == doctest::Approx(separatrix(p.x[0], 2)).epsilon(1e-9));
  CHECK(check_graph_property(t.aubry).pass);
  const GraphReport g = check_graph_property(t.mane);
  CHECK_FALSE(g.pass);
  REQUIRE(g.violation.has_value());
  CHECK(g.violation->first.x[0] == g.violation->second.x[0]);
  const InclusionReport r = check_inclusions(t.mather, t.aubry, t.mane, t.alpha);
  CHECK(r.pass);
  CHECK(r.mane_to_aubry >= 0.3);
}

TEST_CASE("Mane sets project onto one arc or the whole circle") {
  for (double c : {0.0, kEdge, 2.0}) {
    const std::vector<Vec> xs = sets(1, c).mane.projection();
    REQUIRE_FALSE(xs.empty());
    // Count the gaps of the projection on the circle grid.
    std::vector<bool> on(kGrid, false);
    for (const Vec& x : xs) on[static_cast<std::size_t>(std::lround(x[0] * kGrid)) % kGrid] = true;
    int starts = 0;
    for (int i = 0; i < kGrid; ++i) starts += on[i] && !on[(i + kGrid - 1) % kGrid];
    CHECK(starts <= 1);
  }
}

TEST_CASE("Mane sets at opposite classes are mirror images") {
  const Triple& plus = sets(1, 2.0);
  PhasePointSet minus = mane_set(pendulum(), vec1(-2.0), plus.alpha, shell_options());
  for (auto& p : minus.points) p.v = -p.v;
  CHECK(hausdorff(plus.mane, minus) <= 1e-6);
}

TEST_CASE("graph property on small sets") {
  CHECK(check_graph_property(synthetic({{0.3, 1.0}}, 0.1)).pass);
  CHECK(check_graph_property(synthetic({{0.3, 1.0}, {0.4, 1.2}}, 0.1)).lipschitz == doctest::Approx(2.0));
  const GraphReport bad = check_graph_property(synthetic({{0.3, 1.0}, {0.3, -1.0}}, 0.1));
  CHECK_FALSE(bad.pass);
  CHECK(bad.to_json()["violation"].size() == 2);
  CHECK_THROWS_AS(check_graph_property(synthetic({}, 0.1)), Error);
}

TEST_CASE("Hausdorff distances on the product metric") {
  const PhasePointSet a = synthetic({{0.95, 0.0}}, 0.1);
  const PhasePointSet b = synthetic({{0.05, 0.0}, {0.5, 3.0}}, 0.1);
  CHECK(one_sided_hausdorff(a, b) == doctest::Approx(0.1));
  CHECK(one_sided_hausdorff(b, a) == doctest::Approx(std::hypot(0.45, 3.0)));
  CHECK(hausdorff(a, b) == doctest::Approx(std::hypot(0.45, 3.0)));
  CHECK(std::isinf(one_sided_hausdorff(a, synthetic({}, 0.1))));
  CHECK(one_sided_hausdorff(synthetic({}, 0.1), a) == 0.0);
}

TEST_CASE("inclusion check rejects sets at different classes") {
  PhasePointSet a = synthetic({{0.0, 0.0}}, 0.1), b = a;
  b.c = vec1(1.0);
  CHECK_THROWS_AS(check_inclusions(a, a, b, 0.0), Error);
}

TEST_CASE("fiber translations move Mather sets between classes") {
  SUBCASE("pendulum, eta = 2 dx") {
    const EquivarianceReport r = check_fiber_translation_equivariance(pendulum(), vec1(0.0), OneForm::constant(2.0));
    CHECK(r.pass);
    CHECK(r.distance <= 0.05);
    CHECK(r.shifted.size() > 1);
  }
  SUBCASE("exact form") {
    FourierSeries f(1);
    f.add_mode(IVec::Constant(1, 1), 0.0, 0.1);
    const EquivarianceReport r =
        check_fiber_translation_equivariance(pendulum(), vec1(0.0), OneForm(vec1(0.0), f));
    CHECK(r.pass);
    CHECK(r.distance <= 0.05);
  }
  SUBCASE("free particle, eta = dx") {
    const EquivarianceReport r =
        check_fiber_translation_equivariance(make_free_particle(1), vec1(0.0), OneForm::constant(1.0));
    CHECK(r.pass);
    for (const auto& p : r.shifted.points) CHECK(std::abs(p.v[0] - 1.0) <= 0.02);
    CHECK(r.to_json()["pass"] == true);
  }
}

TEST_CASE("set export") {
  const PhasePointSet s = synthetic({{0.25, 1.5}, {0.5, -0.5}}, 0.5);
  std::ostringstream os;
  write_set_csv(os, s);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "x1,v1,E,label,c1");
  std::getline(is, line);
  CHECK(line == "0.25,1.5,0,mane,0");
  const nlohmann::json j = set_to_json(s);
  CHECK(j["label"] == "mane");
  CHECK(j["points"].size() == 2);
  CHECK(j["tolerance"]["grid_step"] == 0.5);
}

TEST_CASE("shell sets need a one-dimensional model") {
  CHECK_THROWS_AS(mane_set(make_free_particle(2), Vec::Zero(2), 0.0), Error);
}
