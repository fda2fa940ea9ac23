#include "doctest.h"
#include "weakkam/error.hpp"
#include "weakkam/testing/pendulum_oracle.hpp"
#include "weakkam/weak_kam.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

using namespace weakkam;
namespace fs = std::filesystem;

namespace {

constexpr int kNodes = 64;

struct Case {
  Model model;
  OneForm form;
  Kernel kernel;
};

// Kernels are shared across test cases; each takes about a second.
const Case& kernel_case(const std::string& name, double c, double tau = 1.0) {
  static std::map<std::tuple<std::string, double, double>, Case> cache;
  const auto key = std::make_tuple(name, c, tau);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  Case k;
  k.model = name == "free" ? make_free_particle(1) : make_pendulum(1, 1.0, name == "doubled" ? 2 : 1);
  k.form = OneForm::constant(c);
  KernelSpec spec;
  spec.points_per_axis = kNodes;
  spec.tau = tau;
  k.kernel = compute_kernel(k.model, k.form, spec);
  return cache[key] = std::move(k);
}

const WeakKamSolution& solution(const std::string& name, double c) {
  static std::map<std::pair<std::string, double>, WeakKamSolution> cache;
  if (auto it = cache.find({name, c}); it != cache.end()) return it->second;
  return cache[{name, c}] = solve_weak_kam(kernel_case(name, c).kernel);
}

GridField random_field(std::mt19937& rng, double scale) {
  std::uniform_real_distribution<double> d(-scale, scale);
  GridField u(1, kNodes);
  for (double& x : u.values) x = d(rng);
  return u;
}

double sup_distance(const GridField& a, const GridField& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

GridField cosine_field(double amplitude) {
  GridField u(1, kNodes);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = amplitude * std::cos(2.0 * M_PI * u.node(i)[0]);
  return u;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("weakkam-test-" + tag + "-" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::size_t files() const { return std::distance(fs::directory_iterator(path), fs::directory_iterator{}); }
};

}  // namespace

TEST_CASE("grid fields index periodically") {
  GridField u(2, 4);
  CHECK(u.size() == 16);
  CHECK(u.index(IVec::Constant(2, -1)) == u.index(IVec::Constant(2, 3)));
  CHECK(u.multi_index(u.index((IVec(2) << 1, 2).finished())) == (IVec(2) << 1, 2).finished());
  CHECK(u.node(1)[0] == 0.25);
  CHECK(u.node(4)[1] == 0.25);
  GridField w(1, 4);
  w.values = {0.0, 1.0, 2.0, 3.0};
  CHECK(w.interpolate(vec1(0.125)) == doctest::Approx(0.5));
  CHECK(w.interpolate(vec1(0.875)) == doctest::Approx(1.5));
  CHECK_THROWS_AS(GridField(1, 1), Error);
}

TEST_CASE("free particle kernel is the squared distance") {
  const Kernel& k = kernel_case("free", 0.0).kernel;
  for (std::size_t j = 0; j < k.size(); j += 7) {
    const double d = std::abs(minimal_image(vec1(static_cast<double>(j) / kNodes))[0]);
    CHECK(k(0, j) == doctest::Approx(0.5 * d * d).epsilon(1e-9));
  }
  const GridField t = lax_oleinik_step(k, GridField(1, kNodes));
  for (double x : t.values) CHECK(std::abs(x) <= 1e-12);
}

TEST_CASE("Lax-Oleinik step commutes with constants and is monotone") {
  const Kernel& k = kernel_case("pendulum", 0.0).kernel;
  std::mt19937 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const GridField u = random_field(rng, 1.0);
    GridField shifted = u, above = u;
    for (double& x : shifted.values) x += 0.37;
    for (std::size_t i = 0; i < above.size(); ++i) above[i] += std::abs(random_field(rng, 1.0)[i]);
    const GridField tu = lax_oleinik_step(k, u), ts = lax_oleinik_step(k, shifted), ta = lax_oleinik_step(k, above);
    for (std::size_t i = 0; i < tu.size(); ++i) {
      CHECK(ts[i] - tu[i] == doctest::Approx(0.37).epsilon(1e-12));
      CHECK(ta[i] >= tu[i]);
    }
  }
}

TEST_CASE("Lax-Oleinik step is non-expansive") {
  const Kernel& k = kernel_case("pendulum", 2.0).kernel;
  std::mt19937 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const GridField u = random_field(rng, 2.0), w = random_field(rng, 2.0);
    CHECK(sup_distance(lax_oleinik_step(k, u), lax_oleinik_step(k, w)) <= sup_distance(u, w) + 1e-12);
  }
}

TEST_CASE("parallel kernel and step match their serial references") {
  const Model m = make_pendulum();
  KernelSpec spec;
  spec.points_per_axis = 24;
  const Kernel a = compute_kernel(m, OneForm::constant(0.5), spec);
  const Kernel b = compute_kernel_serial(m, OneForm::constant(0.5), spec);
  CHECK(a.values() == b.values());
  CHECK(a.windings() == b.windings());
  const Kernel& k = kernel_case("pendulum", 2.0).kernel;
  std::mt19937 rng(3);
  const GridField u = random_field(rng, 1.0);
  CHECK(lax_oleinik_step(k, u).values == lax_oleinik_step_serial(k, u).values);
  CHECK_THROWS_AS(lax_oleinik_step(k, GridField(1, 8)), Error);
}

TEST_CASE("kernel cache round trip") {
  TempDir dir("cache");
  const Model m = make_pendulum();
  KernelSpec spec;
  spec.points_per_axis = 16;
  const Kernel first = load_or_compute_kernel(m, OneForm::constant(0.0), spec, dir.path);
  const std::string key = kernel_cache_key(m, OneForm::constant(0.0), spec);
  CHECK(fs::exists(dir.path / ("kernel-" + key + ".bin")));
  CHECK(fs::exists(dir.path / ("kernel-" + key + ".json")));
  const Kernel second = load_or_compute_kernel(m, OneForm::constant(0.0), spec, dir.path);
  CHECK(second.values() == first.values());
  CHECK(second.windings() == first.windings());
  CHECK(second.tau() == first.tau());

  KernelSpec other = spec;
  other.tau = 2.0;
  CHECK(kernel_cache_key(m, OneForm::constant(0.0), other) != key);
  CHECK(kernel_cache_key(m, OneForm::constant(0.1), spec) != key);

  std::ofstream(dir.path / "bad.bin") << "not a kernel";
  CHECK_THROWS_AS(read_kernel(dir.path / "bad.bin"), Error);
  CHECK_THROWS_AS(read_kernel(dir.path / "missing.bin"), Error);
}

TEST_CASE("custom models are never cached") {
  TempDir dir("custom");
  KernelSpec spec;
  spec.points_per_axis = 8;
  load_or_compute_kernel(time_reversed(make_free_particle(1)), OneForm::constant(0.0), spec, dir.path);
  CHECK(dir.files() == 0);
}

TEST_CASE("weak KAM solution of the pendulum at c = 0") {
  const WeakKamSolution& s = solution("pendulum", 0.0);
  CHECK(std::abs(s.alpha_estimate) <= 2e-3);
  CHECK(s.residual <= 1e-3);
  CHECK(s.u[s.anchor] == 0.0);
  CHECK(std::abs(s.u[kNodes / 2] - s.u[0] - oracle::critical_potential(0.0, 0.5)) <= 5e-3);
  for (std::size_t i = 0; i < s.u.size(); ++i) {
    const double y = s.u.node(i)[0];
    CHECK(std::abs(s.u[i] - 2.0 / M_PI * (1.0 - std::abs(std::cos(M_PI * y)))) <= 5e-3);
  }
  // Fixed point: T u = u - alpha tau.
  const GridField t = lax_oleinik_step(kernel_case("pendulum", 0.0).kernel, s.u);
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(std::abs(t[i] - s.u[i] + s.alpha_estimate) <= 1e-3);
}

TEST_CASE("weak KAM solution of the free particle") {
  const WeakKamSolution& s = solution("free", 1.0);
  CHECK(std::abs(s.alpha_estimate - 0.5) <= 2e-3);
  for (double x : s.u.values) CHECK(std::abs(x) <= 1e-9);
}

TEST_CASE("weak KAM level beyond the flat matches the duality value") {
  const WeakKamSolution& s = solution("pendulum", 2.0);
  CHECK(std::abs(s.alpha_estimate - oracle::alpha(2.0)) <= 5e-3);
  CHECK(s.residual <= 1e-3);
  CHECK(s.residual_history.size() == static_cast<std::size_t>(s.sweeps));
}

TEST_CASE("weak KAM iteration reports non-convergence") {
  WeakKamOptions o;
  o.max_sweeps = 2;
  o.tolerance = 1e-14;
  CHECK_THROWS_AS(solve_weak_kam(kernel_case("pendulum", 2.0).kernel, o), Error);
  o.anchor = 10 * kNodes;
  CHECK_THROWS_AS(solve_weak_kam(kernel_case("pendulum", 2.0).kernel, o), Error);
}

TEST_CASE("offset levels diverge at the offset rate") {
  const Kernel& k = kernel_case("pendulum", 2.0).kernel;
  const double alpha = solution("pendulum", 2.0).alpha_estimate;
  for (double offset : {-0.3, 0.2}) {
    // u <- T u + k tau without renormalization drifts by (k - alpha) tau per sweep.
    GridField u(1, kNodes);
    std::vector<double> at_anchor;
    for (int sweep = 0; sweep < 40; ++sweep) {
      u = lax_oleinik_step(k, u);
      for (double& x : u.values) x += alpha + offset;
      at_anchor.push_back(u[0]);
    }
    CHECK(std::abs((at_anchor[39] - at_anchor[19]) / 20.0 - offset) <= 1e-3);
  }
}

TEST_CASE("semigroup consistency") {
  const Kernel& one = kernel_case("pendulum", 0.0, 1.0).kernel;
  const Kernel& two = kernel_case("pendulum", 0.0, 2.0).kernel;
  for (double amplitude : {0.0, 0.3}) {
    const GridField u = cosine_field(amplitude);
    CHECK(sup_distance(lax_oleinik_step(one, lax_oleinik_step(one, u)), lax_oleinik_step(two, u)) <= 1e-2);
  }
}

TEST_CASE("representation formula on the doubled pendulum Aubry set") {
  const Kernel& k = kernel_case("doubled", 0.0).kernel;
  // Started from a field that forbids every node but 0, the iteration
  // converges to the barrier h(0, .), which attains the sup.
  WeakKamOptions o;
  GridField spike(1, kNodes, 10.0);
  spike[0] = 0.0;
  o.initial = spike;
  const WeakKamSolution barrier = solve_weak_kam(k, o);
  const double h = oracle::critical_potential(0.0, 0.5, {1.0, 2});
  CHECK(h == doctest::Approx(2.0 / M_PI).epsilon(1e-9));
  CHECK(std::abs(barrier.u[kNodes / 2] - barrier.u[0] - h) <= 1e-2);
  // Any other subsolution stays below.
  const WeakKamSolution flat = solve_weak_kam(k);
  CHECK(flat.u[kNodes / 2] - flat.u[0] <= h + 1e-2);
}

TEST_CASE("converged solutions dominate L + alpha along random paths") {
  const Case& k = kernel_case("pendulum", 0.0);
  const WeakKamSolution& s = solution("pendulum", 0.0);
  const Model shifted = shift_by_one_form(k.model, k.form);
  std::mt19937 rng(2024);
  std::uniform_int_distribution<int> node(0, kNodes - 1), lap(-1, 1);
  std::uniform_real_distribution<double> time(0.2, 3.0), bump(-0.3, 0.3);
  int violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int a = node(rng), b = node(rng);
    const double T = time(rng), amp = bump(rng);
    const Vec from = vec1(static_cast<double>(a) / kNodes);
    const Vec to = vec1(static_cast<double>(b) / kNodes + lap(rng));
    LiftedPath p = straight_path(from, to, T, 400);
    for (int i = 1; i < p.segments(); ++i) p.nodes[i][0] += amp * std::sin(M_PI * i / p.segments());
    const double lhs = s.u[b] - s.u[a];
    const double rhs = discrete_action(*shifted, p) + s.alpha_estimate * T;
    violations += lhs > rhs + 1e-3;
  }
  CHECK(violations == 0);
}

TEST_CASE("subsolution residual examples") {
  const Model m = make_pendulum();
  const ResidualField zero = subsolution_residual(m, OneForm::constant(0.0), GridField(1, kNodes), 0.0, {vec1(0.0)});
  for (std::size_t i = 0; i < zero.field.size(); ++i) {
    const double x = static_cast<double>(i) / kNodes;
    CHECK(zero.field[i] == doctest::Approx(-(1.0 - std::cos(2.0 * M_PI * x))).epsilon(1e-12));
  }
  CHECK(std::abs(zero.max_residual) <= 1e-12);
  CHECK(zero.strict_margin == doctest::Approx(1.0 - std::cos(2.0 * M_PI * 4.0 / kNodes)));

  const ResidualField free = subsolution_residual(make_free_particle(1), OneForm::constant(1.0), GridField(1, kNodes), 0.5);
  for (double r : free.field) CHECK(std::abs(r) <= 1e-12);

  const WeakKamSolution& s = solution("pendulum", 0.0);
  const ResidualField conv = subsolution_residual(m, OneForm::constant(0.0), s.u, s.alpha_estimate);
  CHECK(conv.max_residual <= 2e-2);
  CHECK(conv.kinks[kNodes / 2]);
  CHECK(std::count(conv.kinks.begin(), conv.kinks.end(), true) == 1);
}

TEST_CASE("calibrated orbit of the pendulum approaches the fixed point") {
  const Case& k = kernel_case("pendulum", 0.0);
  const WeakKamSolution& s = solution("pendulum", 0.0);
  const CalibratedOrbit co = extract_calibrated_orbit(k.model, k.form, k.kernel, s, vec1(0.25), 3);
  const Orbit& o = co.orbit;
  CHECK(o.times.front() == doctest::Approx(-3.0));
  CHECK(o.times.back() == 0.0);
  CHECK(o.positions.back()[0] == doctest::Approx(0.25));
  CHECK(std::abs(o.positions.front()[0]) <= 0.01);
  for (std::size_t i = 1; i < o.size(); ++i) CHECK(o.positions[i][0] >= o.positions[i - 1][0] - 1e-12);
  for (std::size_t i = 0; i < o.size(); ++i)
    CHECK(std::abs(o.velocities[i][0] - 2.0 * std::sin(M_PI * o.positions[i][0])) <= 5e-2);
  for (double d : co.calibration_defects) CHECK(d <= 1e-2 * k.kernel.tau());
}

TEST_CASE("calibrated orbits of the free particle move at unit speed") {
  const Case& k = kernel_case("free", 1.0);
  const CalibratedOrbit co = extract_calibrated_orbit(k.model, k.form, k.kernel, solution("free", 1.0), vec1(0.3), 2);
  for (const Vec& v : co.orbit.velocities) CHECK(v[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(co.ties.empty());
}

TEST_CASE("calibrated orbit beyond the flat rides the rotation graph") {
  const Case& k = kernel_case("pendulum", 2.0);
  const WeakKamSolution& s = solution("pendulum", 2.0);
  const CalibratedOrbit co = extract_calibrated_orbit(k.model, k.form, k.kernel, s, vec1(0.0), 2);
  const double alpha = oracle::alpha(2.0);
  for (std::size_t i = 0; i < co.orbit.size(); ++i) {
    const double x = co.orbit.positions[i][0];
    CHECK(std::abs(co.orbit.velocities[i][0] - std::sqrt(2.0 * (1.0 + alpha - std::cos(2.0 * M_PI * x)))) <= 5e-2);
  }
  for (double d : co.calibration_defects) CHECK(d <= 1e-2 * k.kernel.tau());
}

TEST_CASE("ties on the doubled pendulum pick the smallest node") {
  const Case& k = kernel_case("doubled", 0.0);
  const WeakKamSolution s = solve_weak_kam(k.kernel);
  // u vanishes on both Aubry points, so the point 1/4 has two sources.
  const CalibratedOrbit co = extract_calibrated_orbit(k.model, k.form, k.kernel, s, vec1(0.25), 1);
  REQUIRE(co.ties.size() == 1);
  CHECK(co.ties[0].size() >= 2);
  CHECK(std::abs(co.orbit.positions.front()[0]) <= 0.01);
}

TEST_CASE("solution export") {
  GridField u(1, 4);
  u.values = {0.0, 0.5, 1.0, 0.5};
  ResidualField r;
  r.field = {0.0, -0.1, 0.2, -0.1};
  r.kinks = {false, false, true, false};
  std::ostringstream os;
  write_solution_csv(os, u, r);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "x1,u,residual,kink");
  std::getline(is, line);
  std::getline(is, line);
  std::getline(is, line);
  CHECK(line.substr(line.size() - 2) == ",1");
}

TEST_CASE("time reversal flips the velocity") {
  const Model shifted = shift_by_one_form(make_pendulum(), OneForm::constant(1.0));
  const Model rev = time_reversed(shifted);
  for (double x : {0.1, 0.4}) {
    for (double v : {-1.5, 0.3}) {
      CHECK(rev->value(vec1(x), vec1(v)) == doctest::Approx(shifted->value(vec1(x), vec1(-v))));
      CHECK(rev->grad_v(vec1(x), vec1(v))[0] == doctest::Approx(-shifted->grad_v(vec1(x), vec1(-v))[0]));
    }
  }
  // The reversed free particle at c = -1 has the level of the original at 1.
  KernelSpec spec;
  spec.points_per_axis = 16;
  WeakKamOptions o;
  o.kernel = spec;
  const WeakKamSolution s = solve_weak_kam(time_reversed(make_free_particle(1)), OneForm::constant(-1.0), o);
  CHECK(std::abs(s.alpha_estimate - 0.5) <= 2e-3);
}
