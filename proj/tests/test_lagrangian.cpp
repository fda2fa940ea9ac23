#include "doctest.h"

#include "weakkam/error.hpp"
#include "weakkam/lagrangian.hpp"
#include "weakkam/model_io.hpp"

#include <random>

using namespace weakkam;

namespace {

Model mane_half() {
  FourierSeries X(1, 0.5);
  return make_mane({X});
}

}  // namespace

TEST_CASE("torus point canonical representative and minimal image") {
  TorusPoint p(vec1(-0.25));
  CHECK(p[0] == doctest::Approx(0.75));
  TorusPoint q(make_vec({2.0, -1e-18}));
  CHECK(q[0] >= 0.0);
  CHECK(q[0] < 1.0);
  CHECK(q[1] < 1.0);
  CHECK(torus_distance(vec1(0.05), vec1(0.95)) == doctest::Approx(0.1));
}

TEST_CASE("fenchel hamiltonian examples") {
  auto free1 = make_free_particle(1);
  auto pend = make_pendulum();
  CHECK(fenchel_hamiltonian(*free1, {vec1(0.3), vec1(0.8)}) == doctest::Approx(0.32).epsilon(1e-12));
  CHECK(std::abs(fenchel_hamiltonian(*pend, {vec1(0.0), vec1(0.0)})) < 1e-14);
  CHECK(fenchel_hamiltonian(*pend, {vec1(0.5), vec1(1.0)}) == doctest::Approx(-1.5).epsilon(1e-12));
}

TEST_CASE("legendre transform examples") {
  auto free1 = make_free_particle(1);
  auto pend = make_pendulum();
  CHECK(legendre_transform(*free1, vec1(0.2), vec1(1.5)).p[0] == doctest::Approx(1.5));
  CHECK(legendre_transform(*pend, vec1(0.25), vec1(-2.0)).p[0] == doctest::Approx(-2.0));
  auto q = legendre_transform(*mane_half(), vec1(0.1), vec1(0.5));
  CHECK(q.x[0] == doctest::Approx(0.1));
  CHECK(std::abs(q.p[0]) < 1e-14);
}

TEST_CASE("inverse legendre round trip") {
  auto free1 = make_free_particle(1);
  auto pend = make_pendulum();
  CHECK(inverse_legendre(*free1, {vec1(0.2), vec1(1.5)}).v[0] == doctest::Approx(1.5));
  CHECK(inverse_legendre(*pend, {vec1(0.5), vec1(2.0)}).v[0] == doctest::Approx(2.0));

  // A non-quadratic fiber so Newton really iterates.
  FourierSeries X(1, 0.0);
  X.add_mode(IVec::Constant(1, 1), 0.3, 0.2);
  auto mane = make_mane({X});
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ux(0.0, 1.0), up(-5.0, 5.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    CotangentPoint q{vec1(ux(rng)), vec1(up(rng))};
    for (const Model& m : {pend, mane}) {
      auto tp = inverse_legendre(*m, q);
      auto back = legendre_transform(*m, tp.x, tp.v);
      worst = std::max(worst, std::abs(back.p[0] - q.p[0]));
    }
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("energy examples") {
  auto pend = make_pendulum();
  auto free1 = make_free_particle(1);
  CHECK(std::abs(energy(*pend, vec1(0.0), vec1(0.0))) < 1e-15);
  CHECK(energy(*pend, vec1(0.5), vec1(0.0)) == doctest::Approx(-2.0));
  CHECK(energy(*free1, vec1(0.77), vec1(1.3)) == doctest::Approx(0.5 * 1.69));
  for (double x : {0.1, 0.4, 0.8}) {
    for (double v : {-2.0, 0.3, 1.7}) {
      auto q = legendre_transform(*pend, vec1(x), vec1(v));
      CHECK(energy(*pend, vec1(x), vec1(v)) == doctest::Approx(fenchel_hamiltonian(*pend, q)).epsilon(1e-12));
    }
  }
}

TEST_CASE("shift by one form") {
  auto free1 = make_free_particle(1);
  auto shifted = shift_by_one_form(free1, OneForm::constant(1.0));
  CHECK(shifted->value(vec1(0.3), vec1(2.0)) == doctest::Approx(2.0 - 2.0));
  CHECK(shifted->hess_vv(vec1(0.3), vec1(2.0))(0, 0) == doctest::Approx(1.0));

  auto pend = make_pendulum();
  auto back = shift_by_one_form(shift_by_one_form(pend, OneForm::constant(0.7)), OneForm::constant(-0.7));
  for (int i = 0; i < 20; ++i) {
    const double x = i / 20.0, v = -3.0 + 0.3 * i;
    CHECK(back->value(vec1(x), vec1(v)) == pend->value(vec1(x), vec1(v)));
  }
}

TEST_CASE("fenchel inequality and equality case") {
  auto pend = make_pendulum();
  FourierSeries X(1, 0.1);
  X.add_mode(IVec::Constant(1, 2), 0.0, 0.4);
  auto mane = make_mane({X});
  for (const Model& m : {pend, mane}) {
    for (double x : {0.0, 0.21, 0.5, 0.93}) {
      for (double p : {-3.0, -0.4, 0.0, 1.1, 2.5}) {
        const double H = fenchel_hamiltonian(*m, {vec1(x), vec1(p)});
        for (double v : {-4.0, -1.0, 0.0, 0.5, 2.0, 4.0}) {
          CHECK(m->value(vec1(x), vec1(v)) + H - p * v >= -1e-12);
        }
        const Vec vs = inverse_legendre(*m, {vec1(x), vec1(p)}).v;
        CHECK(std::abs(m->value(vec1(x), vs) + H - p * vs[0]) < 1e-8);
      }
    }
  }
}

TEST_CASE("duality round trip recovers L") {
  auto pend = make_pendulum();
  // L(x, v) = sup_p (p v - H(x, p)); the sup is at p = grad_v L, found here by
  // Newton on dH/dp = v using the fiber maximizer as dH/dp.
  for (double x : {0.0, 0.3, 0.7}) {
    for (double v : {-2.0, 0.0, 1.5}) {
      double p = 0.0;
      for (int it = 0; it < 30; ++it) {
        const auto r = fenchel_maximizer(*pend, {vec1(x), vec1(p)});
        const double h = 1e-6;
        const double d2 = (fenchel_maximizer(*pend, {vec1(x), vec1(p + h)}).velocity[0] -
                           fenchel_maximizer(*pend, {vec1(x), vec1(p - h)}).velocity[0]) / (2 * h);
        p -= (r.velocity[0] - v) / d2;
      }
      const double L = p * v - fenchel_hamiltonian(*pend, {vec1(x), vec1(p)});
      CHECK(std::abs(L - pend->value(vec1(x), vec1(v))) < 1e-8);
    }
  }
}

TEST_CASE("hamiltonian of shifted lagrangian") {
  auto pend = make_pendulum();
  FourierSeries f(1, 0.0);
  f.add_mode(IVec::Constant(1, 1), 0.0, 0.1);
  OneForm eta(vec1(0.4), f);
  auto shifted = shift_by_one_form(pend, eta);
  for (double x : {0.05, 0.35, 0.6}) {
    for (double p : {-1.0, 0.2, 2.0}) {
      const double lhs = fenchel_hamiltonian(*shifted, {vec1(x), vec1(p)});
      const double rhs = fenchel_hamiltonian(*pend, {vec1(x), eta.eval(vec1(x)) + vec1(p)});
      CHECK(std::abs(lhs - rhs) < 1e-10);
    }
  }
}

TEST_CASE("hessian positive definite on samples and audit passes") {
  auto pend2 = make_pendulum(2);
  auto rep = audit_model(*pend2);
  CHECK(rep.passed);
  CHECK(rep.min_hessian_eigenvalue > 0.0);
  CHECK(audit_model(*mane_half()).passed);
}

TEST_CASE("audit rejects a non-convex custom model") {
  CustomCallbacks cb;
  cb.value = [](const Vec&, const Vec& v) { return -0.5 * v.squaredNorm(); };
  cb.grad_x = [](const Vec& x, const Vec&) { return Vec::Zero(x.size()).eval(); };
  cb.grad_v = [](const Vec&, const Vec& v) { return (-v).eval(); };
  cb.hess_vv = [](const Vec& x, const Vec&) { return (-Mat::Identity(x.size(), x.size())).eval(); };
  auto m = make_custom(cb);
  CHECK_FALSE(audit_model(*m).passed);
}

TEST_CASE("audit detects inconsistent gradients") {
  CustomCallbacks cb;
  cb.value = [](const Vec&, const Vec& v) { return 0.5 * v.squaredNorm(); };
  cb.grad_x = [](const Vec& x, const Vec&) { return Vec::Zero(x.size()).eval(); };
  cb.grad_v = [](const Vec&, const Vec& v) { return (2.0 * v).eval(); };
  cb.hess_vv = [](const Vec& x, const Vec&) { return Mat::Identity(x.size(), x.size()).eval(); };
  auto rep = audit_model(*make_custom(cb));
  CHECK_FALSE(rep.passed);
  CHECK(rep.max_gradient_mismatch > 0.1);
}

TEST_CASE("model loader") {
  auto m = load_model_json(nlohmann::json::parse(R"({"family":"mechanical-pendulum","dim":1})"));
  CHECK(m->value(vec1(0.5), vec1(0.0)) == doctest::Approx(2.0));
  CHECK_THROWS_AS(load_model_json(nlohmann::json::parse(R"({"family":"nonsense"})")), Error);
  auto bad = nlohmann::json::parse(R"({"family":"riemannian-flat","dim":1,"params":{"metric":[[-1.0]]}})");
  try {
    load_model_json(bad);
    FAIL("expected rejection");
  } catch (const Error& e) {
    CHECK((e.kind() == ErrorKind::ModelRejected || e.kind() == ErrorKind::BadInput));
  }
  auto j = make_pendulum(2, 1.0, 2)->to_json();
  auto again = load_model_json(j);
  CHECK(again->value(make_vec({0.1, 0.3}), make_vec({0.2, -0.4})) ==
        doctest::Approx(make_pendulum(2, 1.0, 2)->value(make_vec({0.1, 0.3}), make_vec({0.2, -0.4}))));
}

TEST_CASE("one form loop integrals and zero mean") {
  FourierSeries f(1, 0.0);
  f.add_mode(IVec::Constant(1, 3), 0.2, -0.7);
  OneForm eta(vec1(0.9), f);
  double integral = 0.0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) integral += eta.eval(vec1((i + 0.5) / n))[0] / n;
  CHECK(integral == doctest::Approx(0.9).epsilon(1e-12));
}
