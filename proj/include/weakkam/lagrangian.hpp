#pragma once

#include "weakkam/fourier.hpp"
#include "weakkam/linalg.hpp"

#include "json.hpp"

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace weakkam {

enum class ModelFamily { RiemannianFlat, MechanicalPendulum, MechanicalCustom, ManeVectorField, Custom };

std::string_view to_string(ModelFamily f);
ModelFamily model_family_from_string(std::string_view s);

/// Value and all first and second derivatives of L at one (x, v).
/// hxv(i, j) = d^2 L / dx_i dv_j.
struct LagrangianJet {
  double value = 0.0;
  Vec gx, gv;
  Mat hvv, hxv, hxx;
};

/// A Tonelli Lagrangian on T^d x R^d. Implementations are immutable, so a
/// model may be shared freely between threads.
class Lagrangian {
 public:
  virtual ~Lagrangian() = default;

  virtual int dim() const = 0;
  virtual ModelFamily family() const = 0;
  virtual double value(const Vec& x, const Vec& v) const = 0;
  virtual Vec grad_x(const Vec& x, const Vec& v) const = 0;
  virtual Vec grad_v(const Vec& x, const Vec& v) const = 0;
  virtual Mat hess_vv(const Vec& x, const Vec& v) const = 0;
  virtual LagrangianJet jet(const Vec& x, const Vec& v) const = 0;

  /// True when L(x, v) = L(x, -v) identically.
  virtual bool reversible() const { return false; }

  /// Model-file representation; the content hash of the kernel cache is
  /// taken over this.
  virtual nlohmann::json to_json() const = 0;
};

using Model = std::shared_ptr<const Lagrangian>;

/// Closed one-form eta = c + df with f a zero-mean trigonometric polynomial.
class OneForm {
 public:
  OneForm() = default;
  explicit OneForm(Vec cohomology) : c_(std::move(cohomology)), exact_(static_cast<int>(c_.size())) {}
  OneForm(Vec cohomology, FourierSeries exact_primitive);

  static OneForm constant(double c) { return OneForm(vec1(c)); }

  int dim() const { return static_cast<int>(c_.size()); }
  const Vec& cohomology() const { return c_; }
  const FourierSeries& exact_primitive() const { return exact_; }
  bool is_constant() const { return exact_.is_constant(); }

  Vec eval(const Vec& x) const;
  /// D eta(x): (i, j) = d eta_j / dx_i, the hessian of the primitive.
  Mat jacobian(const Vec& x) const;

  OneForm operator+(const OneForm& other) const;
  OneForm operator-() const;

  nlohmann::json to_json() const;
  static OneForm from_json(const nlohmann::json& j);

 private:
  Vec c_;
  FourierSeries exact_;
};

struct CotangentPoint {
  Vec x;
  Vec p;
};

// Built-in families. All derivatives are analytic.

/// L = 1/2 v^T G v with a constant positive definite metric G.
Model make_riemannian_flat(const Mat& metric);
Model make_free_particle(int dim);

/// L = 1/2 v^T G v + U(x).
Model make_mechanical(const Mat& metric, FourierSeries potential);

/// L = 1/2 |v|^2 + sum_i amplitude * (1 - cos(2 pi frequency x_i)).
/// frequency = 2 gives the doubled pendulum.
Model make_pendulum(int dim = 1, double amplitude = 1.0, int frequency = 1);

/// L = 1/2 |v - X(x)|^2 with X given componentwise by Fourier series.
Model make_mane(std::vector<FourierSeries> field);

/// User-supplied model. hess_xv and hess_xx are obtained by central
/// differences of the supplied gradients.
struct CustomCallbacks {
  std::string name = "custom";
  int dim = 1;
  std::function<double(const Vec&, const Vec&)> value;
  std::function<Vec(const Vec&, const Vec&)> grad_x;
  std::function<Vec(const Vec&, const Vec&)> grad_v;
  std::function<Mat(const Vec&, const Vec&)> hess_vv;
  bool reversible = false;
};
Model make_custom(CustomCallbacks callbacks);

/// L_eta(x, v) = L(x, v) - eta(x) . v. Same Euler-Lagrange flow as L.
Model shift_by_one_form(const Model& model, const OneForm& form);

// Fenchel-Legendre duality.

struct NewtonOptions {
  double tolerance = 1e-12;
  int max_iterations = 50;
};

struct FenchelResult {
  double value = 0.0;  ///< H(x, p)
  Vec velocity;        ///< maximizer v*, grad_v L(x, v*) = p
  int iterations = 0;
};

/// Solves grad_v L(x, v) = p by damped Newton from v0 = hess_vv(x, 0)^{-1} p.
/// Throws NoConvergence.
Vec solve_fiber_velocity(const Lagrangian& model, const Vec& x, const Vec& p, const NewtonOptions& opts = {},
                         int* iterations = nullptr);

FenchelResult fenchel_maximizer(const Lagrangian& model, const CotangentPoint& q, const NewtonOptions& opts = {});
double fenchel_hamiltonian(const Lagrangian& model, const CotangentPoint& q, const NewtonOptions& opts = {});

CotangentPoint legendre_transform(const Lagrangian& model, const Vec& x, const Vec& v);

struct TangentPoint {
  Vec x;
  Vec v;
};
TangentPoint inverse_legendre(const Lagrangian& model, const CotangentPoint& q, const NewtonOptions& opts = {});

/// E(x, v) = grad_v L . v - L.
double energy(const Lagrangian& model, const Vec& x, const Vec& v);

// Load-time audit.

struct AuditOptions {
  int samples = 200;
  double velocity_radius = 10.0;
  double fd_step = 1e-6;
  double fd_tolerance = 1e-5;
  /// Pairs (A, B) for which L(x, v) >= A |v| - B must hold on the samples.
  std::vector<std::pair<double, double>> superlinearity = {{1.0, 2.0}, {2.0, 5.0}, {4.0, 12.0}};
  std::uint64_t seed = 7;
};

struct AuditReport {
  bool passed = true;
  double min_hessian_eigenvalue = 0.0;
  double max_gradient_mismatch = 0.0;
  /// Smallest L - (A|v| - B) seen for each configured pair. This is a
  /// sampled witness of superlinearity, not a proof of it.
  std::vector<double> superlinearity_margins;
  std::vector<std::string> failures;
};

AuditReport audit_model(const Lagrangian& model, const AuditOptions& opts = {});

}  // namespace weakkam
