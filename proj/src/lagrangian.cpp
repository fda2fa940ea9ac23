#include "weakkam/lagrangian.hpp"

#include "weakkam/error.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

namespace weakkam {

std::string_view to_string(ModelFamily f) {
  switch (f) {
    case ModelFamily::RiemannianFlat: return "riemannian-flat";
    case ModelFamily::MechanicalPendulum: return "mechanical-pendulum";
    case ModelFamily::MechanicalCustom: return "mechanical-custom";
    case ModelFamily::ManeVectorField: return "mane-vectorfield";
    case ModelFamily::Custom: return "custom";
  }
  return "custom";
}

ModelFamily model_family_from_string(std::string_view s) {
  if (s == "riemannian-flat") return ModelFamily::RiemannianFlat;
  if (s == "mechanical-pendulum") return ModelFamily::MechanicalPendulum;
  if (s == "mechanical-custom") return ModelFamily::MechanicalCustom;
  if (s == "mane-vectorfield") return ModelFamily::ManeVectorField;
  if (s == "custom") return ModelFamily::Custom;
  throw Error(ErrorKind::BadInput, "unknown model family '" + std::string(s) + "'");
}

namespace {

nlohmann::json matrix_to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row;
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

bool is_identity(const Mat& m) { return m.isApprox(Mat::Identity(m.rows(), m.cols()), 0.0); }

// 1/2 v^T G v + U(x). Covers the flat Riemannian, pendulum and custom
// mechanical families; only the tag and the serialized parameters differ.
class MechanicalLagrangian final : public Lagrangian {
 public:
  MechanicalLagrangian(ModelFamily family, Mat metric, FourierSeries potential, nlohmann::json params)
      : family_(family), metric_(std::move(metric)), potential_(std::move(potential)), params_(std::move(params)) {}

  int dim() const override { return static_cast<int>(metric_.rows()); }
  ModelFamily family() const override { return family_; }
  bool reversible() const override { return true; }

  double value(const Vec& x, const Vec& v) const override {
    return 0.5 * v.dot(metric_ * v) + (potential_.empty() ? 0.0 : potential_.value(x));
  }
  Vec grad_x(const Vec& x, const Vec&) const override {
    return potential_.is_constant() ? Vec(Vec::Zero(dim())) : potential_.gradient(x);
  }
  Vec grad_v(const Vec&, const Vec& v) const override { return metric_ * v; }
  Mat hess_vv(const Vec&, const Vec&) const override { return metric_; }

  LagrangianJet jet(const Vec& x, const Vec& v) const override {
    LagrangianJet j;
    const int d = dim();
    j.gv = metric_ * v;
    j.hvv = metric_;
    j.hxv = Mat::Zero(d, d);
    if (potential_.is_constant()) {
      j.value = 0.5 * v.dot(j.gv) + potential_.constant();
      j.gx = Vec::Zero(d);
      j.hxx = Mat::Zero(d, d);
    } else {
      double u = 0.0;
      potential_.evaluate(x, &u, &j.gx, &j.hxx);
      j.value = 0.5 * v.dot(j.gv) + u;
    }
    return j;
  }

  nlohmann::json to_json() const override {
    return {{"family", std::string(to_string(family_))}, {"dim", dim()}, {"params", params_}};
  }

 private:
  ModelFamily family_;
  Mat metric_;
  FourierSeries potential_;
  nlohmann::json params_;
};

class ManeLagrangian final : public Lagrangian {
 public:
  explicit ManeLagrangian(std::vector<FourierSeries> field) : field_(std::move(field)) {}

  int dim() const override { return static_cast<int>(field_.size()); }
  ModelFamily family() const override { return ModelFamily::ManeVectorField; }

  double value(const Vec& x, const Vec& v) const override { return 0.5 * (v - field_at(x)).squaredNorm(); }
  Vec grad_x(const Vec& x, const Vec& v) const override { return jet(x, v).gx; }
  Vec grad_v(const Vec& x, const Vec& v) const override { return v - field_at(x); }
  Mat hess_vv(const Vec&, const Vec&) const override { return Mat::Identity(dim(), dim()); }

  LagrangianJet jet(const Vec& x, const Vec& v) const override {
    const int d = dim();
    Vec X(d);
    Mat DX(d, d);  // DX(i, j) = dX_j / dx_i
    std::vector<Mat> HX(static_cast<std::size_t>(d));
    for (int jc = 0; jc < d; ++jc) {
      double val = 0.0;
      Vec g(d);
      Mat h(d, d);
      field_[static_cast<std::size_t>(jc)].evaluate(x, &val, &g, &h);
      X[jc] = val;
      DX.col(jc) = g;
      HX[static_cast<std::size_t>(jc)] = h;
    }
    const Vec r = v - X;
    LagrangianJet j;
    j.value = 0.5 * r.squaredNorm();
    j.gv = r;
    j.gx = -DX * r;
    j.hvv = Mat::Identity(d, d);
    j.hxv = -DX;
    j.hxx = DX * DX.transpose();
    for (int jc = 0; jc < d; ++jc) j.hxx -= r[jc] * HX[static_cast<std::size_t>(jc)];
    return j;
  }

  nlohmann::json to_json() const override {
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& f : field_) comps.push_back(f.to_json());
    return {{"family", "mane-vectorfield"}, {"dim", dim()}, {"params", {{"field", comps}}}};
  }

 private:
  Vec field_at(const Vec& x) const {
    Vec X(dim());
    for (int i = 0; i < dim(); ++i) X[i] = field_[static_cast<std::size_t>(i)].value(x);
    return X;
  }

  std::vector<FourierSeries> field_;
};

class CustomLagrangian final : public Lagrangian {
 public:
  explicit CustomLagrangian(CustomCallbacks cb) : cb_(std::move(cb)) {}

  int dim() const override { return cb_.dim; }
  ModelFamily family() const override { return ModelFamily::Custom; }
  bool reversible() const override { return cb_.reversible; }
  double value(const Vec& x, const Vec& v) const override { return cb_.value(x, v); }
  Vec grad_x(const Vec& x, const Vec& v) const override { return cb_.grad_x(x, v); }
  Vec grad_v(const Vec& x, const Vec& v) const override { return cb_.grad_v(x, v); }
  Mat hess_vv(const Vec& x, const Vec& v) const override { return cb_.hess_vv(x, v); }

  LagrangianJet jet(const Vec& x, const Vec& v) const override {
    const int d = dim();
    constexpr double h = 1e-6;
    LagrangianJet j;
    j.value = cb_.value(x, v);
    j.gx = cb_.grad_x(x, v);
    j.gv = cb_.grad_v(x, v);
    j.hvv = cb_.hess_vv(x, v);
    j.hxv.resize(d, d);
    j.hxx.resize(d, d);
    for (int i = 0; i < d; ++i) {
      Vec xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      j.hxv.row(i) = ((cb_.grad_v(xp, v) - cb_.grad_v(xm, v)) / (2 * h)).transpose();
      j.hxx.col(i) = (cb_.grad_x(xp, v) - cb_.grad_x(xm, v)) / (2 * h);
    }
    j.hxx = 0.5 * (j.hxx + j.hxx.transpose()).eval();
    return j;
  }

  nlohmann::json to_json() const override {
    return {{"family", "custom"}, {"dim", dim()}, {"params", {{"name", cb_.name}}}};
  }

 private:
  CustomCallbacks cb_;
};

class ShiftedLagrangian final : public Lagrangian {
 public:
  ShiftedLagrangian(Model base, OneForm form) : base_(std::move(base)), form_(std::move(form)) {}

  const Model& base() const { return base_; }
  const OneForm& form() const { return form_; }

  int dim() const override { return base_->dim(); }
  ModelFamily family() const override { return base_->family(); }

  double value(const Vec& x, const Vec& v) const override { return base_->value(x, v) - form_.eval(x).dot(v); }
  Vec grad_x(const Vec& x, const Vec& v) const override {
    Vec g = base_->grad_x(x, v);
    if (!form_.is_constant()) g -= form_.jacobian(x) * v;
    return g;
  }
  Vec grad_v(const Vec& x, const Vec& v) const override { return base_->grad_v(x, v) - form_.eval(x); }
  Mat hess_vv(const Vec& x, const Vec& v) const override { return base_->hess_vv(x, v); }

  LagrangianJet jet(const Vec& x, const Vec& v) const override {
    LagrangianJet j = base_->jet(x, v);
    if (form_.is_constant()) {
      j.value -= form_.cohomology().dot(v);
      j.gv -= form_.cohomology();
      return j;
    }
    const Vec eta = form_.eval(x);
    const Mat J = form_.jacobian(x);
    j.value -= eta.dot(v);
    j.gv -= eta;
    j.gx -= J * v;
    j.hxv -= J;
    j.hxx -= form_.exact_primitive().third_contracted(x, v);
    return j;
  }

  nlohmann::json to_json() const override {
    nlohmann::json j = base_->to_json();
    j["shift"] = form_.to_json();
    return j;
  }

 private:
  Model base_;
  OneForm form_;
};

}  // namespace

OneForm::OneForm(Vec cohomology, FourierSeries exact_primitive)
    : c_(std::move(cohomology)), exact_(std::move(exact_primitive)) {
  if (exact_.dim() != dim()) throw Error(ErrorKind::BadInput, "one-form primitive has wrong dimension");
  // The constant of the primitive does not contribute to eta.
  exact_.set_constant(0.0);
}

Vec OneForm::eval(const Vec& x) const {
  if (exact_.is_constant()) return c_;
  return c_ + exact_.gradient(x);
}

Mat OneForm::jacobian(const Vec& x) const {
  if (exact_.is_constant()) return Mat::Zero(dim(), dim());
  return exact_.hessian(x);
}

OneForm OneForm::operator+(const OneForm& other) const {
  if (other.dim() != dim()) throw Error(ErrorKind::BadInput, "one-form dimension mismatch");
  FourierSeries f = exact_;
  for (const auto& m : other.exact_.modes()) f.add_mode(m.k, m.cos_coef, m.sin_coef);
  return OneForm(c_ + other.c_, f);
}

OneForm OneForm::operator-() const { return OneForm(-c_, exact_.scaled(-1.0)); }

nlohmann::json OneForm::to_json() const {
  std::vector<double> c(c_.data(), c_.data() + c_.size());
  return {{"c", c}, {"exact", exact_.to_json()}};
}

OneForm OneForm::from_json(const nlohmann::json& j) {
  const Vec c = make_vec(j.at("c").get<std::vector<double>>());
  if (j.contains("exact")) return OneForm(c, FourierSeries::from_json(static_cast<int>(c.size()), j.at("exact")));
  return OneForm(c);
}

Model make_riemannian_flat(const Mat& metric) {
  nlohmann::json params = nlohmann::json::object();
  if (!is_identity(metric)) params["metric"] = matrix_to_json(metric);
  return std::make_shared<MechanicalLagrangian>(ModelFamily::RiemannianFlat, metric,
                                                FourierSeries(static_cast<int>(metric.rows())), params);
}

Model make_free_particle(int dim) { return make_riemannian_flat(Mat::Identity(dim, dim)); }

Model make_mechanical(const Mat& metric, FourierSeries potential) {
  nlohmann::json params = {{"potential", potential.to_json()}};
  if (!is_identity(metric)) params["metric"] = matrix_to_json(metric);
  return std::make_shared<MechanicalLagrangian>(ModelFamily::MechanicalCustom, metric, std::move(potential), params);
}

Model make_pendulum(int dim, double amplitude, int frequency) {
  if (dim < 1 || dim > kMaxDim) throw Error(ErrorKind::BadInput, "pendulum dimension out of range");
  FourierSeries u(dim, amplitude * dim);
  for (int i = 0; i < dim; ++i) {
    IVec k = IVec::Zero(dim);
    k[i] = frequency;
    u.add_mode(k, -amplitude, 0.0);
  }
  nlohmann::json params = {{"amplitude", amplitude}, {"frequency", frequency}};
  return std::make_shared<MechanicalLagrangian>(ModelFamily::MechanicalPendulum, Mat::Identity(dim, dim),
                                                std::move(u), params);
}

Model make_mane(std::vector<FourierSeries> field) {
  if (field.empty()) throw Error(ErrorKind::BadInput, "vector field needs at least one component");
  for (const auto& f : field)
    if (f.dim() != static_cast<int>(field.size())) throw Error(ErrorKind::BadInput, "vector field dimension mismatch");
  return std::make_shared<ManeLagrangian>(std::move(field));
}

Model make_custom(CustomCallbacks callbacks) {
  if (!callbacks.value || !callbacks.grad_x || !callbacks.grad_v || !callbacks.hess_vv)
    throw Error(ErrorKind::BadInput, "custom model needs value, grad_x, grad_v and hess_vv");
  return std::make_shared<CustomLagrangian>(std::move(callbacks));
}

Model shift_by_one_form(const Model& model, const OneForm& form) {
  if (form.dim() != model->dim()) throw Error(ErrorKind::BadInput, "one-form dimension mismatch");
  if (const auto* s = dynamic_cast<const ShiftedLagrangian*>(model.get()))
    return std::make_shared<ShiftedLagrangian>(s->base(), s->form() + form);
  return std::make_shared<ShiftedLagrangian>(model, form);
}

Vec solve_fiber_velocity(const Lagrangian& model, const Vec& x, const Vec& p, const NewtonOptions& opts,
                         int* iterations) {
  const int d = model.dim();
  Vec v = model.hess_vv(x, Vec::Zero(d)).llt().solve(p);
  Vec r = model.grad_v(x, v) - p;
  double rn = r.norm();
  const double tol = opts.tolerance * std::max(1.0, p.norm());
  for (int it = 0; it < opts.max_iterations; ++it) {
    if (rn <= tol) {
      if (iterations) *iterations = it;
      return v;
    }
    const Vec step = -model.hess_vv(x, v).ldlt().solve(r);
    double t = 1.0;
    Vec vt = v + step;
    Vec rt = model.grad_v(x, vt) - p;
    while (rt.norm() > rn && t > 1e-6) {
      t *= 0.5;
      vt = v + t * step;
      rt = model.grad_v(x, vt) - p;
    }
    v = vt;
    r = rt;
    rn = r.norm();
  }
  if (rn <= tol) {
    if (iterations) *iterations = opts.max_iterations;
    return v;
  }
  throw Error(ErrorKind::NoConvergence, "fiber Newton did not converge (residual " + std::to_string(rn) + ")");
}

FenchelResult fenchel_maximizer(const Lagrangian& model, const CotangentPoint& q, const NewtonOptions& opts) {
  FenchelResult out;
  out.velocity = solve_fiber_velocity(model, q.x, q.p, opts, &out.iterations);
  out.value = q.p.dot(out.velocity) - model.value(q.x, out.velocity);
  return out;
}

double fenchel_hamiltonian(const Lagrangian& model, const CotangentPoint& q, const NewtonOptions& opts) {
  return fenchel_maximizer(model, q, opts).value;
}

CotangentPoint legendre_transform(const Lagrangian& model, const Vec& x, const Vec& v) {
  return {x, model.grad_v(x, v)};
}

TangentPoint inverse_legendre(const Lagrangian& model, const CotangentPoint& q, const NewtonOptions& opts) {
  return {q.x, solve_fiber_velocity(model, q.x, q.p, opts)};
}

double energy(const Lagrangian& model, const Vec& x, const Vec& v) {
  return model.grad_v(x, v).dot(v) - model.value(x, v);
}

AuditReport audit_model(const Lagrangian& model, const AuditOptions& opts) {
  AuditReport rep;
  const int d = model.dim();
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  rep.min_hessian_eigenvalue = std::numeric_limits<double>::infinity();
  rep.superlinearity_margins.assign(opts.superlinearity.size(), std::numeric_limits<double>::infinity());

  for (int s = 0; s < opts.samples; ++s) {
    Vec x(d), v(d);
    for (int i = 0; i < d; ++i) {
      x[i] = unit(rng);
      v[i] = gauss(rng);
    }
    // Radius uniform in [0, R] so large speeds are sampled as often as small ones.
    v *= opts.velocity_radius * unit(rng) / std::max(v.norm(), 1e-12);

    const Mat H = model.hess_vv(x, v);
    const double asym = (H - H.transpose()).cwiseAbs().maxCoeff();
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (H + H.transpose()));
    rep.min_hessian_eigenvalue = std::min(rep.min_hessian_eigenvalue, es.eigenvalues().minCoeff());
    if (asym > 1e-9) rep.failures.push_back("hess_vv is not symmetric");

    const Vec gx = model.grad_x(x, v);
    const Vec gv = model.grad_v(x, v);
    for (int i = 0; i < d; ++i) {
      Vec xp = x, xm = x, vp = v, vm = v;
      xp[i] += opts.fd_step;
      xm[i] -= opts.fd_step;
      vp[i] += opts.fd_step;
      vm[i] -= opts.fd_step;
      const double fdx = (model.value(xp, v) - model.value(xm, v)) / (2 * opts.fd_step);
      const double fdv = (model.value(x, vp) - model.value(x, vm)) / (2 * opts.fd_step);
      rep.max_gradient_mismatch =
          std::max({rep.max_gradient_mismatch, std::abs(fdx - gx[i]) / (1.0 + std::abs(gx[i])),
                    std::abs(fdv - gv[i]) / (1.0 + std::abs(gv[i]))});
    }

    const double L = model.value(x, v);
    for (std::size_t k = 0; k < opts.superlinearity.size(); ++k) {
      const auto [A, B] = opts.superlinearity[k];
      rep.superlinearity_margins[k] = std::min(rep.superlinearity_margins[k], L - (A * v.norm() - B));
    }
  }

  if (!(rep.min_hessian_eigenvalue > 0.0)) rep.failures.push_back("hess_vv not positive definite on samples");
  if (rep.max_gradient_mismatch > opts.fd_tolerance)
    rep.failures.push_back("analytic gradients disagree with finite differences");
  for (std::size_t k = 0; k < rep.superlinearity_margins.size(); ++k)
    if (rep.superlinearity_margins[k] < 0.0)
      rep.failures.push_back("superlinearity witness fails for A=" + std::to_string(opts.superlinearity[k].first));
  rep.passed = rep.failures.empty();
  return rep;
}

}  // namespace weakkam
