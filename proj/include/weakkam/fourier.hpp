#pragma once

#include "weakkam/linalg.hpp"

#include "json.hpp"

#include <vector>

namespace weakkam {

/// One term a*cos(2*pi*k.x) + b*sin(2*pi*k.x).
struct FourierMode {
  IVec k;
  double cos_coef = 0.0;
  double sin_coef = 0.0;
};

/// Real trigonometric polynomial on T^d. Used for potentials, vector-field
/// components, exact parts of one-forms and closedness test functions.
class FourierSeries {
 public:
  FourierSeries() = default;
  explicit FourierSeries(int dim, double constant = 0.0) : dim_(dim), constant_(constant) {}

  int dim() const { return dim_; }
  double constant() const { return constant_; }
  const std::vector<FourierMode>& modes() const { return modes_; }
  bool empty() const { return modes_.empty() && constant_ == 0.0; }
  bool is_constant() const { return modes_.empty(); }

  FourierSeries& add_mode(const IVec& k, double cos_coef, double sin_coef);
  FourierSeries& set_constant(double c) {
    constant_ = c;
    return *this;
  }

  double value(const Vec& x) const;
  Vec gradient(const Vec& x) const;
  Mat hessian(const Vec& x) const;
  /// (i,j) -> sum_l d^3 f / dx_i dx_j dx_l * w_l.
  Mat third_contracted(const Vec& x, const Vec& w) const;

  /// Value, gradient and hessian in one pass. Null outputs are skipped.
  void evaluate(const Vec& x, double* value, Vec* grad, Mat* hess) const;

  /// Mean of the gradient over the torus is always zero; exposed for audits.
  double mean() const { return constant_; }

  FourierSeries scaled(double s) const;

  nlohmann::json to_json() const;
  static FourierSeries from_json(int dim, const nlohmann::json& j);

 private:
  int dim_ = 1;
  double constant_ = 0.0;
  std::vector<FourierMode> modes_;
};

}  // namespace weakkam
