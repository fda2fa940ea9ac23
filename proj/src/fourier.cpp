#include "weakkam/fourier.hpp"

#include "weakkam/error.hpp"

#include <cmath>

namespace weakkam {

FourierSeries& FourierSeries::add_mode(const IVec& k, double cos_coef, double sin_coef) {
  if (k.size() != dim_) throw Error(ErrorKind::BadInput, "Fourier mode dimension mismatch");
  modes_.push_back({k, cos_coef, sin_coef});
  return *this;
}

double FourierSeries::value(const Vec& x) const {
  double v = constant_;
  for (const auto& m : modes_) {
    const double th = kTwoPi * m.k.cast<double>().dot(x);
    v += m.cos_coef * std::cos(th) + m.sin_coef * std::sin(th);
  }
  return v;
}

Vec FourierSeries::gradient(const Vec& x) const {
  Vec g = Vec::Zero(dim_);
  evaluate(x, nullptr, &g, nullptr);
  return g;
}

Mat FourierSeries::hessian(const Vec& x) const {
  Mat h = Mat::Zero(dim_, dim_);
  evaluate(x, nullptr, nullptr, &h);
  return h;
}

void FourierSeries::evaluate(const Vec& x, double* value, Vec* grad, Mat* hess) const {
  if (value) *value = constant_;
  if (grad) grad->setZero(dim_);
  if (hess) hess->setZero(dim_, dim_);
  for (const auto& m : modes_) {
    const Vec kv = m.k.cast<double>();
    const double th = kTwoPi * kv.dot(x);
    const double c = std::cos(th);
    const double s = std::sin(th);
    const double f = m.cos_coef * c + m.sin_coef * s;
    if (value) *value += f;
    if (grad) *grad += (kTwoPi * (m.sin_coef * c - m.cos_coef * s)) * kv;
    if (hess) *hess -= (kTwoPi * kTwoPi * f) * (kv * kv.transpose());
  }
}

Mat FourierSeries::third_contracted(const Vec& x, const Vec& w) const {
  Mat out = Mat::Zero(dim_, dim_);
  for (const auto& m : modes_) {
    const Vec kv = m.k.cast<double>();
    const double th = kTwoPi * kv.dot(x);
    const double d3 = kTwoPi * kTwoPi * kTwoPi * (m.cos_coef * std::sin(th) - m.sin_coef * std::cos(th));
    out += (d3 * kv.dot(w)) * (kv * kv.transpose());
  }
  return out;
}

FourierSeries FourierSeries::scaled(double s) const {
  FourierSeries out(dim_, constant_ * s);
  for (const auto& m : modes_) out.modes_.push_back({m.k, m.cos_coef * s, m.sin_coef * s});
  return out;
}

nlohmann::json FourierSeries::to_json() const {
  nlohmann::json modes = nlohmann::json::array();
  for (const auto& m : modes_) {
    std::vector<int> k(m.k.data(), m.k.data() + m.k.size());
    modes.push_back({{"k", k}, {"cos", m.cos_coef}, {"sin", m.sin_coef}});
  }
  return {{"constant", constant_}, {"modes", modes}};
}

FourierSeries FourierSeries::from_json(int dim, const nlohmann::json& j) {
  FourierSeries f(dim, j.value("constant", 0.0));
  if (j.contains("modes")) {
    for (const auto& m : j.at("modes")) {
      const auto k = m.at("k").get<std::vector<int>>();
      if (static_cast<int>(k.size()) != dim) throw Error(ErrorKind::BadInput, "Fourier mode has wrong dimension");
      IVec kv(dim);
      for (int i = 0; i < dim; ++i) kv[i] = k[static_cast<std::size_t>(i)];
      f.add_mode(kv, m.value("cos", 0.0), m.value("sin", 0.0));
    }
  }
  return f;
}

}  // namespace weakkam
