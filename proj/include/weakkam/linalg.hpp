#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace weakkam {

/// Largest torus dimension supported. Vectors and matrices are stack
/// allocated up to this size, so the hot loops never touch the heap.
inline constexpr int kMaxDim = 3;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;
using IVec = Eigen::Matrix<int, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Componentwise reduction into [0,1).
inline Vec wrap_unit(const Vec& x) {
  Vec out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double r = x[i] - std::floor(x[i]);
    if (r >= 1.0) r = 0.0;
    out[i] = r;
  }
  return out;
}

/// Minimal-image representative of a displacement: each component in [-1/2, 1/2].
inline Vec minimal_image(const Vec& d) {
  Vec out(d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) out[i] = d[i] - std::round(d[i]);
  return out;
}

/// Point of the flat torus T^d, stored by its representative in [0,1)^d.
class TorusPoint {
 public:
  TorusPoint() = default;
  explicit TorusPoint(const Vec& coords) : coords_(wrap_unit(coords)) {}
  explicit TorusPoint(double x) : coords_(wrap_unit(Vec::Constant(1, x))) {}

  const Vec& coords() const { return coords_; }
  int dim() const { return static_cast<int>(coords_.size()); }
  double operator[](int i) const { return coords_[i]; }

 private:
  Vec coords_;
};

inline double torus_distance(const Vec& a, const Vec& b) { return minimal_image(a - b).norm(); }
inline double torus_distance(const TorusPoint& a, const TorusPoint& b) {
  return torus_distance(a.coords(), b.coords());
}

inline Vec vec1(double x) { return Vec::Constant(1, x); }

inline Vec make_vec(const std::vector<double>& values) {
  Vec v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) v[static_cast<Eigen::Index>(i)] = values[i];
  return v;
}

}  // namespace weakkam
