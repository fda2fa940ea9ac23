#pragma once

#include "weakkam/dynamics.hpp"
#include "weakkam/mane.hpp"

#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace weakkam {

enum class AlphaRoute { CriticalValue, ClosedMeasureLP, InfMaxSubsolution };

std::string_view to_string(AlphaRoute r);
AlphaRoute alpha_route_from_string(std::string_view s);

/// Tensor grid for the holonomic-measure linear program: x_points per axis
/// on [0,1), v_points per axis on [v_min, v_max], closedness tested against
/// cos and sin of 2 pi k.x for 1 <= |k|_inf <= fourier_order.
struct LPGridSpec {
  int x_points = 64;
  double v_min = -4.0;
  double v_max = 4.0;
  int v_points = 65;
  int fourier_order = 8;
};

struct LPMeasureResult {
  OccupationMeasure measure;  ///< atoms with positive weight
  double value = 0.0;         ///< optimal sum of weights times L_eta
  long pivots = 0;
};

/// Minimizes the L_eta-action over closed probability measures on the grid.
/// Throws LPInfeasible.
LPMeasureResult solve_holonomic_lp(const Model& model, const OneForm& form, const LPGridSpec& grid = {});
OccupationMeasure mather_measure_lp(const Model& model, const OneForm& form, const LPGridSpec& grid = {});

/// u is a trigonometric polynomial with modes 1 <= |k|_inf <= order; the
/// soft-max of H(x, c + du) over the grid is minimized by damped Newton at
/// temperatures annealed geometrically from tau_start to tau_end.
struct InfMaxOptions {
  int fourier_order = 16;
  /// Order used when d >= 2, where the mode count grows like order^d.
  int fourier_order_multi = 4;
  int x_points = 256;
  int x_points_multi = 32;
  double tau_start = 10.0;
  double tau_end = 1000.0;
  int stages = 7;
  int newton_iterations = 60;
  /// The reported max is taken on a grid refined by this factor per axis.
  int check_refinement = 4;
};

struct AlphaOptions {
  LPGridSpec lp;
  InfMaxOptions inf_max;
  CriticalValueOptions critical;
};

struct AlphaSample {
  Vec c;
  double value = 0.0;
  AlphaRoute route = AlphaRoute::CriticalValue;
  std::map<std::string, double> diagnostics;
};

AlphaSample alpha(const Model& model, const Vec& c, AlphaRoute route, const AlphaOptions& opts = {});

/// Inf-max route with access to the optimizing subsolution.
struct InfMaxResult {
  double value = 0.0;         ///< max over the check grid of H(x, c + du)
  double soft_value = 0.0;    ///< soft-max at the final temperature
  FourierSeries u;            ///< zero-mean primitive
  int iterations = 0;
};
InfMaxResult inf_max_alpha(const Model& model, const Vec& c, const InfMaxOptions& opts = {});

/// alpha sampled on a tensor grid of cohomology classes. When built from a
/// model it keeps an evaluator, so flat edges can be refined off the grid.
class AlphaTable {
 public:
  using Evaluator = std::function<double(const Vec&)>;

  AlphaTable(std::vector<std::vector<double>> axes, std::vector<double> values, Evaluator eval = {});

  /// Samples every node (OpenMP parallel over nodes).
  static AlphaTable build(const Model& model, std::vector<std::vector<double>> axes, AlphaRoute route,
                          const AlphaOptions& opts = {});

  int dim() const { return static_cast<int>(axes_.size()); }
  const std::vector<std::vector<double>>& axes() const { return axes_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  Vec node(std::size_t flat) const;
  std::vector<int> index(std::size_t flat) const;
  std::size_t flat(const std::vector<int>& index) const;
  double at(const std::vector<int>& index) const { return values_[flat(index)]; }

  bool can_evaluate() const { return static_cast<bool>(eval_); }
  /// Direct alpha evaluation; throws BadInput without an evaluator.
  double evaluate(const Vec& c) const;

 private:
  std::vector<std::vector<double>> axes_;
  std::vector<double> values_;
  Evaluator eval_;
};

struct BetaSample {
  Vec h;
  double value = 0.0;
  Vec supporting_c;
};

/// beta(h) = max_c (c.h - alpha(c)): grid argmax, then a local quadratic fit
/// on the surrounding 3^d stencil. Throws SupOnBoundary.
BetaSample beta(const AlphaTable& table, const Vec& h);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
  bool contains(double x, double tol = 0.0) const { return x >= lo - tol && x <= hi + tol; }
};

/// Per-axis one-sided slopes at a table node, Richardson-extrapolated from
/// steps Delta and 2 Delta. A side whose samples agree with alpha(c) within
/// flat_tolerance is flat and gets slope exactly 0. c must be a node with two
/// nodes on each side along every axis.
std::vector<Interval> subderivative_interval(const AlphaTable& table, const Vec& c, double flat_tolerance = 1e-7);

/// d = 1: the flat {c : alpha(c) <= alpha(0) + tolerance}, which equals the
/// subdifferential of beta at 0. Edges are bisected to edge_width when the
/// table can evaluate alpha, otherwise they are grid nodes.
Interval beta_subderivative_at_zero(const AlphaTable& table, double tolerance = 1e-7, double edge_width = 1e-4);

}  // namespace weakkam
