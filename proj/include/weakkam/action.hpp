#pragma once

#include "weakkam/lagrangian.hpp"

#include <cstdint>
#include <limits>
#include <vector>

namespace weakkam {

/// How a travel time T is turned into a node count. Exact-discrete callers
/// (potential, barrier, sets) use T = N * dt with dt fixed, so concatenating two
/// discrete paths is again an admissible discrete path.
struct DiscretizationPolicy {
  double dt = 0.01;
  int min_nodes = 8;
  int max_nodes = 1 << 16;
  /// Report (4 S_2N - S_N) / 3 instead of S_N.
  bool richardson = false;

  int segments_for(double T) const;
};

/// Curve on the universal cover sampled at N + 1 uniform times in [0, T].
struct LiftedPath {
  double T = 0.0;
  std::vector<Vec> nodes;

  int segments() const { return static_cast<int>(nodes.size()) - 1; }
  double step() const { return T / segments(); }
  Vec segment_velocity(int i) const { return (nodes[i + 1] - nodes[i]) / step(); }
  Vec segment_midpoint(int i) const { return 0.5 * (nodes[i] + nodes[i + 1]); }
};

LiftedPath straight_path(const Vec& from, const Vec& to, double T, int N);

/// Resamples onto N segments by linear interpolation in normalized time.
LiftedPath resample_path(const LiftedPath& path, int N);

/// Extends a path to N >= segments() by repeating the slowest node, keeping
/// the time step; the natural warm start when only the waiting time grows.
LiftedPath extend_path_at_rest(const LiftedPath& path, int N);

/// Midpoint-rule action sum dt * L(midpoint, velocity) of an already shifted
/// Lagrangian.
double discrete_action(const Lagrangian& model, const LiftedPath& path);

struct PathMinimizerOptions {
  double gradient_tolerance = 1e-8;
  /// Also stop once three accepted steps each predict a relative decrease
  /// below this; reported as not converged unless the gradient test passes.
  double value_tolerance = 1e-12;
  int max_iterations = 200;
  /// Multistart: straight line plus perturbations of this amplitude.
  double start_amplitude = 0.5;
  int extra_starts = 3;
  std::uint64_t seed = 1;
};

struct PathResult {
  LiftedPath path;
  double action = std::numeric_limits<double>::infinity();
  double gradient_norm = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
  /// Stationary but the unregularized discrete Hessian is indefinite.
  bool saddle = false;
};

/// Local damped Newton on the interior nodes; endpoints stay fixed.
/// Throws NoConvergence when the line search stalls far from stationarity.
PathResult refine_path(const Lagrangian& shifted, LiftedPath initial, const PathMinimizerOptions& opts = {});

/// Best local minimizer over the multistart family from lift(x) to
/// lift(y) + winding. `shifted` must already include the one-form.
PathResult minimize_fixed_time(const Lagrangian& shifted, const Vec& x, const Vec& y, const IVec& winding, double T,
                               int N, const PathMinimizerOptions& opts = {}, const LiftedPath* warm = nullptr);

/// Best refined path over explicitly supplied starts (endpoints taken from
/// each start).
PathResult minimize_from_starts(const Lagrangian& shifted, std::vector<LiftedPath> starts,
                                const PathMinimizerOptions& opts = {});

/// Path on N >= segments() segments with the same step: `path` followed by
/// copies of itself translated by its displacement, then linearly corrected to
/// end at `end`. The warm start for rotation-type minimizers when time grows.
LiftedPath extend_periodic(const LiftedPath& path, int N, const Vec& end);

/// Adds a linear-in-time correction so the path ends at `end`.
LiftedPath retarget_path(LiftedPath path, const Vec& end);

/// Discrete action of the straight segment; cheap proxy for ranking windings.
double straight_line_action(const Lagrangian& shifted, const Vec& from, const Vec& to, double T, int N);

/// Winding minimizing the straight-line proxy, by integer coordinate descent
/// from `start`.
IVec proxy_best_winding(const Lagrangian& shifted, const Vec& x, const Vec& y, double T, int N, IVec start);

/// Public form taking the unshifted model and the one-form.
PathResult minimize_action_fixed_time(const Model& model, const OneForm& form, const Vec& x, const Vec& y,
                                      const IVec& winding, double T, int N, const PathMinimizerOptions& opts = {});

/// All integer vectors with sup-norm at most radius around center.
std::vector<IVec> winding_box(const IVec& center, int radius);

/// Winding whose straight segment from x to y + w is shortest.
IVec nearest_winding(const Vec& x, const Vec& y);

struct WindingResult {
  double action = std::numeric_limits<double>::infinity();
  IVec winding;
  PathResult best;
};

/// h_{eta,T}(x, y): minimum over the winding box. The box is centered on the
/// minimal-image winding and walks outward while the best class lies on its
/// boundary.
WindingResult min_action_over_windings(const Model& model, const OneForm& form, const Vec& x, const Vec& y,
                                       double T, int N, int winding_radius = 2,
                                       const PathMinimizerOptions& opts = {});

/// Stateful helper bundling the shifted model and a discretization policy.
class ActionSolver {
 public:
  ActionSolver(const Model& model, const OneForm& form, DiscretizationPolicy policy = {},
               PathMinimizerOptions opts = {});

  const Lagrangian& shifted() const { return *shifted_; }
  const Model& shifted_model() const { return shifted_; }
  const DiscretizationPolicy& policy() const { return policy_; }
  const PathMinimizerOptions& options() const { return opts_; }
  int dim() const { return shifted_->dim(); }

  /// Travel time actually used for a requested T: N dt in exact-discrete mode,
  /// T itself when extrapolating.
  double admissible_time(double T) const;

  /// Fixed-time action in one class, with Richardson if the policy asks.
  /// Warm paths are resampled and retargeted. The straight line is tried when
  /// there are no warm paths, when they fail to reach a strict local minimum,
  /// or when `multistart` is set; the perturbed family only in the last case.
  PathResult solve(const Vec& x, const Vec& y, const IVec& winding, double T, const std::vector<LiftedPath>& warm = {},
                   bool multistart = true) const;

  /// h_{eta,T}(x, y) over windings.
  WindingResult over_windings(const Vec& x, const Vec& y, double T, int radius = 2) const;

 private:
  Model shifted_;
  DiscretizationPolicy policy_;
  PathMinimizerOptions opts_;
};

}  // namespace weakkam
