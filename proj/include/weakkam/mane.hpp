#pragma once

#include "weakkam/action.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace weakkam {

/// Closed loop of negative (L_eta + k)-action, iterated to push the potential
/// below the divergence threshold.
struct LoopWitness {
  Vec base;
  IVec winding;
  double T = 0.0;
  double loop_action = 0.0;  ///< action of L_eta + k over one traversal
  long repetitions = 0;
  double iterated_value = 0.0;  ///< x -> base, repetitions loops, base -> y
};

struct PotentialValue {
  bool minus_infinity = false;
  double value = 0.0;
  std::optional<double> argmin_T;
  IVec winding;
  /// (T, h_T + k T) samples that produced the value.
  std::vector<std::pair<double, double>> certificate;
  std::optional<LoopWitness> witness;

  bool finite() const { return !minus_infinity; }
};

struct LoopEntry {
  Vec base;
  IVec winding;
  double T = 0.0;
  double action = 0.0;  ///< L_eta action, k excluded
};

struct LoopTableOptions {
  int base_points_per_dim = 4;
  int winding_radius = 2;
  int time_samples = 24;
  double t_min = 0.05;
  double t_max = 50.0;
};

/// Minimal L_eta loop actions A0(z, w, T) on a grid of base points, winding
/// classes and times. Independent of k, so one table answers the loop test
/// for every k: a loop is negative for L_eta + k when A0 + k T < 0.
class LoopTable {
 public:
  LoopTable(const ActionSolver& solver, const LoopTableOptions& opts = {});

  const std::vector<LoopEntry>& entries() const { return entries_; }
  /// Entry minimizing A0 + k T.
  const LoopEntry& most_negative(double k) const;
  /// max over entries of -A0 / T; the table's estimate of c(L_eta).
  double sup_ratio() const;

 private:
  std::vector<LoopEntry> entries_;
};

struct PotentialOptions {
  int scan_points = 32;
  double t_min = 0.02;
  double t_max = 50.0;
  int winding_radius = 2;
  /// Loops count as negative only below -loop_tolerance, which absorbs
  /// discretization error of the loop table.
  double loop_tolerance = 1e-2;
  double divergence_threshold = -1e6;
  /// Full multistart every this many scan levels; warm starts in between.
  int multistart_every = 8;
  LoopTableOptions loops;
};

/// Exact-discrete policy: T = N dt, no extrapolation. Two segments suffice for
/// the short hops between nearby points in fast regions.
inline DiscretizationPolicy exact_discrete_policy(double dt = 0.01) { return DiscretizationPolicy{dt, 2, 1 << 16, false}; }

/// Phi_{c,k}(x, y) = inf_T h_{eta,T}(x, y) + k T. Owns the loop table, which
/// is built once on first use and shared by every evaluation.
class ManePotential {
 public:
  ManePotential(const Model& model, const OneForm& form, DiscretizationPolicy policy = exact_discrete_policy(),
                PotentialOptions opts = {}, PathMinimizerOptions path_opts = {});

  PotentialValue operator()(double k, const Vec& x, const Vec& y) const;

  const ActionSolver& solver() const { return solver_; }
  const PotentialOptions& options() const { return opts_; }
  const LoopTable& loops() const;

 private:
  ActionSolver solver_;
  PotentialOptions opts_;
  mutable std::shared_ptr<LoopTable> loops_;
};

PotentialValue mane_potential(const Model& model, const OneForm& form, double k, const Vec& x, const Vec& y);

struct CriticalValueOptions {
  LoopTableOptions loops{4, 2, 16, 0.05, 10.0};
  int refine_candidates = 3;
  double bracket_lo = -1.0;
  double bracket_hi = 1.0;
  int max_bracket_doublings = 8;
  double width = 1e-4;
};

struct CriticalValueResult {
  double value = 0.0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  LoopEntry best_loop;
  int bisection_steps = 0;
};

/// c(L_eta) by bisection on k: below c some sampled loop has negative
/// (L_eta + k)-action, above c none does. The best loop classes are refined
/// in T (and base point) before bisecting, so the bracket closes onto the
/// refined supremum of -A/T. Throws BracketNotFound.
CriticalValueResult mane_critical_value(const ActionSolver& solver, const CriticalValueOptions& opts = {});
double mane_critical_value(const Model& model, const OneForm& form);

/// Policy used when the critical value is an accuracy target.
inline DiscretizationPolicy accurate_policy() { return DiscretizationPolicy{0.01, 8, 1 << 16, true}; }

struct BarrierOptions {
  double t0 = 5.0;
  double t_max = 160.0;
  double tolerance = 1e-3;
  int winding_radius = 2;
  /// When positive, stop early once this many consecutive rung differences
  /// are within the tolerance.
  int stable_rungs = 0;
};

struct BarrierResult {
  double value = 0.0;
  bool stabilized = false;
  IVec winding;
  /// (t, h_t + alpha t) per ladder rung.
  std::vector<std::pair<double, double>> ladder;
  LiftedPath path;  ///< minimizer at the last rung
};

/// Ladder t = t0, 2 t0, ..., t_max; the value is the last rung computed. Does not throw
/// on oscillation; see peierls_barrier.
BarrierResult peierls_ladder(const ActionSolver& solver, double alpha_c, const Vec& x, const Vec& y,
                             const BarrierOptions& opts = {});

/// As peierls_ladder, throwing NotStabilized when the last two rungs differ by
/// more than the tolerance.
BarrierResult peierls_barrier(const ActionSolver& solver, double alpha_c, const Vec& x, const Vec& y,
                              const BarrierOptions& opts = {});
double peierls_barrier(const Model& model, const OneForm& form, double alpha_c, const Vec& x, const Vec& y);

/// delta_c(x, y) = h(x, y) + h(y, x).
double delta_pseudometric(const ActionSolver& solver, double alpha_c, const Vec& x, const Vec& y,
                          const BarrierOptions& opts = {});

}  // namespace weakkam
