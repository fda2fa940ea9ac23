#pragma once

#include "weakkam/fourier.hpp"
#include "weakkam/lagrangian.hpp"

#include <ostream>
#include <vector>

namespace weakkam {

/// Sampled Euler-Lagrange trajectory. Positions are lifts to R^d and are
/// never wrapped, so lifted displacement gives rotation vectors directly.
struct Orbit {
  int dim = 1;
  std::vector<double> times;
  std::vector<Vec> positions;
  std::vector<Vec> velocities;
  std::vector<double> energies;

  std::size_t size() const { return times.size(); }
  double duration() const { return times.empty() ? 0.0 : std::abs(times.back() - times.front()); }
  double max_energy_drift() const;
};

struct FlowOptions {
  /// Accept/reject bound on max |E(t) - E(0)|, relative to max(1, |E(0)|).
  double energy_drift_tolerance = 1e-6;
  int store_every = 1;
};

/// Solves L_vv a = L_x - L_vx v. Throws SingularHessian.
Vec el_acceleration(const Lagrangian& model, const Vec& x, const Vec& v);

/// Classical RK4 with fixed step; the last step is shortened to land on t_end.
/// Throws BadInput, EnergyDriftExceeded, SingularHessian.
Orbit integrate_el_flow(const Lagrangian& model, const Vec& x0, const Vec& v0, double t_end, double dt,
                        const FlowOptions& opts = {});

/// Same flow run towards negative times; times run 0, -dt, ..., -t_end.
Orbit integrate_el_flow_backward(const Lagrangian& model, const Vec& x0, const Vec& v0, double t_end, double dt,
                                 const FlowOptions& opts = {});

Vec rotation_vector_of_orbit(const Orbit& orbit);

/// Action of L_eta + k along a sampled orbit (trapezoid rule).
double orbit_action(const Orbit& orbit, const Lagrangian& model, const OneForm& form, double k = 0.0);

struct Atom {
  Vec x;  ///< on [0,1)^d
  Vec v;
  double weight = 0.0;
};

/// Finitely supported probability measure on T^d x R^d.
struct OccupationMeasure {
  int dim = 1;
  std::vector<Atom> atoms;

  double total_weight() const;
  Vec rotation_vector() const;  ///< sum w_i v_i
};

/// Time average along the orbit with trapezoid end weights. Consecutive
/// identical samples are merged, so a fixed point yields one atom.
OccupationMeasure occupation_measure(const Orbit& orbit);

/// lambda * a + (1 - lambda) * b.
OccupationMeasure convex_combination(const OccupationMeasure& a, const OccupationMeasure& b, double lambda);

/// sum w_i (L(x_i, v_i) - eta(x_i) . v_i)
double average_action(const OccupationMeasure& measure, const Lagrangian& model, const OneForm& form);

/// |sum w_i grad f(x_i) . v_i|; zero for invariant measures.
double closedness_defect(const OccupationMeasure& measure, const FourierSeries& f);

/// Columns t, x_1..x_d (lifted), v_1..v_d, E.
void write_orbit_csv(std::ostream& os, const Orbit& orbit);

}  // namespace weakkam
