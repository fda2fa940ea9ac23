#pragma once

// Closed-form quantities for V(x) = a (1 - cos 2 pi n x), L = 1/2 v^2 + V,
// evaluated by adaptive quadrature. Independent of the variational code; used
// only as a reference by tests and the regression command.

namespace weakkam::oracle {

struct PendulumParams {
  double amplitude = 1.0;
  int frequency = 1;
};

/// Period of the rotation orbit of energy E > 0: integral of dx / sqrt(2(E + V)).
double rotation_period(double E, const PendulumParams& p = {});

/// c+(E) = integral of sqrt(2(E + V)) dx, E >= 0.
double rotation_momentum(double E, const PendulumParams& p = {});

/// Edge of the flat of alpha: c+(0).
double flat_edge(const PendulumParams& p = {});

/// Energy E* >= 0 with c+(E*) = |c|; requires |c| >= flat_edge.
double energy_for_momentum(double c, const PendulumParams& p = {});

/// Energy with rotation_period(E) = 1 / |h|; requires h != 0.
double energy_for_rotation(double h, const PendulumParams& p = {});

double alpha(double c, const PendulumParams& p = {});
double beta(double h, const PendulumParams& p = {});

/// Critical Mane potential Phi_{0,0}(x, y) on the circle, minimizing over the
/// two arcs; integral of sqrt(2 V) along the shorter-action arc.
double critical_potential(double x, double y, const PendulumParams& p = {});

}  // namespace weakkam::oracle
